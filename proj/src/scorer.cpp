#include "obswin/scorer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace obswin {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string pair_file(int threshold, const char* side) {
  return "pair_" + std::to_string(threshold) + "_" + side + ".arpa";
}

std::vector<std::string> couples_of(const Corpus& corpus, const std::vector<std::size_t>& members) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (auto m : members) {
    const auto& c = corpus.interactions()[m].couple_id;
    if (seen.insert(c).second) out.push_back(c);
  }
  return out;
}

void require_sides(const std::string& behavior, int threshold, std::size_t n_low, std::size_t n_high) {
  if (n_low == 0 || n_high == 0) {
    throw Error(ErrorKind::EmptyPartitionSide,
                "behavior '" + behavior + "', threshold " + std::to_string(threshold) + ": " +
                    (n_low == 0 ? "low" : "high") + " side has no training interaction");
  }
}

}  // namespace

std::vector<Partition> build_partitions(RatingScale scale) {
  if (scale.k_max < 3) throw Error(ErrorKind::ScaleTooSmall, "rating scale needs K >= 3");
  std::vector<Partition> out;
  for (int i = 1; i <= scale.k_max - 2; ++i) out.push_back(Partition{i});
  return out;
}

ClassifierEnsemble::ClassifierEnsemble(std::string behavior, RatingScale scale,
                                       std::vector<ClassifierPair> pairs, EnsembleProvenance provenance)
    : behavior_(std::move(behavior)), scale_(scale), pairs_(std::move(pairs)),
      provenance_(std::move(provenance)) {
  if (pairs_.size() != static_cast<std::size_t>(scale_.k_max - 2)) {
    throw Error(ErrorKind::InvalidArgument, "ensemble for K=" + std::to_string(scale_.k_max) +
                                                " needs " + std::to_string(scale_.k_max - 2) + " pairs");
  }
  for (std::size_t i = 0; i < pairs_.size(); ++i) {
    if (pairs_[i].partition.threshold != static_cast<int>(i) + 1) {
      throw Error(ErrorKind::InvalidArgument, "ensemble pairs must be ordered by threshold");
    }
  }
}

const Vocabulary& ClassifierEnsemble::vocabulary() const {
  if (!trained()) throw Error(ErrorKind::EnsembleUntrained, "ensemble has no classifier pairs");
  return pairs_.front().lm_low.vocabulary();
}

void ClassifierEnsemble::save(const std::filesystem::path& dir) const {
  if (!trained()) throw Error(ErrorKind::EnsembleUntrained, "cannot save an untrained ensemble");
  std::filesystem::create_directories(dir);
  ordered_json manifest;
  manifest["behavior"] = behavior_;
  manifest["k_max"] = scale_.k_max;
  manifest["order"] = order();
  manifest["held_out_fold"] = provenance_.held_out_fold;
  manifest["held_out_couples"] = provenance_.held_out_couples;
  manifest["pairs"] = ordered_json::array();
  for (const auto& pair : pairs_) {
    const int t = pair.partition.threshold;
    for (const char* side : {"low", "high"}) {
      std::ostringstream arpa;
      (side[0] == 'l' ? pair.lm_low : pair.lm_high).write_arpa(arpa);
      write_file_atomic(dir / pair_file(t, side), arpa.str());
    }
    manifest["pairs"].push_back(
        {{"threshold", t}, {"low", pair_file(t, "low")}, {"high", pair_file(t, "high")}});
  }
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

ClassifierEnsemble ClassifierEnsemble::load(const std::filesystem::path& dir) {
  ordered_json manifest;
  try {
    manifest = ordered_json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, "ensemble manifest: " + std::string(e.what()));
  }
  try {
    auto vocab = std::make_shared<Vocabulary>();
    std::vector<ClassifierPair> pairs;
    for (const auto& p : manifest.at("pairs")) {
      std::istringstream low(read_file(dir / p.at("low").get<std::string>()));
      std::istringstream high(read_file(dir / p.at("high").get<std::string>()));
      auto lm_low = NgramModel::read_arpa(low, vocab);
      auto lm_high = NgramModel::read_arpa(high, vocab);
      pairs.push_back({Partition{p.at("threshold").get<int>()}, std::move(lm_low), std::move(lm_high)});
    }
    EnsembleProvenance prov;
    prov.held_out_fold = manifest.value("held_out_fold", -1);
    prov.held_out_couples = manifest.value("held_out_couples", std::vector<std::string>{});
    return ClassifierEnsemble(manifest.at("behavior").get<std::string>(),
                              RatingScale{manifest.at("k_max").get<int>()}, std::move(pairs),
                              std::move(prov));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, "ensemble manifest: " + std::string(e.what()));
  }
}

VectorXd cumulative_posteriors(std::span<const double> log_likelihood_ratios, RatingScale scale) {
  const int k = scale.k_max;
  if (log_likelihood_ratios.size() != static_cast<std::size_t>(k - 2)) {
    throw Error(ErrorKind::LengthMismatch, "expected one log-likelihood ratio per partition");
  }
  VectorXd c(k - 2);
  for (int i = 1; i <= k - 2; ++i) {
    // Prior mass of [1, i+1] is i/(K-1); high side carries the remaining K-1-i.
    const double low = i;
    const double high = k - 1 - i;
    const double delta = log_likelihood_ratios[static_cast<std::size_t>(i - 1)];
    if (delta >= 0.0) {
      c(i - 1) = low / (low + high * std::exp(-delta));
    } else {
      const double e = std::exp(delta);
      c(i - 1) = low * e / (low * e + high);
    }
  }
  return c;
}

ScorePmf interval_pmf(const VectorXd& cumulative, RatingScale scale) {
  const int k = scale.k_max;
  if (cumulative.size() != k - 2) {
    throw Error(ErrorKind::LengthMismatch, "expected K-2 cumulative posteriors");
  }
  ScorePmf pmf;
  pmf.masses.resize(k - 1);
  double prev = 0.0;
  for (int j = 1; j <= k - 1; ++j) {
    const double cur = j == k - 1 ? 1.0 : cumulative(j - 1);
    double m = cur - prev;
    if (m < 0.0) {
      m = 0.0;
      ++pmf.clamped;
    }
    pmf.masses(j - 1) = m;
    prev = cur;
  }
  const double total = pmf.masses.sum();
  if (total > 0.0) pmf.masses /= total;
  return pmf;
}

double expected_score(const ScorePmf& pmf) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < pmf.masses.size(); ++j) {
    s += (static_cast<double>(j) + 1.5) * pmf.masses(j);
  }
  return s;
}

WindowScore score_from_log_ratios(std::span<const double> log_likelihood_ratios, RatingScale scale) {
  WindowScore out;
  out.pmf = interval_pmf(cumulative_posteriors(log_likelihood_ratios, scale), scale);
  out.value = expected_score(out.pmf);
  return out;
}

WindowScore score_window(const ClassifierEnsemble& ensemble, std::span<const WordId> window,
                         bool pad_start, bool pad_end) {
  if (!ensemble.trained()) throw Error(ErrorKind::EnsembleUntrained, "ensemble has no classifier pairs");
  if (window.empty()) throw Error(ErrorKind::InvalidLength, "cannot score an empty window");
  std::vector<double> ratios;
  ratios.reserve(ensemble.pairs().size());
  for (const auto& pair : ensemble.pairs()) {
    ratios.push_back(sequence_log_prob(pair.lm_low, window, pad_start, pad_end) -
                     sequence_log_prob(pair.lm_high, window, pad_start, pad_end));
  }
  return score_from_log_ratios(ratios, ensemble.scale());
}

WindowScore score_window(const ClassifierEnsemble& ensemble, std::span<const std::string> window,
                         bool pad_start, bool pad_end) {
  if (!ensemble.trained()) throw Error(ErrorKind::EnsembleUntrained, "ensemble has no classifier pairs");
  const auto ids = ensemble.vocabulary().encode(window);
  return score_window(ensemble, std::span<const WordId>(ids), pad_start, pad_end);
}

ClassifierEnsemble train_ensemble(const Corpus& corpus, std::string_view behavior,
                                  const FoldPlan& fold_plan, int held_out_fold, int order) {
  const auto b = corpus.behavior_index(behavior);
  const auto& items = corpus.interactions();
  if (fold_plan.fold_of.size() != items.size()) {
    throw Error(ErrorKind::InvalidArgument, "fold plan does not match the corpus");
  }
  auto vocab = std::make_shared<Vocabulary>();
  std::vector<std::vector<WordId>> encoded(items.size());
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (fold_plan.fold_of[i] == held_out_fold) continue;
    train.push_back(i);
    for (const auto& w : items[i].tokens) encoded[i].push_back(vocab->intern(w));
  }
  if (train.empty()) throw Error(ErrorKind::EmptyTrainingSet, "every interaction is held out");

  const auto& ratings = corpus.rating_matrix();
  std::vector<ClassifierPair> pairs;
  for (const auto& part : build_partitions(corpus.scale())) {
    NgramCounts low(order), high(order);
    std::size_t n_low = 0, n_high = 0;
    for (auto i : train) {
      if (part.is_low(ratings(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)))) {
        low.add_sequence(encoded[i]);
        ++n_low;
      } else {
        high.add_sequence(encoded[i]);
        ++n_high;
      }
    }
    require_sides(std::string(behavior), part.threshold, n_low, n_high);
    pairs.push_back({part, NgramModel::estimate(low, vocab), NgramModel::estimate(high, vocab)});
  }
  EnsembleProvenance prov;
  prov.held_out_fold = held_out_fold;
  if (held_out_fold >= 0) prov.held_out_couples = couples_of(corpus, fold_plan.members(held_out_fold));
  return ClassifierEnsemble(std::string(behavior), corpus.scale(), std::move(pairs), std::move(prov));
}

EnsembleTrainer::EnsembleTrainer(const Corpus& corpus, const FoldPlan& fold_plan, int order)
    : corpus_(&corpus), folds_(&fold_plan), order_(order), vocab_(std::make_shared<Vocabulary>()) {
  if (fold_plan.fold_of.size() != corpus.size()) {
    throw Error(ErrorKind::InvalidArgument, "fold plan does not match the corpus");
  }
  NgramCounts probe(order);  // validates the order
  encoded_.reserve(corpus.size());
  for (const auto& it : corpus.interactions()) {
    std::vector<WordId> ids;
    ids.reserve(it.tokens.size());
    for (const auto& w : it.tokens) ids.push_back(vocab_->intern(w));
    encoded_.push_back(std::move(ids));
  }
}

EnsembleTrainer::BehaviorTotals::BehaviorTotals(const EnsembleTrainer& owner, std::size_t behavior)
    : owner_(&owner), behavior_(behavior) {
  const Corpus& corpus = *owner.corpus_;
  const int k = corpus.scale().k_max;
  const auto col = corpus.rating_matrix().col(static_cast<Eigen::Index>(behavior));

  // Bucket j holds ratings in (j+1, j+2], bucket 0 also takes rating 1..2.
  std::vector<NgramCounts> buckets(static_cast<std::size_t>(k - 1), NgramCounts(owner.order_));
  NgramCounts total(owner.order_);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const double r = col(static_cast<Eigen::Index>(i));
    const int bucket = std::clamp(static_cast<int>(std::ceil(r)) - 2, 0, k - 2);
    buckets[static_cast<std::size_t>(bucket)].add_sequence(owner.encoded_[i]);
  }
  for (const auto& b : buckets) total += b;

  NgramCounts low(owner.order_);
  for (int t = 1; t <= k - 2; ++t) {
    low += buckets[static_cast<std::size_t>(t - 1)];
    low_.push_back(low);
    NgramCounts high = total;
    high -= low;
    high_.push_back(std::move(high));
  }
}

ClassifierEnsemble EnsembleTrainer::BehaviorTotals::train(int held_out_fold) const {
  const Corpus& corpus = *owner_->corpus_;
  const auto& fold_of = owner_->folds_->fold_of;
  const auto col = corpus.rating_matrix().col(static_cast<Eigen::Index>(behavior_));
  const std::string& name = corpus.behaviors()[behavior_];

  std::vector<std::size_t> held;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (fold_of[i] == held_out_fold) held.push_back(i);
  }
  if (held.size() == corpus.size()) throw Error(ErrorKind::EmptyTrainingSet, "every interaction is held out");

  std::vector<ClassifierPair> pairs;
  for (const auto& part : build_partitions(corpus.scale())) {
    const auto t = static_cast<std::size_t>(part.threshold - 1);
    NgramCounts low = low_[t];
    NgramCounts high = high_[t];
    NgramCounts held_low(owner_->order_), held_high(owner_->order_);
    std::size_t n_low = 0, n_high = 0;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (fold_of[i] == held_out_fold) continue;
      (part.is_low(col(static_cast<Eigen::Index>(i))) ? n_low : n_high) += 1;
    }
    require_sides(name, part.threshold, n_low, n_high);
    for (auto i : held) {
      (part.is_low(col(static_cast<Eigen::Index>(i))) ? held_low : held_high).add_sequence(owner_->encoded_[i]);
    }
    low -= held_low;
    high -= held_high;
    pairs.push_back({part, NgramModel::estimate(low, owner_->vocab_), NgramModel::estimate(high, owner_->vocab_)});
  }
  EnsembleProvenance prov;
  prov.held_out_fold = held_out_fold;
  prov.held_out_couples = couples_of(corpus, held);
  return ClassifierEnsemble(name, corpus.scale(), std::move(pairs), std::move(prov));
}

}  // namespace obswin
