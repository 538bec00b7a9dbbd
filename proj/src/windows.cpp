#include "obswin/windows.hpp"

#include <algorithm>

namespace obswin {

void WindowGrid::validate() const {
  if (lengths.empty()) throw Error(ErrorKind::InvalidLength, "window grid is empty");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] < 1) throw Error(ErrorKind::InvalidLength, "window lengths must be >= 1");
    if (i > 0 && lengths[i] <= lengths[i - 1]) {
      throw Error(ErrorKind::InvalidLength, "window lengths must be strictly increasing");
    }
  }
}

std::vector<WindowBounds> window_bounds(std::size_t token_count, int length) {
  if (length < 1) throw Error(ErrorKind::InvalidLength, "window length must be >= 1, got " + std::to_string(length));
  if (token_count == 0) throw Error(ErrorKind::InvalidLength, "cannot window an empty token sequence");
  const auto l = static_cast<std::size_t>(length);
  if (token_count <= l) return {{0, token_count}};
  std::vector<WindowBounds> out;
  out.reserve(token_count - l + 1);
  for (std::size_t b = 0; b + l <= token_count; ++b) out.push_back({b, b + l});
  return out;
}

std::vector<Window> decompose(std::span<const std::string> tokens, int length) {
  const auto bounds = window_bounds(tokens.size(), length);
  std::vector<Window> out;
  out.reserve(bounds.size());
  for (std::size_t i = 0; i < bounds.size(); ++i) {
    out.push_back({tokens.subspan(bounds[i].begin, bounds[i].end - bounds[i].begin), bounds[i].begin,
                   i == 0, i + 1 == bounds.size()});
  }
  return out;
}

std::string_view to_string(FunctionalKind kind) {
  switch (kind) {
    case FunctionalKind::Median: return "median";
    case FunctionalKind::Minimum: return "min";
    case FunctionalKind::Maximum: return "max";
  }
  return "median";
}

FunctionalKind functional_from_string(std::string_view name) {
  if (name == "median") return FunctionalKind::Median;
  if (name == "min" || name == "minimum") return FunctionalKind::Minimum;
  if (name == "max" || name == "maximum") return FunctionalKind::Maximum;
  throw Error(ErrorKind::InvalidArgument, "unknown functional '" + std::string(name) + "'");
}

double aggregate(const ScoreTrajectory& trajectory, FunctionalKind kind) {
  return aggregate(trajectory.scores, kind);
}

ScoreTrajectory score_trajectory(const ClassifierEnsemble& ensemble, const Interaction& interaction,
                                 int length) {
  if (!ensemble.trained()) throw Error(ErrorKind::EnsembleUntrained, "ensemble has no classifier pairs");
  const auto ids = ensemble.vocabulary().encode(interaction.tokens);
  const auto bounds = window_bounds(ids.size(), length);
  ScoreTrajectory out{ensemble.behavior(), length, VectorXd(static_cast<Eigen::Index>(bounds.size())), 0};
  for (std::size_t w = 0; w < bounds.size(); ++w) {
    const std::span<const WordId> window(ids.data() + bounds[w].begin, bounds[w].end - bounds[w].begin);
    const auto s = score_window(ensemble, window, w == 0, w + 1 == bounds.size());
    out.scores(static_cast<Eigen::Index>(w)) = s.value;
    if (s.pmf.clamped > 0) ++out.clamped_windows;
  }
  return out;
}

TrajectoryScorer::TrajectoryScorer(const ClassifierEnsemble& ensemble, std::span<const WordId> tokens)
    : ensemble_(&ensemble), tokens_(tokens.begin(), tokens.end()) {
  precompute();
}

TrajectoryScorer::TrajectoryScorer(const ClassifierEnsemble& ensemble, std::span<const std::string> tokens)
    : ensemble_(&ensemble) {
  if (!ensemble.trained()) throw Error(ErrorKind::EnsembleUntrained, "ensemble has no classifier pairs");
  tokens_ = ensemble.vocabulary().encode(tokens);
  precompute();
}

void TrajectoryScorer::precompute() {
  if (!ensemble_->trained()) throw Error(ErrorKind::EnsembleUntrained, "ensemble has no classifier pairs");
  if (tokens_.empty()) throw Error(ErrorKind::InvalidLength, "cannot score an empty interaction");
  const std::size_t o = tokens_.size();
  auto terms_for = [&](const NgramModel& lm) {
    const auto h = static_cast<std::size_t>(lm.order() - 1);
    ModelTerms terms;
    terms.truncated.assign(h, std::vector<double>(o, 0.0));
    for (std::size_t t = 0; t < h; ++t) {
      for (std::size_t j = t; j < o; ++j) {
        terms.truncated[t][j] = lm.log_prob(tokens_[j], std::span<const WordId>(tokens_.data() + j - t, t));
      }
    }
    std::vector<WordId> history(h, Vocabulary::kBos);
    for (std::size_t j = 0; j < std::min(h, o); ++j) {
      terms.padded.push_back(lm.log_prob(tokens_[j], history));
      history.erase(history.begin());
      history.push_back(tokens_[j]);
    }
    terms.prefix.assign(o + 1, 0.0);
    for (std::size_t j = 0; j < o; ++j) {
      double full = 0.0;
      if (j >= h) full = lm.log_prob(tokens_[j], std::span<const WordId>(tokens_.data() + j - h, h));
      terms.prefix[j + 1] = terms.prefix[j] + full;
    }
    return terms;
  };
  for (const auto& pair : ensemble_->pairs()) {
    low_.push_back(terms_for(pair.lm_low));
    high_.push_back(terms_for(pair.lm_high));
  }
}

double TrajectoryScorer::window_log_prob(const NgramModel& lm, const ModelTerms& terms,
                                         std::size_t begin, std::size_t end) const {
  const auto h = static_cast<std::size_t>(lm.order() - 1);
  const bool first = begin == 0;
  const bool last = end == tokens_.size();
  double total = 0.0;
  const std::size_t head_end = std::min(end, begin + h);
  for (std::size_t j = begin; j < head_end; ++j) {
    total += first ? terms.padded[j] : terms.truncated[j - begin][j];
  }
  if (end > begin + h) total += terms.prefix[end] - terms.prefix[begin + h];
  if (last) {
    std::vector<WordId> history;
    if (first) history.assign(h, Vocabulary::kBos);
    const std::size_t from = std::max(begin, end >= h ? end - h : 0);
    history.insert(history.end(), tokens_.begin() + static_cast<std::ptrdiff_t>(from),
                   tokens_.begin() + static_cast<std::ptrdiff_t>(end));
    total += lm.log_prob(Vocabulary::kEos, history);
  }
  return total;
}

ScoreTrajectory TrajectoryScorer::score(int length) const {
  const auto bounds = window_bounds(tokens_.size(), length);
  const auto& pairs = ensemble_->pairs();
  ScoreTrajectory out{ensemble_->behavior(), length, VectorXd(static_cast<Eigen::Index>(bounds.size())), 0};
  std::vector<double> ratios(pairs.size());
  for (std::size_t w = 0; w < bounds.size(); ++w) {
    const auto [b, e] = bounds[w];
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      ratios[p] = window_log_prob(pairs[p].lm_low, low_[p], b, e) -
                  window_log_prob(pairs[p].lm_high, high_[p], b, e);
    }
    const auto s = score_from_log_ratios(ratios, ensemble_->scale());
    out.scores(static_cast<Eigen::Index>(w)) = s.value;
    if (s.pmf.clamped > 0) ++out.clamped_windows;
  }
  return out;
}

}  // namespace obswin
