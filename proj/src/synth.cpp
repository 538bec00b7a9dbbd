#include "obswin/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace obswin {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorKind::SpecInvalid, why); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

void SynthSpec::validate() const {
  if (behaviors.empty()) invalid("spec has no behaviors");
  std::set<std::string> ids;
  for (const auto& b : behaviors) {
    if (b.id.empty()) invalid("behavior id is empty");
    if (!ids.insert(b.id).second) invalid("duplicate behavior id '" + b.id + "'");
    if (b.planted_span < 1) invalid("behavior '" + b.id + "': planted_span must be >= 1");
    if (!(b.expression_rate >= 0.0) || !std::isfinite(b.expression_rate)) {
      invalid("behavior '" + b.id + "': expression_rate must be >= 0");
    }
    if (b.polarity != 1 && b.polarity != -1) invalid("behavior '" + b.id + "': polarity must be 1 or -1");
  }
  if (vocab_size < 1) invalid("vocab_size must be >= 1");
  if (sessions < 1) invalid("sessions must be >= 1");
  if (words_min < 1 || words_max < words_min) invalid("words_per_session must be a positive range");
  if (couples < 1 || couples > sessions) invalid("couples must lie in [1, sessions]");
  if (k_max < 3) invalid("k_max must be >= 3");
  if (!(rating_noise >= 0.0)) invalid("rating_noise must be >= 0");
  if (levels < 2) invalid("levels must be >= 2");
  if (variants < 1) invalid("variants must be >= 1");
  if (!(charge_noise >= 0.0)) invalid("charge_noise must be >= 0");
  if (!std::isfinite(noise_growth)) invalid("noise_growth must be finite");
  if (!(zipf_exponent >= 0.0)) invalid("zipf_exponent must be >= 0");
  std::set<std::string> in_block;
  for (const auto& blk : blocks) {
    if (blk.members.empty()) invalid("empty correlation block");
    if (!(blk.within >= 0.0 && blk.within < 1.0)) invalid("block within-correlation must lie in [0, 1)");
    for (const auto& m : blk.members) {
      if (!ids.contains(m)) invalid("block member '" + m + "' is not a behavior");
      if (!in_block.insert(m).second) invalid("behavior '" + m + "' appears in two blocks");
    }
  }
  if (block_correlation.size() > 0) {
    const auto nb = static_cast<Eigen::Index>(blocks.size());
    if (block_correlation.rows() != nb || block_correlation.cols() != nb) {
      invalid("block_correlation must be square with one row per block");
    }
    if (!block_correlation.isApprox(block_correlation.transpose()) ||
        (block_correlation.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12) {
      invalid("block_correlation must be symmetric with unit diagonal");
    }
    if (block_correlation.llt().info() != Eigen::Success) invalid("block_correlation is not positive definite");
  }
}

SynthSpec synth_spec_from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    invalid("spec is not valid JSON: " + std::string(e.what()));
  }
  auto only = [](const ordered_json& obj, std::initializer_list<std::string_view> keys, const std::string& where) {
    if (!obj.is_object()) invalid(where + " must be a JSON object");
    for (const auto& [key, value] : obj.items()) {
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) invalid(where + ": unknown field '" + key + "'");
    }
  };
  only(j,
       {"behaviors", "vocab_size", "sessions", "words_per_session", "couples", "blocks", "block_correlation", "seed",
        "k_max", "rating_noise", "levels", "variants", "charge_noise", "noise_growth", "zipf_exponent"},
       "spec");
  SynthSpec s;
  try {
    for (const auto& b : j.at("behaviors")) {
      only(b, {"id", "span", "rate", "polarity"}, "behavior");
      SynthBehavior sb;
      sb.id = b.at("id").get<std::string>();
      sb.planted_span = b.value("span", sb.planted_span);
      sb.expression_rate = b.value("rate", sb.expression_rate);
      sb.polarity = b.value("polarity", sb.polarity);
      s.behaviors.push_back(std::move(sb));
    }
    s.vocab_size = j.value("vocab_size", s.vocab_size);
    s.sessions = j.value("sessions", s.sessions);
    if (j.contains("words_per_session")) {
      const auto r = j.at("words_per_session").get<std::vector<int>>();
      if (r.size() != 2) invalid("words_per_session must be [min, max]");
      s.words_min = r[0];
      s.words_max = r[1];
    }
    s.couples = j.value("couples", s.couples);
    if (j.contains("blocks")) {
      for (const auto& b : j.at("blocks")) {
        only(b, {"members", "within"}, "block");
        s.blocks.push_back({b.at("members").get<std::vector<std::string>>(), b.value("within", 0.7)});
      }
    }
    if (j.contains("block_correlation")) {
      const auto rows = j.at("block_correlation").get<std::vector<std::vector<double>>>();
      s.block_correlation.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size()) invalid("block_correlation must be square");
        for (std::size_t c = 0; c < rows.size(); ++c) {
          s.block_correlation(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
      }
    }
    s.seed = j.value("seed", s.seed);
    s.k_max = j.value("k_max", s.k_max);
    s.rating_noise = j.value("rating_noise", s.rating_noise);
    s.levels = j.value("levels", s.levels);
    s.variants = j.value("variants", s.variants);
    s.charge_noise = j.value("charge_noise", s.charge_noise);
    s.noise_growth = j.value("noise_growth", s.noise_growth);
    s.zipf_exponent = j.value("zipf_exponent", s.zipf_exponent);
  } catch (const nlohmann::json::exception& e) {
    invalid("spec: " + std::string(e.what()));
  }
  s.validate();
  return s;
}

std::string synth_spec_to_json(const SynthSpec& s) {
  ordered_json j;
  j["behaviors"] = ordered_json::array();
  for (const auto& b : s.behaviors) {
    j["behaviors"].push_back({{"id", b.id}, {"span", b.planted_span}, {"rate", b.expression_rate}, {"polarity", b.polarity}});
  }
  j["vocab_size"] = s.vocab_size;
  j["sessions"] = s.sessions;
  j["words_per_session"] = {s.words_min, s.words_max};
  j["couples"] = s.couples;
  j["blocks"] = ordered_json::array();
  for (const auto& b : s.blocks) j["blocks"].push_back({{"members", b.members}, {"within", b.within}});
  if (s.block_correlation.size() > 0) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index r = 0; r < s.block_correlation.rows(); ++r) {
      ordered_json row = ordered_json::array();
      for (Eigen::Index c = 0; c < s.block_correlation.cols(); ++c) row.push_back(s.block_correlation(r, c));
      rows.push_back(row);
    }
    j["block_correlation"] = rows;
  }
  j["seed"] = s.seed;
  j["k_max"] = s.k_max;
  j["rating_noise"] = s.rating_noise;
  j["levels"] = s.levels;
  j["variants"] = s.variants;
  j["charge_noise"] = s.charge_noise;
  j["noise_growth"] = s.noise_growth;
  j["zipf_exponent"] = s.zipf_exponent;
  return j.dump(2) + "\n";
}

SynthResult generate_corpus(const SynthSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto nb = spec.behaviors.size();
  const auto n_blocks = spec.blocks.size();
  std::vector<int> block_of(nb, -1);
  std::vector<double> within(nb, 0.0);
  for (std::size_t k = 0; k < n_blocks; ++k) {
    for (const auto& m : spec.blocks[k].members) {
      for (std::size_t b = 0; b < nb; ++b) {
        if (spec.behaviors[b].id == m) {
          block_of[b] = static_cast<int>(k);
          within[b] = spec.blocks[k].within;
        }
      }
    }
  }
  MatrixXd factor_chol = MatrixXd::Identity(static_cast<Eigen::Index>(n_blocks), static_cast<Eigen::Index>(n_blocks));
  if (spec.block_correlation.size() > 0) factor_chol = spec.block_correlation.llt().matrixL();

  std::vector<double> zipf(static_cast<std::size_t>(spec.vocab_size));
  for (int r = 0; r < spec.vocab_size; ++r) {
    zipf[static_cast<std::size_t>(r)] = 1.0 / std::pow(static_cast<double>(r + 1), spec.zipf_exponent);
  }
  std::discrete_distribution<int> background(zipf.begin(), zipf.end());
  std::uniform_int_distribution<int> length_dist(spec.words_min, spec.words_max);
  std::uniform_int_distribution<int> variant_dist(0, spec.variants - 1);

  std::vector<std::string> ids;
  for (const auto& b : spec.behaviors) ids.push_back(b.id);
  std::vector<std::string> prefixes;
  for (const auto& b : spec.behaviors) prefixes.push_back(lower(b.id));

  PlantedTruth truth;
  truth.behaviors = ids;
  for (const auto& b : spec.behaviors) truth.planted_span.push_back(b.expression_rate > 0.0 ? b.planted_span : 0);
  truth.latent.resize(spec.sessions, static_cast<Eigen::Index>(nb));

  std::vector<Interaction> interactions;
  interactions.reserve(static_cast<std::size_t>(spec.sessions));
  std::vector<int> sessions_seen(static_cast<std::size_t>(spec.couples), 0);
  const double k_span = spec.k_max - 1.0;

  for (int s = 0; s < spec.sessions; ++s) {
    VectorXd raw(static_cast<Eigen::Index>(n_blocks));
    for (Eigen::Index k = 0; k < raw.size(); ++k) raw(k) = gauss(rng);
    const VectorXd factors = factor_chol * raw;

    Interaction it;
    const int couple = s % spec.couples;
    const int nth = sessions_seen[static_cast<std::size_t>(couple)]++;
    it.couple_id = "c" + std::to_string(couple);
    it.speaker = nth % 2 == 0 ? Speaker::A : Speaker::B;
    it.id = it.couple_id + "_s" + std::to_string(nth) + (it.speaker == Speaker::A ? "_a" : "_b");

    std::vector<double> z(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const double own = gauss(rng);
      double x = own;
      if (block_of[b] >= 0) {
        x = std::sqrt(within[b]) * factors(block_of[b]) + std::sqrt(1.0 - within[b]) * own;
      }
      z[b] = normal_cdf(x);
      truth.latent(s, static_cast<Eigen::Index>(b)) = z[b];
      const double rating = 1.0 + k_span * z[b] + spec.rating_noise * gauss(rng);
      it.ratings[ids[b]] = std::clamp(rating, 1.0, static_cast<double>(spec.k_max));
    }

    const int words = length_dist(rng);

    // Episodes are laid end to end in random order and never overlap; the
    // remaining words are background scattered into the gaps between them.
    std::vector<std::size_t> episodes;
    for (std::size_t b = 0; b < nb; ++b) {
      const double expected = spec.behaviors[b].expression_rate * words / 100.0;
      auto count = static_cast<int>(std::floor(expected));
      if (unit(rng) < expected - count) ++count;
      episodes.insert(episodes.end(), static_cast<std::size_t>(count), b);
    }
    std::shuffle(episodes.begin(), episodes.end(), rng);
    int budget = words;
    std::vector<std::size_t> kept;
    for (auto b : episodes) {
      const int seg = 3 * spec.behaviors[b].planted_span;
      if (seg <= budget) {
        kept.push_back(b);
        budget -= seg;
      }
    }
    std::vector<int> gaps(kept.size() + 1, 0);
    std::uniform_int_distribution<std::size_t> gap_dist(0, kept.size());
    for (int w = 0; w < budget; ++w) ++gaps[gap_dist(rng)];

    it.tokens.reserve(static_cast<std::size_t>(words));
    auto emit_token = [&](std::size_t b, double charge) {
      if (spec.behaviors[b].polarity < 0) charge = 1.0 - charge;
      const int level = static_cast<int>(std::lround(charge * (spec.levels - 1)));
      it.tokens.push_back(prefixes[b] + "_" + std::to_string(level) + "_" + std::to_string(variant_dist(rng)));
    };
    auto emit_background = [&](int n) {
      for (int w = 0; w < n; ++w) it.tokens.push_back("w" + std::to_string(background(rng)));
    };
    emit_background(gaps[0]);
    for (std::size_t e = 0; e < kept.size(); ++e) {
      const auto b = kept[e];
      const int span = spec.behaviors[b].planted_span;
      const double tau = spec.charge_noise * std::pow(span / 3.0, spec.noise_growth);
      for (int p = 0; p < 3 * span; ++p) {
        const bool peak = p >= span && p < 2 * span;
        emit_token(b, peak ? std::clamp(z[b] + tau * gauss(rng), 0.0, 1.0) : unit(rng));
      }
      emit_background(gaps[e + 1]);
    }
    interactions.push_back(std::move(it));
  }
  return {Corpus(RatingScale{spec.k_max}, ids, std::move(interactions)), std::move(truth)};
}

std::string truth_to_json(const PlantedTruth& truth, const Corpus& corpus) {
  ordered_json j;
  j["behaviors"] = ordered_json::array();
  for (std::size_t b = 0; b < truth.behaviors.size(); ++b) {
    ordered_json latent = ordered_json::object();
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      latent[corpus.interactions()[i].id] = truth.latent(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
    }
    j["behaviors"].push_back({{"id", truth.behaviors[b]},
                              {"planted_span", truth.planted_span[b] > 0 ? ordered_json(truth.planted_span[b]) : ordered_json(nullptr)},
                              {"latent", latent}});
  }
  return j.dump(2) + "\n";
}

}  // namespace obswin
