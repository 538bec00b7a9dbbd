#include "obswin/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace obswin {

double pearson(const VectorXd& x, const VectorXd& y) {
  if (x.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "pearson inputs differ in length");
  const VectorXd dx = x.array() - x.mean();
  const VectorXd dy = y.array() - y.mean();
  const double sxx = dx.squaredNorm();
  const double syy = dy.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::DegenerateInput, "constant sequence has no correlation");
  return std::clamp(dx.dot(dy) / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  const Eigen::Map<const VectorXd> mx(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const VectorXd> my(y.data(), static_cast<Eigen::Index>(y.size()));
  return spearman(mx, my);
}

double spearman_p(double rho, long n) {
  if (n < 4) throw Error(ErrorKind::TooFewSamples, "spearman_p needs n >= 4");
  if (!std::isfinite(rho)) return std::numeric_limits<double>::quiet_NaN();
  const double r2 = rho * rho;
  if (r2 >= 1.0) return std::numeric_limits<double>::min();
  const double df = static_cast<double>(n - 2);
  const double t = std::abs(rho) * std::sqrt(df / (1.0 - r2));
  const boost::math::students_t dist(df);
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
  return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

ScoreStore::ScoreStore(std::vector<std::string> behaviors, std::vector<int> lengths, std::size_t interactions)
    : behaviors_(std::move(behaviors)), lengths_(std::move(lengths)), interactions_(interactions),
      scores_(behaviors_.size() * lengths_.size() * interactions) {}

std::size_t ScoreStore::behavior_index(std::string_view behavior) const {
  auto it = std::find(behaviors_.begin(), behaviors_.end(), behavior);
  if (it == behaviors_.end()) throw Error(ErrorKind::InvalidArgument, "unknown behavior '" + std::string(behavior) + "'");
  return static_cast<std::size_t>(it - behaviors_.begin());
}

std::size_t ScoreStore::length_index(int length) const {
  auto it = std::find(lengths_.begin(), lengths_.end(), length);
  if (it == lengths_.end()) throw Error(ErrorKind::InvalidLength, "length " + std::to_string(length) + " not scored");
  return static_cast<std::size_t>(it - lengths_.begin());
}

void ScoreStore::set(std::size_t behavior, std::size_t length, std::size_t interaction, VectorXd scores) {
  if (behavior >= behaviors_.size() || length >= lengths_.size() || interaction >= interactions_) {
    throw Error(ErrorKind::InvalidArgument, "score store index out of range");
  }
  scores_[slot(behavior, length, interaction)] = std::move(scores);
}

const VectorXd& ScoreStore::get(std::size_t behavior, std::size_t length, std::size_t interaction) const {
  return scores_.at(slot(behavior, length, interaction));
}

bool ScoreStore::complete() const {
  return std::all_of(scores_.begin(), scores_.end(), [](const VectorXd& v) { return v.size() > 0; });
}

VectorXd ScoreStore::aggregates(std::size_t behavior, std::size_t length, FunctionalKind f) const {
  VectorXd out(static_cast<Eigen::Index>(interactions_));
  for (std::size_t i = 0; i < interactions_; ++i) {
    out(static_cast<Eigen::Index>(i)) = aggregate(get(behavior, length, i), f);
  }
  return out;
}

VectorXd ScoreStore::pooled(std::size_t behavior, std::size_t length) const {
  Eigen::Index total = 0;
  for (std::size_t i = 0; i < interactions_; ++i) total += get(behavior, length, i).size();
  VectorXd out(total);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < interactions_; ++i) {
    const auto& s = get(behavior, length, i);
    out.segment(at, s.size()) = s;
    at += s.size();
  }
  return out;
}

BcsEntry compute_bcs(const Corpus& corpus, const ScoreStore& store, std::string_view behavior, int length,
                     FunctionalKind f) {
  if (store.interactions() != corpus.size()) {
    throw Error(ErrorKind::LengthMismatch, "score store does not cover the corpus");
  }
  const VectorXd g = store.aggregates(store.behavior_index(behavior), store.length_index(length), f);
  const VectorXd h = corpus.ratings(behavior);
  BcsEntry e;
  e.rho = spearman(g, h);
  e.n = static_cast<long>(g.size());
  e.p = e.n >= 4 ? spearman_p(e.rho, e.n) : 1.0;
  return e;
}

double brc_from_correlations(double q_star, double q_prime) {
  return 1.0 - std::abs(q_star - q_prime) / 2.0;
}

BrcCell compute_brc_pair(const Corpus& corpus, const ScoreStore& store, std::string_view behavior_i,
                         std::string_view behavior_j, int length) {
  const auto li = store.length_index(length);
  const VectorXd ci = store.pooled(store.behavior_index(behavior_i), li);
  const VectorXd cj = store.pooled(store.behavior_index(behavior_j), li);
  BrcCell cell;
  cell.q_star = spearman(corpus.ratings(behavior_i), corpus.ratings(behavior_j));
  cell.q_prime = spearman(ci, cj);
  cell.brc = brc_from_correlations(cell.q_star, cell.q_prime);
  cell.n_windows = static_cast<long>(ci.size());
  return cell;
}

VectorXd reference_weights(std::span<const double> reference_bcs) {
  if (reference_bcs.empty()) throw Error(ErrorKind::NonPositiveWeightMass, "no reference behaviors");
  const Eigen::Map<const VectorXd> bcs(reference_bcs.data(), static_cast<Eigen::Index>(reference_bcs.size()));
  const double mass = bcs.sum();
  if (!(mass > 0.0)) throw Error(ErrorKind::NonPositiveWeightMass, "reference BCS values sum to a non-positive mass");
  return bcs / mass;
}

double compute_weighted_brc(std::span<const double> reference_bcs, std::span<const double> pairwise_brc) {
  if (reference_bcs.size() != pairwise_brc.size()) {
    throw Error(ErrorKind::LengthMismatch, "one pairwise BRC per reference is required");
  }
  const VectorXd alpha = reference_weights(reference_bcs);
  const Eigen::Map<const VectorXd> brc(pairwise_brc.data(), static_cast<Eigen::Index>(pairwise_brc.size()));
  return alpha.dot(brc);
}

}  // namespace obswin
