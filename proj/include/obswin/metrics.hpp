#pragma once

#include "obswin/corpus.hpp"
#include "obswin/windows.hpp"

#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace obswin {

// Fractional ranks (1-based, ties share the mean of their positions).
template <typename Derived>
VectorXd average_ranks(const Eigen::DenseBase<Derived>& x) {
  const Eigen::Index n = x.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x(a) < x(b); });
  VectorXd ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i + 1;
    while (j < n && x(order[static_cast<std::size_t>(j)]) == x(order[static_cast<std::size_t>(i)])) ++j;
    const double r = 0.5 * static_cast<double>(i + j + 1);
    for (Eigen::Index k = i; k < j; ++k) ranks(order[static_cast<std::size_t>(k)]) = r;
    i = j;
  }
  return ranks;
}

// Pearson correlation; DegenerateInput when either side has zero variance.
double pearson(const VectorXd& x, const VectorXd& y);

template <typename DerivedX, typename DerivedY>
double spearman(const Eigen::DenseBase<DerivedX>& x, const Eigen::DenseBase<DerivedY>& y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::LengthMismatch, "spearman inputs differ in length (" + std::to_string(x.size()) +
                                               " vs " + std::to_string(y.size()) + ")");
  }
  if (x.size() < 3) throw Error(ErrorKind::TooFewSamples, "spearman needs at least 3 pairs");
  return pearson(average_ranks(x), average_ranks(y));
}

double spearman(std::span<const double> x, std::span<const double> y);

// Two-sided p-value from the Student-t approximation with n-2 degrees of freedom.
double spearman_p(double rho, long n);

// Trajectories for every (behavior, grid length, interaction). Each trajectory
// must come from an ensemble that never saw the interaction's couple.
class ScoreStore {
 public:
  ScoreStore(std::vector<std::string> behaviors, std::vector<int> lengths, std::size_t interactions);

  const std::vector<std::string>& behaviors() const { return behaviors_; }
  const std::vector<int>& lengths() const { return lengths_; }
  std::size_t interactions() const { return interactions_; }
  std::size_t behavior_index(std::string_view behavior) const;
  std::size_t length_index(int length) const;

  void set(std::size_t behavior, std::size_t length, std::size_t interaction, VectorXd scores);
  const VectorXd& get(std::size_t behavior, std::size_t length, std::size_t interaction) const;
  bool complete() const;

  // One aggregate per interaction.
  VectorXd aggregates(std::size_t behavior, std::size_t length, FunctionalKind f) const;
  // Every window score, concatenated in interaction order.
  VectorXd pooled(std::size_t behavior, std::size_t length) const;

 private:
  std::size_t slot(std::size_t b, std::size_t l, std::size_t i) const {
    return (b * lengths_.size() + l) * interactions_ + i;
  }

  std::vector<std::string> behaviors_;
  std::vector<int> lengths_;
  std::size_t interactions_;
  std::vector<VectorXd> scores_;
};

struct BcsEntry {
  double rho = 0.0;
  long n = 0;
  double p = 1.0;
};

struct BcsKey {
  std::string behavior;
  int length = 0;
  FunctionalKind functional = FunctionalKind::Median;

  friend auto operator<=>(const BcsKey&, const BcsKey&) = default;
};

using BcsTable = std::map<BcsKey, BcsEntry>;

// Spearman between the f-aggregated trajectories and the behavior's ratings.
BcsEntry compute_bcs(const Corpus& corpus, const ScoreStore& store, std::string_view behavior,
                     int length, FunctionalKind f);

struct BrcCell {
  double q_star = 0.0;
  double q_prime = 0.0;
  double brc = 0.0;
  long n_windows = 0;
};

double brc_from_correlations(double q_star, double q_prime);

// Ratings correlation of (i, j) against the correlation of their pooled window scores.
BrcCell compute_brc_pair(const Corpus& corpus, const ScoreStore& store, std::string_view behavior_i,
                         std::string_view behavior_j, int length);

// alpha_l = bcs_l / sum(bcs); NonPositiveWeightMass when the sum is not positive.
VectorXd reference_weights(std::span<const double> reference_bcs);
double compute_weighted_brc(std::span<const double> reference_bcs, std::span<const double> pairwise_brc);

}  // namespace obswin
