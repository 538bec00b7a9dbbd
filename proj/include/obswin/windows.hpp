#pragma once

#include "obswin/scorer.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace obswin {

struct WindowGrid {
  std::vector<int> lengths{3, 10, 30, 50, 100};

  // Throws InvalidLength unless strictly increasing and all >= 1.
  void validate() const;
  int shortest() const { return lengths.front(); }
  int longest() const { return lengths.back(); }
};

struct Window {
  std::span<const std::string> tokens;
  std::size_t offset = 0;
  bool is_first = false;
  bool is_last = false;
};

struct WindowBounds {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// max(1, O - L + 1) stride-1 windows; a single window of every token when O <= L.
std::vector<WindowBounds> window_bounds(std::size_t token_count, int length);
std::vector<Window> decompose(std::span<const std::string> tokens, int length);

struct ScoreTrajectory {
  std::string behavior;
  int length = 0;
  VectorXd scores;
  int clamped_windows = 0;  // windows whose pmf needed clamping
};

enum class FunctionalKind { Median, Minimum, Maximum };

inline constexpr FunctionalKind kFunctionals[] = {FunctionalKind::Median, FunctionalKind::Minimum,
                                                  FunctionalKind::Maximum};

std::string_view to_string(FunctionalKind kind);
FunctionalKind functional_from_string(std::string_view name);

template <typename Derived>
double aggregate(const Eigen::DenseBase<Derived>& scores, FunctionalKind kind) {
  const Eigen::Index n = scores.size();
  if (n == 0) throw Error(ErrorKind::EmptyTrajectory, "cannot aggregate an empty trajectory");
  switch (kind) {
    case FunctionalKind::Minimum: return scores.minCoeff();
    case FunctionalKind::Maximum: return scores.maxCoeff();
    case FunctionalKind::Median: break;
  }
  std::vector<double> v(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = scores(i);
  const auto mid = v.begin() + n / 2;
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

double aggregate(const ScoreTrajectory& trajectory, FunctionalKind kind);

// Window-by-window scoring through score_window.
ScoreTrajectory score_trajectory(const ClassifierEnsemble& ensemble, const Interaction& interaction,
                                 int length);

// Scores one interaction at several lengths at once. Each model's per-token
// log-probabilities are computed once; window sums come from prefix sums plus
// the truncated-history terms at each window start.
class TrajectoryScorer {
 public:
  TrajectoryScorer(const ClassifierEnsemble& ensemble, std::span<const WordId> tokens);
  TrajectoryScorer(const ClassifierEnsemble& ensemble, std::span<const std::string> tokens);

  ScoreTrajectory score(int length) const;
  std::size_t token_count() const { return tokens_.size(); }

 private:
  struct ModelTerms {
    std::vector<std::vector<double>> truncated;  // [t][j]: history of t window tokens
    std::vector<double> padded;                  // j < n-1: history starts with <s> markers
    std::vector<double> prefix;                  // prefix sums of full-history terms
  };

  void precompute();
  double window_log_prob(const NgramModel& lm, const ModelTerms& terms, std::size_t begin,
                         std::size_t end) const;

  const ClassifierEnsemble* ensemble_;
  std::vector<WordId> tokens_;
  std::vector<ModelTerms> low_;
  std::vector<ModelTerms> high_;
};

}  // namespace obswin
