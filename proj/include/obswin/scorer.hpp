#pragma once

#include "obswin/corpus.hpp"
#include "obswin/ngram.hpp"

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace obswin {

// Threshold i splits the scale into [1, i+1] (low) and (i+1, K] (high).
struct Partition {
  int threshold = 1;

  double boundary() const { return threshold + 1.0; }
  bool is_low(double rating) const { return rating <= boundary(); }
  friend bool operator==(const Partition&, const Partition&) = default;
};

// K-2 integer-thresholded partitions, ordered by threshold.
std::vector<Partition> build_partitions(RatingScale scale);

struct ClassifierPair {
  Partition partition;
  NgramModel lm_low;   // trained on ratings in [1, i+1]
  NgramModel lm_high;  // trained on ratings in (i+1, K]
};

struct EnsembleProvenance {
  int held_out_fold = -1;
  std::vector<std::string> held_out_couples;
};

class ClassifierEnsemble {
 public:
  ClassifierEnsemble() = default;
  ClassifierEnsemble(std::string behavior, RatingScale scale, std::vector<ClassifierPair> pairs,
                     EnsembleProvenance provenance = {});

  bool trained() const { return !pairs_.empty(); }
  const std::string& behavior() const { return behavior_; }
  const RatingScale& scale() const { return scale_; }
  const std::vector<ClassifierPair>& pairs() const { return pairs_; }
  const EnsembleProvenance& provenance() const { return provenance_; }
  int order() const { return pairs_.empty() ? 0 : pairs_.front().lm_low.order(); }
  const Vocabulary& vocabulary() const;

  // Directory layout: manifest.json plus pair_<i>_low.arpa / pair_<i>_high.arpa.
  void save(const std::filesystem::path& dir) const;
  static ClassifierEnsemble load(const std::filesystem::path& dir);

 private:
  std::string behavior_;
  RatingScale scale_;
  std::vector<ClassifierPair> pairs_;
  EnsembleProvenance provenance_;
};

// Probability mass on each interval (i, i+1], i = 1..K-1.
struct ScorePmf {
  VectorXd masses;
  int clamped = 0;  // negative differences zeroed before renormalizing
};

struct WindowScore {
  double value = 0.0;
  ScorePmf pmf;
};

// Cumulative posteriors P(x <= i+1 | W) from per-pair log-likelihood ratios
// ln P_low(W) - ln P_high(W), under a Uniform(1, K) prior.
VectorXd cumulative_posteriors(std::span<const double> log_likelihood_ratios, RatingScale scale);

// Interval masses by differencing cumulative posteriors (with P(x<=1) = 0 and
// P(x<=K) = 1), negatives clamped to zero, renormalized.
ScorePmf interval_pmf(const VectorXd& cumulative, RatingScale scale);

// Sum of interval midpoints (i + 1/2) weighted by their masses.
double expected_score(const ScorePmf& pmf);

WindowScore score_from_log_ratios(std::span<const double> log_likelihood_ratios, RatingScale scale);

WindowScore score_window(const ClassifierEnsemble& ensemble, std::span<const std::string> window,
                         bool pad_start, bool pad_end);
WindowScore score_window(const ClassifierEnsemble& ensemble, std::span<const WordId> window,
                         bool pad_start, bool pad_end);

// Trains the K-2 pairs on every interaction outside the held-out fold.
ClassifierEnsemble train_ensemble(const Corpus& corpus, std::string_view behavior,
                                  const FoldPlan& fold_plan, int held_out_fold, int order = 3);

// Fold-by-fold training that reuses corpus-wide counts: the side totals for a
// behavior are accumulated once and each fold subtracts its own interactions.
// Produces the same models as train_ensemble, sharing one vocabulary.
class EnsembleTrainer {
 public:
  EnsembleTrainer(const Corpus& corpus, const FoldPlan& fold_plan, int order = 3);

  const Corpus& corpus() const { return *corpus_; }
  const FoldPlan& fold_plan() const { return *folds_; }
  std::shared_ptr<const Vocabulary> vocabulary() const { return vocab_; }
  // Token ids of every interaction in the shared vocabulary.
  const std::vector<std::vector<WordId>>& encoded() const { return encoded_; }

  class BehaviorTotals {
   public:
    // Safe to call concurrently for different folds.
    ClassifierEnsemble train(int held_out_fold) const;

   private:
    friend class EnsembleTrainer;
    BehaviorTotals(const EnsembleTrainer& owner, std::size_t behavior);

    const EnsembleTrainer* owner_;
    std::size_t behavior_;
    std::vector<NgramCounts> low_;   // per threshold, all interactions
    std::vector<NgramCounts> high_;
  };

  BehaviorTotals for_behavior(std::size_t behavior) const { return BehaviorTotals(*this, behavior); }

 private:
  const Corpus* corpus_;
  const FoldPlan* folds_;
  int order_;
  std::shared_ptr<Vocabulary> vocab_;
  std::vector<std::vector<WordId>> encoded_;
};

}  // namespace obswin
