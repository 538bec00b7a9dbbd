#pragma once

#include "obswin/corpus.hpp"
#include "obswin/grouping.hpp"
#include "obswin/metrics.hpp"
#include "obswin/stats.hpp"
#include "obswin/windows.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace obswin {

struct PipelineConfig {
  WindowGrid grid;
  double y1 = 0.59;
  double y2 = 0.95;
  double alpha = 0.05;
  FoldScheme folds = FoldScheme::leave_one_couple_out();
  int order = 3;
  bool grouping = true;
  int n_max = 0;  // 0: default_n_max
  int d_inits = 50;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
  double level() const { return 1.0 - alpha; }
};

// Parses a JSON object; absent fields keep their defaults, unknown fields are rejected.
PipelineConfig config_from_json(std::string_view text, PipelineConfig base = {});
std::string config_to_json(const PipelineConfig& config);

enum class Stage { Reference, BcsPeak, BrcThreshold, BrcPeak, Undetermined };
std::string_view to_string(Stage stage);

struct BcsPeakEvidence {
  int length_max = 0;
  int length_min = 0;
  double bcs_max = 0.0;
  double bcs_min = 0.0;
  double r_y = 0.0;
  long n = 0;
  std::optional<SignificanceDecision> decision;
};

struct BrcPeakEvidence {
  std::string reference;  // dominant weighted-BRC component
  int length_max = 0;
  int length_min = 0;
  double brc_max = 0.0;
  double brc_min = 0.0;
  double q_prime_max = 0.0;
  double q_prime_min = 0.0;
  long n_max = 0;
  long n_min = 0;
  std::optional<SignificanceDecision> decision;
};

struct WindowLengthVerdict {
  std::string behavior;
  Stage stage = Stage::Undetermined;
  std::optional<int> chosen_length;
  FunctionalKind functional = FunctionalKind::Median;
  std::vector<double> bcs;           // per grid length, selected functional
  std::vector<double> weighted_brc;  // per grid length; empty without references
  std::optional<BcsPeakEvidence> bcs_peak;
  std::optional<BrcPeakEvidence> brc_peak;
  std::string reason;
};

struct BrcRecord {
  std::string target;
  std::string reference;
  int length = 0;
  BrcCell cell;
};

struct AnalysisResult {
  std::vector<int> lengths;
  std::vector<WindowLengthVerdict> verdicts;
  BcsTable bcs;
  std::vector<BrcRecord> brc;
  std::vector<std::string> references;
  std::optional<CorrelationMatrix> correlations;
  std::optional<GroupingResult> grouping;
  long windows_scored = 0;
  long clamped_windows = 0;
  // Some behavior needed the BRC stages but no reference behavior exists.
  bool brc_stages_skipped = false;
};

struct ScoringSummary {
  long windows = 0;
  long clamped_windows = 0;
};

using ProgressFn = std::function<void(const std::string& behavior, int fold, int fold_count)>;

// Trains one ensemble per (behavior, fold) and scores the fold's held-out
// interactions at every grid length. Folds run on up to `workers` threads;
// every result lands in its own slot, so output does not depend on scheduling.
ScoreStore score_corpus(const Corpus& corpus, const FoldPlan& folds, const WindowGrid& grid, int order,
                        int workers = 1, ScoringSummary* summary = nullptr, const ProgressFn& progress = {});

// Every (behavior, length, functional) cell; degenerate cells hold NaN.
BcsTable compute_bcs_table(const Corpus& corpus, const ScoreStore& store);

// Functional with the highest mean BCS over the grid; ties resolve to Median.
FunctionalKind select_best_functional(const BcsTable& bcs, std::string_view behavior,
                                      const std::vector<int>& lengths);

// Staged decision over precomputed scores.
AnalysisResult decide(const Corpus& corpus, const ScoreStore& store, const PipelineConfig& config);

// Fills correlations and grouping when config.grouping is set and the corpus
// supports it (at least three non-constant behaviors).
void attach_grouping(AnalysisResult& result, const Corpus& corpus, const PipelineConfig& config);

AnalysisResult run_analysis(const Corpus& corpus, const PipelineConfig& config,
                            const ProgressFn& progress = {});

}  // namespace obswin
