#include "obswin/pipeline.hpp"

#include "obswin/scorer.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

namespace obswin {

namespace {

using ordered_json = nlohmann::ordered_json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// First index of the largest (or smallest) finite value; -1 when none.
int arg_extreme(const std::vector<double>& v, bool largest) {
  int best = -1;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) continue;
    if (best < 0 || (largest ? v[i] > v[static_cast<std::size_t>(best)] : v[i] < v[static_cast<std::size_t>(best)])) {
      best = static_cast<int>(i);
    }
  }
  return best;
}

double safe_pearson(const VectorXd& a, const VectorXd& b) {
  try {
    return pearson(a, b);
  } catch (const Error&) {
    return kNaN;
  }
}

}  // namespace

void PipelineConfig::validate() const {
  grid.validate();
  auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, "config: " + what); };
  if (!(y1 > 0.0 && y1 < 1.0)) bad("y1 must lie in (0, 1)");
  if (!(y2 > 0.0 && y2 <= 1.0)) bad("y2 must lie in (0, 1]");
  if (!(alpha > 0.0 && alpha < 1.0)) bad("alpha must lie in (0, 1)");
  if (order < 1 || order > kMaxNgramOrder) bad("order must lie in [1, 6]");
  if (d_inits < 1) bad("d_inits must be >= 1");
  if (n_max < 0) bad("n_max must be >= 0");
  if (workers < 1) bad("workers must be >= 1");
  if (folds.kind == FoldScheme::Kind::KFold && folds.k < 2) bad("kfold needs k >= 2");
}

PipelineConfig config_from_json(std::string_view text, PipelineConfig base) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, "config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, "config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "grid") {
        base.grid.lengths = value.get<std::vector<int>>();
      } else if (key == "y1") {
        base.y1 = value.get<double>();
      } else if (key == "y2") {
        base.y2 = value.get<double>();
      } else if (key == "alpha") {
        base.alpha = value.get<double>();
      } else if (key == "fold_scheme") {
        const auto s = value.get<std::string>();
        if (s == "loco") {
          base.folds = FoldScheme::leave_one_couple_out();
        } else if (s == "kfold") {
          base.folds.kind = FoldScheme::Kind::KFold;
        } else {
          throw Error(ErrorKind::InvalidArgument, "config: fold_scheme must be 'loco' or 'kfold'");
        }
      } else if (key == "k") {
        base.folds.k = value.get<int>();
      } else if (key == "order") {
        base.order = value.get<int>();
      } else if (key == "grouping") {
        base.grouping = value.get<bool>();
      } else if (key == "n_max") {
        base.n_max = value.get<int>();
      } else if (key == "d_inits") {
        base.d_inits = value.get<int>();
      } else if (key == "seed") {
        base.seed = value.get<std::uint64_t>();
      } else if (key == "workers") {
        base.workers = value.get<int>();
      } else {
        throw Error(ErrorKind::InvalidArgument, "config: unknown field '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, "config: " + std::string(e.what()));
  }
  base.validate();
  return base;
}

std::string config_to_json(const PipelineConfig& c) {
  ordered_json j;
  j["grid"] = c.grid.lengths;
  j["y1"] = c.y1;
  j["y2"] = c.y2;
  j["alpha"] = c.alpha;
  j["fold_scheme"] = c.folds.kind == FoldScheme::Kind::KFold ? "kfold" : "loco";
  j["k"] = c.folds.k;
  j["order"] = c.order;
  j["grouping"] = c.grouping;
  j["n_max"] = c.n_max;
  j["d_inits"] = c.d_inits;
  j["seed"] = c.seed;
  return j.dump();
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::Reference: return "Reference";
    case Stage::BcsPeak: return "BcsPeak";
    case Stage::BrcThreshold: return "BrcThreshold";
    case Stage::BrcPeak: return "BrcPeak";
    case Stage::Undetermined: return "Undetermined";
  }
  return "Undetermined";
}

ScoreStore score_corpus(const Corpus& corpus, const FoldPlan& folds, const WindowGrid& grid, int order,
                        int workers, ScoringSummary* summary, const ProgressFn& progress) {
  grid.validate();
  ScoreStore store(corpus.behaviors(), grid.lengths, corpus.size());
  const EnsembleTrainer trainer(corpus, folds, order);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(folds.fold_count));
  for (std::size_t i = 0; i < corpus.size(); ++i) members[static_cast<std::size_t>(folds.fold_of[i])].push_back(i);

  std::atomic<long> windows{0}, clamped{0};
  std::mutex progress_mutex;
  for (std::size_t b = 0; b < corpus.behaviors().size(); ++b) {
    const auto totals = trainer.for_behavior(b);
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
      for (int f = next++; f < folds.fold_count; f = next++) {
        try {
          const auto ensemble = totals.train(f);
          for (auto i : members[static_cast<std::size_t>(f)]) {
            const TrajectoryScorer scorer(ensemble, trainer.encoded()[i]);
            for (std::size_t l = 0; l < grid.lengths.size(); ++l) {
              auto t = scorer.score(grid.lengths[l]);
              windows += static_cast<long>(t.scores.size());
              clamped += t.clamped_windows;
              store.set(b, l, i, std::move(t.scores));
            }
          }
          if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(corpus.behaviors()[b], f, folds.fold_count);
          }
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = folds.fold_count;
        }
      }
    };
    const int n_threads = std::max(1, std::min(workers, folds.fold_count));
    std::vector<std::thread> pool;
    for (int t = 1; t < n_threads; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  if (summary) *summary = {windows.load(), clamped.load()};
  return store;
}

BcsTable compute_bcs_table(const Corpus& corpus, const ScoreStore& store) {
  BcsTable table;
  for (const auto& behavior : store.behaviors()) {
    for (int length : store.lengths()) {
      for (auto f : kFunctionals) {
        BcsEntry e;
        try {
          e = compute_bcs(corpus, store, behavior, length, f);
        } catch (const Error& err) {
          if (err.kind() != ErrorKind::DegenerateInput) throw;
          e = {kNaN, static_cast<long>(corpus.size()), kNaN};
        }
        table[{behavior, length, f}] = e;
      }
    }
  }
  return table;
}

FunctionalKind select_best_functional(const BcsTable& bcs, std::string_view behavior,
                                      const std::vector<int>& lengths) {
  FunctionalKind best = FunctionalKind::Median;
  double best_mean = -std::numeric_limits<double>::infinity();
  for (auto f : kFunctionals) {
    double sum = 0.0;
    for (int length : lengths) {
      auto it = bcs.find({std::string(behavior), length, f});
      if (it == bcs.end()) {
        throw Error(ErrorKind::MissingCells, "no BCS for '" + std::string(behavior) + "' at L=" +
                                                 std::to_string(length) + " (" + std::string(to_string(f)) + ")");
      }
      sum += it->second.rho;
    }
    const double mean = sum / static_cast<double>(lengths.size());
    // Median is visited first, so it keeps exact ties.
    if (std::isfinite(mean) && mean > best_mean) {
      best_mean = mean;
      best = f;
    }
  }
  return best;
}

AnalysisResult decide(const Corpus& corpus, const ScoreStore& store, const PipelineConfig& config) {
  config.validate();
  AnalysisResult out;
  out.lengths = store.lengths();
  out.bcs = compute_bcs_table(corpus, store);
  const auto& lengths = out.lengths;
  const std::size_t n_len = lengths.size();
  const long n_sessions = static_cast<long>(corpus.size());

  // Stage 1.
  for (const auto& behavior : corpus.behaviors()) {
    WindowLengthVerdict v;
    v.behavior = behavior;
    v.functional = select_best_functional(out.bcs, behavior, lengths);
    for (int length : lengths) v.bcs.push_back(out.bcs.at({behavior, length, v.functional}).rho);
    const bool reference = std::all_of(v.bcs.begin(), v.bcs.end(), [&](double r) { return r > config.y1; });
    if (reference) {
      v.stage = Stage::Reference;
      v.chosen_length = lengths.front();
      v.reason = "BCS above Y1 at every length";
      out.references.push_back(behavior);
    }
    out.verdicts.push_back(std::move(v));
  }

  // Stage 2: BCS at its peak length against BCS at its weakest length.
  for (auto& v : out.verdicts) {
    if (v.stage != Stage::Undetermined) continue;
    const int hi = arg_extreme(v.bcs, true);
    const int lo = arg_extreme(v.bcs, false);
    if (hi < 0 || hi == lo) {
      v.reason = "BCS flat or undefined across lengths";
      continue;
    }
    BcsPeakEvidence ev;
    ev.length_max = lengths[static_cast<std::size_t>(hi)];
    ev.length_min = lengths[static_cast<std::size_t>(lo)];
    ev.bcs_max = v.bcs[static_cast<std::size_t>(hi)];
    ev.bcs_min = v.bcs[static_cast<std::size_t>(lo)];
    ev.n = n_sessions;
    const auto b = store.behavior_index(v.behavior);
    ev.r_y = safe_pearson(average_ranks(store.aggregates(b, static_cast<std::size_t>(hi), v.functional)),
                          average_ranks(store.aggregates(b, static_cast<std::size_t>(lo), v.functional)));
    try {
      ev.decision = zou_dependent_overlapping_ci(ev.bcs_max, ev.bcs_min, ev.r_y, ev.n, config.level());
    } catch (const Error& e) {
      v.reason = "BCS difference untestable: " + std::string(e.what());
    }
    if (ev.decision && ev.decision->significant) {
      v.stage = Stage::BcsPeak;
      v.chosen_length = ev.length_max;
      v.reason = "BCS peak differs significantly from BCS minimum";
    } else if (ev.decision) {
      v.reason = "BCS peak not significantly above minimum";
    }
    v.bcs_peak = ev;
  }

  const bool pending = std::any_of(out.verdicts.begin(), out.verdicts.end(),
                                   [](const auto& v) { return v.stage == Stage::Undetermined; });
  if (out.references.empty()) {
    out.brc_stages_skipped = pending;
    for (auto& v : out.verdicts) {
      if (v.stage == Stage::Undetermined) v.reason = "no reference behavior; BRC stages skipped (" + v.reason + ")";
    }
    return out;
  }
  if (!pending) return out;

  // Stages 3 and 4 compare against the references.
  std::vector<std::size_t> ref_idx;
  for (const auto& r : out.references) ref_idx.push_back(corpus.behavior_index(r));
  std::vector<std::size_t> targets;
  for (std::size_t t = 0; t < out.verdicts.size(); ++t) {
    if (out.verdicts[t].stage == Stage::Undetermined) targets.push_back(t);
  }

  // weights[l][k]: reference k at length l.
  std::vector<VectorXd> weights(n_len);
  for (std::size_t l = 0; l < n_len; ++l) {
    std::vector<double> bcs;
    for (auto r : ref_idx) bcs.push_back(out.verdicts[r].bcs[l]);
    weights[l] = reference_weights(bcs);
  }
  std::size_t dominant = 0;
  {
    VectorXd mean_w = VectorXd::Zero(static_cast<Eigen::Index>(ref_idx.size()));
    for (const auto& w : weights) mean_w += w;
    mean_w.maxCoeff(&dominant);
  }

  // cells[target][ref][l]
  std::vector<std::vector<std::vector<BrcCell>>> cells(
      targets.size(), std::vector<std::vector<BrcCell>>(ref_idx.size(), std::vector<BrcCell>(n_len)));
  std::vector<std::vector<double>> q_star(targets.size(), std::vector<double>(ref_idx.size()));
  const MatrixXd& ratings = corpus.rating_matrix();
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const VectorXd rt = average_ranks(ratings.col(static_cast<Eigen::Index>(targets[t])));
    for (std::size_t k = 0; k < ref_idx.size(); ++k) {
      q_star[t][k] = safe_pearson(rt, average_ranks(ratings.col(static_cast<Eigen::Index>(ref_idx[k]))));
    }
  }
  for (std::size_t l = 0; l < n_len; ++l) {
    std::vector<VectorXd> ref_ranks;
    for (auto r : ref_idx) ref_ranks.push_back(average_ranks(store.pooled(r, l)));
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const VectorXd tr = average_ranks(store.pooled(targets[t], l));
      for (std::size_t k = 0; k < ref_idx.size(); ++k) {
        BrcCell& c = cells[t][k][l];
        c.q_star = q_star[t][k];
        c.q_prime = safe_pearson(tr, ref_ranks[k]);
        c.brc = brc_from_correlations(c.q_star, c.q_prime);
        c.n_windows = static_cast<long>(tr.size());
      }
    }
  }

  for (std::size_t t = 0; t < targets.size(); ++t) {
    auto& v = out.verdicts[targets[t]];
    for (std::size_t l = 0; l < n_len; ++l) {
      double acc = 0.0;
      for (std::size_t k = 0; k < ref_idx.size(); ++k) {
        acc += weights[l](static_cast<Eigen::Index>(k)) * cells[t][k][l].brc;
        out.brc.push_back({v.behavior, out.references[k], lengths[l], cells[t][k][l]});
      }
      v.weighted_brc.push_back(acc);
    }

    // Stage 3.
    for (std::size_t l = 0; l < n_len; ++l) {
      if (v.weighted_brc[l] > config.y2) {
        v.stage = Stage::BrcThreshold;
        v.chosen_length = lengths[l];
        v.reason = "weighted BRC above Y2";
        break;
      }
    }
    if (v.stage != Stage::Undetermined) continue;

    // Stage 4: the dominant reference's score correlations at the BRC peak and trough.
    const int hi = arg_extreme(v.weighted_brc, true);
    const int lo = arg_extreme(v.weighted_brc, false);
    BrcPeakEvidence ev;
    ev.reference = out.references[dominant];
    if (hi < 0 || hi == lo) {
      v.reason = "weighted BRC flat or undefined across lengths";
      v.brc_peak = ev;
      continue;
    }
    const auto& hc = cells[t][dominant][static_cast<std::size_t>(hi)];
    const auto& lc = cells[t][dominant][static_cast<std::size_t>(lo)];
    ev.length_max = lengths[static_cast<std::size_t>(hi)];
    ev.length_min = lengths[static_cast<std::size_t>(lo)];
    ev.brc_max = v.weighted_brc[static_cast<std::size_t>(hi)];
    ev.brc_min = v.weighted_brc[static_cast<std::size_t>(lo)];
    ev.q_prime_max = hc.q_prime;
    ev.q_prime_min = lc.q_prime;
    ev.n_max = hc.n_windows;
    ev.n_min = lc.n_windows;
    try {
      ev.decision = zou_independent_ci(ev.q_prime_max, ev.n_max, ev.q_prime_min, ev.n_min, config.level());
    } catch (const Error& e) {
      v.reason = "BRC difference untestable: " + std::string(e.what());
    }
    if (ev.decision && ev.decision->significant) {
      v.stage = Stage::BrcPeak;
      v.chosen_length = ev.length_max;
      v.reason = "BRC peak differs significantly from BRC minimum";
    } else if (ev.decision) {
      v.reason = "no stage criterion met";
    }
    v.brc_peak = ev;
  }
  return out;
}

void attach_grouping(AnalysisResult& out, const Corpus& corpus, const PipelineConfig& config) {
  if (!config.grouping || corpus.behaviors().size() < 3) return;
  try {
    out.correlations = behavior_correlation_matrix(corpus);
    const int n_max = config.n_max > 0 ? config.n_max : default_n_max(corpus.behaviors().size());
    out.grouping = select_grouping(*out.correlations, 2, n_max, config.d_inits, config.seed);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::DegenerateInput && e.kind() != ErrorKind::TooFewSamples) throw;
    out.correlations.reset();
  }
}

AnalysisResult run_analysis(const Corpus& corpus, const PipelineConfig& config, const ProgressFn& progress) {
  config.validate();
  const auto folds = assign_folds(corpus, config.folds);
  ScoringSummary summary;
  const auto store = score_corpus(corpus, folds, config.grid, config.order, config.workers, &summary, progress);
  auto out = decide(corpus, store, config);
  out.windows_scored = summary.windows;
  out.clamped_windows = summary.clamped_windows;
  attach_grouping(out, corpus, config);
  return out;
}

}  // namespace obswin
