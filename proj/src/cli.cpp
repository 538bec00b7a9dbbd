#include "obswin/cli.hpp"

#include "obswin/grouping.hpp"
#include "obswin/pipeline.hpp"
#include "obswin/report.hpp"
#include "obswin/scorer.hpp"
#include "obswin/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#ifndef OBSWIN_VERSION
#define OBSWIN_VERSION "0.0.0"
#endif

namespace obswin {

namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Options {
  std::string corpus;
  std::string config;
  std::string out;
  std::string spec;
  std::string truth;
  std::string behavior;
  std::string ensemble;
  std::string in;
  int k_max = 9;
  int workers = 0;
  int length = 0;
  int fold = -1;
  std::string fold_scheme;
  int kfold_k = 0;
  int order = 0;
  double y1 = 0.0;
  double y2 = 0.0;
  double alpha = 0.0;
  std::vector<int> grid;
  int n_max = 0;
  int d_inits = 0;
  std::uint64_t seed = 0;
  bool trajectories = false;
  int verbose = 0;
};

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << v;
  return s.str();
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Run {
 public:
  Run(std::string command, const Options& opt, std::ostream& out, std::ostream& err)
      : command_(std::move(command)), opt_(opt), out_(out), err_(err) {}

  int execute(const CLI::App& app);

 private:
  bool flag_set(const char* name) const { return app_->get_subcommand(command_)->count(name) > 0; }

  PipelineConfig pipeline_config() const;
  Corpus corpus() const { return load_corpus(opt_.corpus, RatingScale{opt_.k_max}); }
  void log(const std::string& line) const {
    if (opt_.verbose > 0) err_ << line << '\n';
  }
  void write_manifest(const fs::path& path, const std::string& config_json,
                      const std::vector<fs::path>& outputs) const;

  int validate();
  int train();
  int score();
  int bcs();
  int brc();
  int group();
  int analyze();
  int simulate();
  int report();

  std::string command_;
  const Options& opt_;
  std::ostream& out_;
  std::ostream& err_;
  const CLI::App* app_ = nullptr;
};

PipelineConfig Run::pipeline_config() const {
  PipelineConfig c;
  if (!opt_.config.empty()) c = config_from_json(read_file(opt_.config), c);
  if (flag_set("--grid")) c.grid.lengths = opt_.grid;
  if (flag_set("--y1")) c.y1 = opt_.y1;
  if (flag_set("--y2")) c.y2 = opt_.y2;
  if (flag_set("--alpha")) c.alpha = opt_.alpha;
  if (flag_set("--order")) c.order = opt_.order;
  if (flag_set("--folds")) {
    c.folds.kind = opt_.fold_scheme == "kfold" ? FoldScheme::Kind::KFold : FoldScheme::Kind::LeaveOneCoupleOut;
  }
  if (flag_set("--k")) c.folds.k = opt_.kfold_k;
  if (flag_set("--n-max")) c.n_max = opt_.n_max;
  if (flag_set("--d-inits")) c.d_inits = opt_.d_inits;
  if (flag_set("--seed")) c.seed = opt_.seed;
  c.workers = opt_.workers > 0 ? opt_.workers : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  c.validate();
  return c;
}

void Run::write_manifest(const fs::path& path, const std::string& config_json,
                         const std::vector<fs::path>& outputs) const {
  ordered_json m;
  m["command"] = command_;
  m["version"] = OBSWIN_VERSION;
  m["seed"] = opt_.seed;
  m["config_hash"] = hex(fnv1a(config_json));
  m["config"] = config_json.empty() ? ordered_json(nullptr) : ordered_json::parse(config_json);
  m["inputs"] = ordered_json::array();
  for (const auto& p : {opt_.corpus, opt_.config, opt_.spec, opt_.ensemble, opt_.in}) {
    if (!p.empty()) m["inputs"].push_back(p);
  }
  m["outputs"] = ordered_json::array();
  for (const auto& p : outputs) m["outputs"].push_back(p.filename().string());
  m["timestamp"] = utc_now();
  write_file_atomic(path, m.dump(2) + "\n");
}

int Run::validate() {
  const auto c = corpus();
  out_ << "ok: " << opt_.corpus << ": " << c.size() << " interactions, " << c.behaviors().size()
       << " behaviors, " << c.couples().size() << " couples, K=" << c.scale().k_max << '\n';
  return kExitOk;
}

int Run::train() {
  const auto c = corpus();
  const auto config = pipeline_config();
  const auto plan = assign_folds(c, config.folds);
  if (opt_.fold >= plan.fold_count) {
    throw Error(ErrorKind::InvalidArgument, "fold " + std::to_string(opt_.fold) + " out of range");
  }
  const auto ensemble = train_ensemble(c, opt_.behavior, plan, opt_.fold, config.order);
  ensemble.save(opt_.out);
  write_manifest(fs::path(opt_.out) / "run_manifest.json", config_to_json(config), {"manifest.json"});
  out_ << "trained " << ensemble.pairs().size() << " classifier pairs for '" << opt_.behavior << "' into "
       << opt_.out << '\n';
  return kExitOk;
}

int Run::score() {
  const auto c = corpus();
  const auto ensemble = ClassifierEnsemble::load(opt_.ensemble);
  std::ostringstream csv;
  csv << "interaction_id,behavior,L,window_index,score\n";
  for (const auto& it : c.interactions()) {
    const TrajectoryScorer scorer(ensemble, it.tokens);
    const auto t = scorer.score(opt_.length);
    for (Eigen::Index w = 0; w < t.scores.size(); ++w) {
      csv << it.id << ',' << ensemble.behavior() << ',' << opt_.length << ',' << w << ','
          << format_number(t.scores(w)) << '\n';
    }
  }
  if (opt_.out.empty()) {
    out_ << csv.str();
  } else {
    write_file_atomic(opt_.out, csv.str());
  }
  return kExitOk;
}

int Run::bcs() {
  const auto c = corpus();
  const auto config = pipeline_config();
  const auto plan = assign_folds(c, config.folds);
  const auto store = score_corpus(c, plan, config.grid, config.order, config.workers);
  const auto table = compute_bcs_table(c, store);
  const std::string csv = bcs_csv(table);
  write_file_atomic(opt_.out, csv);
  write_manifest(fs::path(opt_.out).string() + ".manifest.json", config_to_json(config), {opt_.out});
  return kExitOk;
}

int Run::brc() {
  const auto c = corpus();
  const auto config = pipeline_config();
  const auto plan = assign_folds(c, config.folds);
  const auto store = score_corpus(c, plan, config.grid, config.order, config.workers);
  std::vector<BrcRecord> rows;
  const auto& names = c.behaviors();
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      for (int length : config.grid.lengths) {
        BrcCell cell;
        try {
          cell = compute_brc_pair(c, store, names[i], names[j], length);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::DegenerateInput) throw;
          cell.q_star = cell.q_prime = cell.brc = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back({names[i], names[j], length, cell});
      }
    }
  }
  write_file_atomic(opt_.out, brc_csv(rows));
  write_manifest(fs::path(opt_.out).string() + ".manifest.json", config_to_json(config), {opt_.out});
  return kExitOk;
}

int Run::group() {
  const auto c = corpus();
  const auto config = pipeline_config();
  const auto matrix = behavior_correlation_matrix(c);
  const int n_max = config.n_max > 0 ? config.n_max : default_n_max(c.behaviors().size());
  const auto result = select_grouping(matrix, 2, n_max, config.d_inits, config.seed);
  const fs::path dir(opt_.out);
  const std::string g = grouping_json(result);
  const std::string m = matrix_csv(matrix.behaviors, matrix.values);
  const std::string p = matrix_csv(matrix.behaviors, matrix.p_values);
  write_file_atomic(dir / "grouping.json", g);
  write_file_atomic(dir / "correlation.csv", m);
  write_file_atomic(dir / "correlation_p.csv", p);
  write_manifest(dir / "run_manifest.json", config_to_json(config),
                 {"grouping.json", "correlation.csv", "correlation_p.csv"});
  out_ << "chosen N=" << result.chosen_n << " (size disparity " << result.size_disparity << ")\n";
  return kExitOk;
}

int Run::analyze() {
  const auto c = corpus();
  const auto config = pipeline_config();
  const auto plan = assign_folds(c, config.folds);
  log("scoring " + std::to_string(c.size()) + " interactions, " + std::to_string(c.behaviors().size()) +
      " behaviors, " + std::to_string(plan.fold_count) + " folds");
  ScoringSummary summary;
  const auto store = score_corpus(c, plan, config.grid, config.order, config.workers, &summary,
                                  [&](const std::string& b, int f, int n) {
                                    if (opt_.verbose > 1) err_ << b << " fold " << f + 1 << "/" << n << '\n';
                                  });
  auto result = decide(c, store, config);
  result.windows_scored = summary.windows;
  result.clamped_windows = summary.clamped_windows;
  attach_grouping(result, c, config);

  const fs::path dir(opt_.out);
  std::string traj;
  if (opt_.trajectories) traj = trajectories_csv(c, store);
  auto written = emit_report(result, dir);
  if (opt_.trajectories) {
    write_file_atomic(dir / "trajectories.csv", traj);
    written.push_back(dir / "trajectories.csv");
  }
  write_manifest(dir / "run_manifest.json", config_to_json(config), written);

  for (const auto& v : result.verdicts) {
    out_ << v.behavior << '\t' << to_string(v.stage) << '\t'
         << (v.chosen_length ? std::to_string(*v.chosen_length) : "-") << '\t' << to_string(v.functional) << '\n';
  }
  if (result.brc_stages_skipped) {
    err_ << "{\"error\":\"NoReferenceBehavior\",\"message\":\"no behavior passed stage 1; "
            "BRC stages skipped\"}\n";
    return kExitNoReference;
  }
  return kExitOk;
}

int Run::simulate() {
  auto spec = synth_spec_from_json(read_file(opt_.spec));
  if (flag_set("--seed")) spec.seed = opt_.seed;
  const auto result = generate_corpus(spec);
  std::ostringstream corpus_text;
  write_corpus(result.corpus, corpus_text);
  const std::string truth = truth_to_json(result.truth, result.corpus);
  const fs::path out(opt_.out);
  const fs::path truth_path = opt_.truth.empty() ? fs::path(out.string() + ".truth.json") : fs::path(opt_.truth);
  write_file_atomic(out, corpus_text.str());
  write_file_atomic(truth_path, truth);
  out_ << "wrote " << result.corpus.size() << " interactions to " << out.string() << '\n';
  return kExitOk;
}

int Run::report() {
  const fs::path dir(opt_.in);
  ordered_json v;
  try {
    v = ordered_json::parse(read_file(dir / "verdicts.json"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::MalformedRecord, "verdicts.json: " + std::string(e.what()));
  }
  std::ostringstream text;
  const auto lengths = v.at("lengths").get<std::vector<int>>();
  text << "behavior\tstage\tL*\tfunctional";
  for (int l : lengths) text << "\tBCS@" << l;
  text << "\treason\n";
  for (const auto& e : v.at("verdicts")) {
    text << e.at("behavior").get<std::string>() << '\t' << e.at("stage").get<std::string>() << '\t'
         << (e.at("chosen_length").is_null() ? std::string("-") : std::to_string(e.at("chosen_length").get<int>()))
         << '\t' << e.at("functional").get<std::string>();
    for (const auto& b : e.at("bcs")) {
      char buf[32];
      if (b.is_null()) {
        text << "\tnan";
      } else {
        std::snprintf(buf, sizeof buf, "%.3f", b.get<double>());
        text << '\t' << buf;
      }
    }
    text << '\t' << e.at("reason").get<std::string>() << '\n';
  }
  if (opt_.out.empty()) {
    out_ << text.str();
  } else {
    write_file_atomic(opt_.out, text.str());
  }
  return kExitOk;
}

int Run::execute(const CLI::App& app) {
  app_ = &app;
  if (command_ == "validate") return validate();
  if (command_ == "train") return train();
  if (command_ == "score") return score();
  if (command_ == "bcs") return bcs();
  if (command_ == "brc") return brc();
  if (command_ == "group") return group();
  if (command_ == "analyze") return analyze();
  if (command_ == "simulate") return simulate();
  if (command_ == "report") return report();
  throw Error(ErrorKind::InvalidArgument, "unknown command " + command_);
}

void add_pipeline_flags(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "pipeline config JSON")->check(CLI::ExistingFile);
  sub->add_option("--grid", o.grid, "window lengths")->delimiter(',');
  sub->add_option("--y1", o.y1, "BCS threshold for references");
  sub->add_option("--y2", o.y2, "weighted BRC threshold");
  sub->add_option("--alpha", o.alpha, "significance level");
  sub->add_option("--order", o.order, "n-gram order");
  sub->add_option("--folds", o.fold_scheme, "fold scheme")->check(CLI::IsMember({"loco", "kfold"}));
  sub->add_option("--k", o.kfold_k, "fold count for kfold");
  sub->add_option("--n-max", o.n_max, "largest cluster count");
  sub->add_option("--d-inits", o.d_inits, "k-means runs per cluster count");
  sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--workers", o.workers, "scoring threads")->check(CLI::PositiveNumber);
}

void add_corpus_flags(CLI::App* sub, Options& o) {
  sub->add_option("--corpus", o.corpus, "corpus JSONL")->required()->check(CLI::ExistingFile);
  sub->add_option("--k-max", o.k_max, "rating scale maximum");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Observation-window analysis for behavior rating corpora", "obswin"};
  app.set_version_flag("--version", OBSWIN_VERSION);
  app.require_subcommand(1);
  app.add_flag("-v,--verbose", o.verbose, "more progress output");

  auto* validate = app.add_subcommand("validate", "check a corpus file");
  add_corpus_flags(validate, o);

  auto* train = app.add_subcommand("train", "train one behavior's classifier ensemble");
  add_corpus_flags(train, o);
  add_pipeline_flags(train, o);
  train->add_option("--behavior", o.behavior)->required();
  train->add_option("--fold", o.fold, "held-out fold (-1: train on everything)");
  train->add_option("--out", o.out, "ensemble directory")->required();

  auto* score = app.add_subcommand("score", "write window-score trajectories");
  add_corpus_flags(score, o);
  score->add_option("--ensemble", o.ensemble)->required()->check(CLI::ExistingDirectory);
  score->add_option("--length", o.length, "window length")->required()->check(CLI::PositiveNumber);
  score->add_option("--out", o.out, "trajectory CSV (stdout when absent)");

  auto* bcs = app.add_subcommand("bcs", "cross-validated BCS table");
  add_corpus_flags(bcs, o);
  add_pipeline_flags(bcs, o);
  bcs->add_option("--out", o.out)->required();

  auto* brc = app.add_subcommand("brc", "cross-validated BRC table for every behavior pair");
  add_corpus_flags(brc, o);
  add_pipeline_flags(brc, o);
  brc->add_option("--out", o.out)->required();

  auto* group = app.add_subcommand("group", "cluster behaviors by rating correlation");
  add_corpus_flags(group, o);
  add_pipeline_flags(group, o);
  group->add_option("--out", o.out, "output directory")->required();

  auto* analyze = app.add_subcommand("analyze", "full window-length analysis");
  add_corpus_flags(analyze, o);
  add_pipeline_flags(analyze, o);
  analyze->add_option("--out", o.out, "output directory")->required();
  analyze->add_flag("--trajectories", o.trajectories, "also dump every window score");

  auto* simulate = app.add_subcommand("simulate", "generate a synthetic corpus");
  simulate->add_option("--spec", o.spec, "synthesis spec JSON")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", o.out, "corpus JSONL")->required();
  simulate->add_option("--truth", o.truth, "planted-truth JSON (default <out>.truth.json)");
  simulate->add_option("--seed", o.seed, "override the spec seed");

  auto* report = app.add_subcommand("report", "render an analysis directory as a text table");
  report->add_option("--in", o.in, "analysis output directory")->required()->check(CLI::ExistingDirectory);
  report->add_option("--out", o.out, "text file (stdout when absent)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << OBSWIN_VERSION << '\n';
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    Run run(command, o, out, err);
    return run.execute(app);
  } catch (const Error& e) {
    ordered_json j{{"error", to_string(e.kind())}, {"message", e.what()}};
    err << j.dump() << '\n';
    return e.kind() == ErrorKind::NoReferenceBehavior ? kExitNoReference : kExitRuntime;
  } catch (const std::exception& e) {
    ordered_json j{{"error", "Internal"}, {"message", e.what()}};
    err << j.dump() << '\n';
    return kExitRuntime;
  }
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace obswin
