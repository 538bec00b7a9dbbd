#include "obswin/report.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <sstream>

namespace obswin {

namespace {

using ordered_json = nlohmann::ordered_json;

ordered_json number_or_null(double x) { return std::isfinite(x) ? ordered_json(x) : ordered_json(nullptr); }

ordered_json decision_json(const std::optional<SignificanceDecision>& d) {
  if (!d) return nullptr;
  return {{"significant", d->significant},
          {"lo", number_or_null(d->interval.lo)},
          {"hi", number_or_null(d->interval.hi)},
          {"level", d->interval.level}};
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

std::string bcs_csv(const BcsTable& table) {
  std::ostringstream out;
  out << "behavior,L,functional,rho,n,p\n";
  for (const auto& [key, e] : table) {
    out << key.behavior << ',' << key.length << ',' << to_string(key.functional) << ',' << format_number(e.rho)
        << ',' << e.n << ',' << format_number(e.p) << '\n';
  }
  return out.str();
}

std::string brc_csv(const std::vector<BrcRecord>& records) {
  std::ostringstream out;
  out << "behavior_i,behavior_j,L,q_star,q_prime,brc\n";
  for (const auto& r : records) {
    out << r.target << ',' << r.reference << ',' << r.length << ',' << format_number(r.cell.q_star) << ','
        << format_number(r.cell.q_prime) << ',' << format_number(r.cell.brc) << '\n';
  }
  return out.str();
}

std::string bcs_series_csv(const BcsTable& table) {
  std::ostringstream out;
  out << "behavior,functional,L,bcs\n";
  std::map<std::tuple<std::string, int, int>, double> rows;
  for (const auto& [key, e] : table) rows[{key.behavior, static_cast<int>(key.functional), key.length}] = e.rho;
  for (const auto& [key, rho] : rows) {
    out << std::get<0>(key) << ',' << to_string(static_cast<FunctionalKind>(std::get<1>(key))) << ','
        << std::get<2>(key) << ',' << format_number(rho) << '\n';
  }
  return out.str();
}

std::string verdicts_json(const AnalysisResult& result) {
  ordered_json j;
  j["lengths"] = result.lengths;
  j["references"] = result.references;
  j["windows_scored"] = result.windows_scored;
  j["clamped_windows"] = result.clamped_windows;
  j["verdicts"] = ordered_json::array();
  for (const auto& v : result.verdicts) {
    ordered_json e;
    e["behavior"] = v.behavior;
    e["stage"] = to_string(v.stage);
    e["chosen_length"] = v.chosen_length ? ordered_json(*v.chosen_length) : ordered_json(nullptr);
    e["functional"] = to_string(v.functional);
    e["reason"] = v.reason;
    e["bcs"] = ordered_json::array();
    for (double x : v.bcs) e["bcs"].push_back(number_or_null(x));
    e["weighted_brc"] = ordered_json::array();
    for (double x : v.weighted_brc) e["weighted_brc"].push_back(number_or_null(x));
    if (v.bcs_peak) {
      const auto& p = *v.bcs_peak;
      e["bcs_peak"] = {{"length_max", p.length_max}, {"length_min", p.length_min},
                       {"bcs_max", number_or_null(p.bcs_max)}, {"bcs_min", number_or_null(p.bcs_min)},
                       {"r_y", number_or_null(p.r_y)}, {"n", p.n}, {"ci", decision_json(p.decision)}};
    }
    if (v.brc_peak) {
      const auto& p = *v.brc_peak;
      e["brc_peak"] = {{"reference", p.reference}, {"length_max", p.length_max}, {"length_min", p.length_min},
                       {"brc_max", number_or_null(p.brc_max)}, {"brc_min", number_or_null(p.brc_min)},
                       {"q_prime_max", number_or_null(p.q_prime_max)},
                       {"q_prime_min", number_or_null(p.q_prime_min)}, {"n_max", p.n_max}, {"n_min", p.n_min},
                       {"ci", decision_json(p.decision)},
                       {"caveat", "window counts overlap by L-1 tokens; effective sample size is smaller"}};
    }
    j["verdicts"].push_back(std::move(e));
  }
  return j.dump(2) + "\n";
}

std::string grouping_json(const GroupingResult& g) {
  ordered_json j;
  j["chosen_n"] = g.chosen_n;
  j["size_disparity"] = g.size_disparity;
  j["clusters"] = g.partition;
  j["candidates"] = ordered_json::array();
  for (const auto& c : g.candidates) {
    j["candidates"].push_back({{"n", c.n}, {"size_disparity", c.size_disparity}, {"votes", c.votes},
                               {"distinct_partitions", c.distinct}, {"modal", c.modal}});
  }
  return j.dump(2) + "\n";
}

std::string matrix_csv(const std::vector<std::string>& names, const MatrixXd& values) {
  std::ostringstream out;
  out << "behavior";
  for (const auto& n : names) out << ',' << n;
  out << '\n';
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    out << names[static_cast<std::size_t>(i)];
    for (Eigen::Index k = 0; k < values.cols(); ++k) out << ',' << format_number(values(i, k));
    out << '\n';
  }
  return out.str();
}

std::string trajectories_csv(const Corpus& corpus, const ScoreStore& store) {
  std::ostringstream out;
  out << "interaction_id,behavior,L,window_index,score\n";
  for (std::size_t b = 0; b < store.behaviors().size(); ++b) {
    for (std::size_t l = 0; l < store.lengths().size(); ++l) {
      for (std::size_t i = 0; i < store.interactions(); ++i) {
        const auto& s = store.get(b, l, i);
        for (Eigen::Index w = 0; w < s.size(); ++w) {
          out << corpus.interactions()[i].id << ',' << store.behaviors()[b] << ',' << store.lengths()[l] << ','
              << w << ',' << format_number(s(w)) << '\n';
        }
      }
    }
  }
  return out.str();
}

std::vector<std::filesystem::path> emit_report(const AnalysisResult& result, const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, std::string>> files{
      {"verdicts.json", verdicts_json(result)},
      {"bcs.csv", bcs_csv(result.bcs)},
      {"brc.csv", brc_csv(result.brc)},
      {"bcs_series.csv", bcs_series_csv(result.bcs)},
  };
  if (result.grouping) files.emplace_back("grouping.json", grouping_json(*result.grouping));
  if (result.correlations) {
    files.emplace_back("correlation.csv", matrix_csv(result.correlations->behaviors, result.correlations->values));
    files.emplace_back("correlation_p.csv",
                       matrix_csv(result.correlations->behaviors, result.correlations->p_values));
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [name, content] : files) {
    write_file_atomic(dir / name, content);
    written.push_back(dir / name);
  }
  return written;
}

}  // namespace obswin
