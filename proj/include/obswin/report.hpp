#pragma once

#include "obswin/pipeline.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace obswin {

// Shortest text that round-trips the double; "nan" for NaN.
std::string format_number(double x);

std::string bcs_csv(const BcsTable& table);
std::string brc_csv(const std::vector<BrcRecord>& records);
// One row per (behavior, functional, L): the BCS-vs-length curves.
std::string bcs_series_csv(const BcsTable& table);
std::string verdicts_json(const AnalysisResult& result);
std::string grouping_json(const GroupingResult& grouping);
std::string matrix_csv(const std::vector<std::string>& names, const MatrixXd& values);
std::string trajectories_csv(const Corpus& corpus, const ScoreStore& store);

// Writes verdicts.json, bcs.csv, brc.csv, bcs_series.csv and, when present,
// grouping.json, correlation.csv and correlation_p.csv. Returns the paths written.
std::vector<std::filesystem::path> emit_report(const AnalysisResult& result, const std::filesystem::path& dir);

}  // namespace obswin
