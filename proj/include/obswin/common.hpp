#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace obswin {

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;
using VectorXi = Eigen::VectorXi;

// Every failure the library reports is an obswin::Error carrying one of these.
enum class ErrorKind {
  MalformedRecord,
  RatingOutOfRange,
  InconsistentBehaviorSet,
  EmptyCorpus,
  TooFewCouples,
  EmptyTrainingSet,
  ScaleTooSmall,
  EmptyPartitionSide,
  EnsembleUntrained,
  InvalidLength,
  EmptyTrajectory,
  LengthMismatch,
  DegenerateInput,
  NonPositiveWeightMass,
  TooFewSamples,
  PerfectCorrelation,
  MissingCells,
  NoReferenceBehavior,
  SpecInvalid,
  InvalidArgument,
  Io,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Writes to a sibling temp file and renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

}  // namespace obswin
