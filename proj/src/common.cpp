#include "obswin/common.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

namespace obswin {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::RatingOutOfRange: return "RatingOutOfRange";
    case ErrorKind::InconsistentBehaviorSet: return "InconsistentBehaviorSet";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::TooFewCouples: return "TooFewCouples";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::ScaleTooSmall: return "ScaleTooSmall";
    case ErrorKind::EmptyPartitionSide: return "EmptyPartitionSide";
    case ErrorKind::EnsembleUntrained: return "EnsembleUntrained";
    case ErrorKind::InvalidLength: return "InvalidLength";
    case ErrorKind::EmptyTrajectory: return "EmptyTrajectory";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::NonPositiveWeightMass: return "NonPositiveWeightMass";
    case ErrorKind::TooFewSamples: return "TooFewSamples";
    case ErrorKind::PerfectCorrelation: return "PerfectCorrelation";
    case ErrorKind::MissingCells: return "MissingCells";
    case ErrorKind::NoReferenceBehavior: return "NoReferenceBehavior";
    case ErrorKind::SpecInvalid: return "SpecInvalid";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error(ErrorKind::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorKind::Io, "cannot rename onto " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace obswin
