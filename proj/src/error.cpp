#include "attnreg/error.hpp"

namespace attnreg {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonSymmetric: return "NonSymmetric";
    case ErrorKind::SingularGram: return "SingularGram";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::RankOutOfRange: return "RankOutOfRange";
    case ErrorKind::DegenerateRow: return "DegenerateRow";
    case ErrorKind::OptimizationFailed: return "OptimizationFailed";
    case ErrorKind::LineSearchFailure: return "LineSearchFailure";
    case ErrorKind::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorKind::DegenerateSignal: return "DegenerateSignal";
    case ErrorKind::DegenerateLag: return "DegenerateLag";
    case ErrorKind::DegenerateMask: return "DegenerateMask";
    case ErrorKind::DegenerateTarget: return "DegenerateTarget";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NonNumericColumn: return "NonNumericColumn";
    case ErrorKind::MissingTarget: return "MissingTarget";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace attnreg
