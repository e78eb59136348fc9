#include "longeval/error.hpp"

namespace longeval {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Range: return "range";
    case ErrorKind::Duplicate: return "duplicate";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::InsufficientCohort: return "insufficient_cohort";
    case ErrorKind::DegeneratePartition: return "degenerate_partition";
    case ErrorKind::UndefinedMetric: return "undefined_metric";
    case ErrorKind::DegenerateTest: return "degenerate_test";
    case ErrorKind::Rank: return "rank";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::NonFinite: return "non_finite";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Leakage: return "leakage";
    case ErrorKind::Io: return "io";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

}  // namespace longeval
