#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "longeval/panel.hpp"

namespace longeval {

struct PredictionEntry {
  PersonId person;
  DayIndex day = 0;
  double y_true = 0.0;
  double y_pred = 0.0;
};

// (y_true, y_pred) entries; no duplicate (person, day).
struct PredictionSet {
  std::vector<PredictionEntry> entries;

  void validate() const;
};

using Pair = std::pair<double, double>;  // (y_true, y_pred)

enum class MetricKind { Mae, Smape, PearsonR };
enum class MetricScope { Flattened, BetweenPerson, WithinPerson };

std::string_view to_string(MetricKind metric);
std::string_view to_string(MetricScope scope);
MetricKind parse_metric(std::string_view text);

double mae(std::span<const Pair> pairs);
double smape(std::span<const Pair> pairs, double epsilon = 0.0);
double pearson_r(std::span<const Pair> pairs);

struct ScopedValue {
  double value = 0.0;
  std::size_t n_units = 0;    // instances (Flattened) or persons
  std::size_t excluded = 0;   // persons dropped from within-person r
  std::optional<double> standard_error;
};

// Flattened pools every entry. BetweenPerson applies the metric to person
// means: per person then averaged for MAE/SMAPE, and as one correlation over
// the vector of person means for r. WithinPerson applies the metric to each
// person's series and averages over persons; persons whose r is undefined are
// excluded and counted.
ScopedValue scoped(MetricKind metric, MetricScope scope, const PredictionSet& preds,
                   double smape_epsilon = 0.0);

// Sample standard deviation of |y_pred - y_true| over sqrt(N).
double mae_standard_error(std::span<const Pair> pairs);

struct TTestResult {
  double t_stat = 0.0;
  double p_value = 0.0;
  std::size_t dof = 0;
};

// One-sided paired t-test of H1: mean(test_errors - baseline_errors) < 0.
TTestResult paired_one_sided_t(std::span<const double> test_errors,
                               std::span<const double> baseline_errors);

struct MetricCell {
  MetricScope scope = MetricScope::Flattened;
  MetricKind metric = MetricKind::Mae;
  std::optional<double> value;  // empty when the metric is undefined
  std::optional<double> standard_error;
  std::size_t n_units = 0;
  std::size_t excluded = 0;
  std::string note;
};

struct ScopedMetricReport {
  std::vector<MetricCell> cells;  // scope-major, metric-minor

  const MetricCell& at(MetricScope scope, MetricKind metric) const;
};

// Every scope x metric cell. Undefined cells carry the reason in `note`.
ScopedMetricReport build_report(const PredictionSet& preds,
                                std::span<const MetricKind> metrics = {},
                                double smape_epsilon = 0.0);

// `split,scope,metric,value,se,n_units,excluded`
std::string report_to_csv(const std::string& split, const ScopedMetricReport& report,
                          bool with_header = true);

std::vector<Pair> to_pairs(const PredictionSet& preds);

}  // namespace longeval
