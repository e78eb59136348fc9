#include "longeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "longeval/csv.hpp"
#include "longeval/error.hpp"
#include "longeval/stats.hpp"

namespace longeval {

std::string_view to_string(MetricKind metric) {
  switch (metric) {
    case MetricKind::Mae: return "mae";
    case MetricKind::Smape: return "smape";
    case MetricKind::PearsonR: return "r";
  }
  return "unknown";
}

std::string_view to_string(MetricScope scope) {
  switch (scope) {
    case MetricScope::Flattened: return "flattened";
    case MetricScope::BetweenPerson: return "between";
    case MetricScope::WithinPerson: return "within";
  }
  return "unknown";
}

MetricKind parse_metric(std::string_view text) {
  if (text == "mae") return MetricKind::Mae;
  if (text == "smape") return MetricKind::Smape;
  if (text == "r" || text == "pearson_r") return MetricKind::PearsonR;
  throw Error(ErrorKind::Config, "unknown metric '" + std::string(text) + "'");
}

void PredictionSet::validate() const {
  std::set<InstanceKey> seen;
  for (const auto& e : entries) {
    if (!std::isfinite(e.y_true) || !std::isfinite(e.y_pred)) {
      throw Error(ErrorKind::NonFinite, "non-finite prediction entry for " + e.person);
    }
    if (!seen.insert({e.person, e.day}).second) {
      throw Error(ErrorKind::Duplicate,
                  "duplicate prediction for (" + e.person + ", " + std::to_string(e.day) + ")");
    }
  }
}

std::vector<Pair> to_pairs(const PredictionSet& preds) {
  std::vector<Pair> out;
  out.reserve(preds.entries.size());
  for (const auto& e : preds.entries) out.emplace_back(e.y_true, e.y_pred);
  return out;
}

double mae(std::span<const Pair> pairs) {
  if (pairs.empty()) throw Error(ErrorKind::UndefinedMetric, "MAE of an empty set");
  double sum = 0.0;
  for (const auto& [y, p] : pairs) sum += std::fabs(p - y);
  return sum / static_cast<double>(pairs.size());
}

namespace {

double smape_term(double y, double p, double epsilon) {
  const double denom = std::fabs(y) + std::fabs(p) + epsilon;
  if (denom == 0.0) throw Error(ErrorKind::UndefinedMetric, "SMAPE denominator is zero");
  return 2.0 * std::fabs(p - y) / denom;
}

bool constant(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); });
}

double correlation(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n < 2) throw Error(ErrorKind::UndefinedMetric, "Pearson r needs at least 2 pairs");
  if (constant(a) || constant(b)) {
    throw Error(ErrorKind::UndefinedMetric, "Pearson r undefined for a constant series");
  }
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) {
    throw Error(ErrorKind::UndefinedMetric, "Pearson r undefined for a constant series");
  }
  return std::clamp(sab / (std::sqrt(saa) * std::sqrt(sbb)), -1.0, 1.0);
}

std::optional<double> standard_error_of(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 2) return std::nullopt;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
}

double average(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Entries grouped per person, persons in id order, entries in input order.
std::map<PersonId, std::vector<Pair>> by_person(const PredictionSet& preds) {
  std::map<PersonId, std::vector<Pair>> groups;
  for (const auto& e : preds.entries) groups[e.person].emplace_back(e.y_true, e.y_pred);
  return groups;
}

std::vector<double> elementwise_terms(MetricKind metric, std::span<const Pair> pairs, double eps) {
  std::vector<double> terms;
  terms.reserve(pairs.size());
  for (const auto& [y, p] : pairs) {
    terms.push_back(metric == MetricKind::Mae ? std::fabs(p - y) : smape_term(y, p, eps));
  }
  return terms;
}

}  // namespace

double smape(std::span<const Pair> pairs, double epsilon) {
  if (pairs.empty()) throw Error(ErrorKind::UndefinedMetric, "SMAPE of an empty set");
  return average(elementwise_terms(MetricKind::Smape, pairs, epsilon));
}

double pearson_r(std::span<const Pair> pairs) {
  std::vector<double> y, p;
  y.reserve(pairs.size());
  p.reserve(pairs.size());
  for (const auto& [a, b] : pairs) {
    y.push_back(a);
    p.push_back(b);
  }
  return correlation(y, p);
}

double mae_standard_error(std::span<const Pair> pairs) {
  if (pairs.size() < 2) throw Error(ErrorKind::UndefinedMetric, "standard error needs N >= 2");
  return *standard_error_of(elementwise_terms(MetricKind::Mae, pairs, 0.0));
}

ScopedValue scoped(MetricKind metric, MetricScope scope, const PredictionSet& preds,
                   double smape_epsilon) {
  if (preds.entries.empty()) throw Error(ErrorKind::UndefinedMetric, "empty prediction set");
  ScopedValue out;

  const auto groups = by_person(preds);

  if (scope == MetricScope::Flattened) {
    // Pooled in person order, the order the person-level scopes sum in, so
    // one entry per person gives bit-equal values across scopes.
    std::vector<Pair> pairs;
    pairs.reserve(preds.entries.size());
    for (const auto& [_, group] : groups) pairs.insert(pairs.end(), group.begin(), group.end());
    out.n_units = pairs.size();
    if (metric == MetricKind::PearsonR) {
      out.value = pearson_r(pairs);
    } else {
      const auto terms = elementwise_terms(metric, pairs, smape_epsilon);
      out.value = average(terms);
      out.standard_error = standard_error_of(terms);
    }
    return out;
  }

  if (scope == MetricScope::BetweenPerson) {
    std::vector<Pair> means;
    means.reserve(groups.size());
    for (const auto& [_, pairs] : groups) {
      double sy = 0.0, sp = 0.0;
      for (const auto& [y, p] : pairs) {
        sy += y;
        sp += p;
      }
      const double n = static_cast<double>(pairs.size());
      means.emplace_back(sy / n, sp / n);
    }
    out.n_units = means.size();
    if (metric == MetricKind::PearsonR) {
      out.value = pearson_r(means);
    } else {
      const auto terms = elementwise_terms(metric, means, smape_epsilon);
      out.value = average(terms);
      out.standard_error = standard_error_of(terms);
    }
    return out;
  }

  std::vector<double> per_person;
  for (const auto& [_, pairs] : groups) {
    if (metric == MetricKind::PearsonR) {
      try {
        per_person.push_back(pearson_r(pairs));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedMetric) throw;
        ++out.excluded;
      }
    } else {
      per_person.push_back(average(elementwise_terms(metric, pairs, smape_epsilon)));
    }
  }
  if (per_person.empty()) {
    throw Error(ErrorKind::UndefinedMetric, "within-person r undefined for every person");
  }
  out.n_units = per_person.size();
  out.value = average(per_person);
  if (metric != MetricKind::PearsonR) out.standard_error = standard_error_of(per_person);
  return out;
}

TTestResult paired_one_sided_t(std::span<const double> test_errors,
                               std::span<const double> baseline_errors) {
  if (test_errors.size() != baseline_errors.size()) {
    throw Error(ErrorKind::Parameter, "paired t-test needs equal-length error lists");
  }
  const std::size_t n = test_errors.size();
  if (n < 2) throw Error(ErrorKind::Parameter, "paired t-test needs at least 2 pairs");

  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) diff[i] = test_errors[i] - baseline_errors[i];

  TTestResult out;
  out.dof = n - 1;
  if (std::all_of(diff.begin(), diff.end(), [](double d) { return d == 0.0; })) {
    out.t_stat = 0.0;
    out.p_value = 0.5;
    return out;
  }
  const double mean = average(diff);
  double ss = 0.0;
  for (double d : diff) ss += (d - mean) * (d - mean);
  if (constant(diff) || ss == 0.0) {
    throw Error(ErrorKind::DegenerateTest, "paired differences have zero variance");
  }
  const double se = std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
  out.t_stat = mean / se;
  out.p_value = stats::student_t_cdf(out.t_stat, static_cast<double>(out.dof));
  return out;
}

const MetricCell& ScopedMetricReport::at(MetricScope scope, MetricKind metric) const {
  for (const auto& c : cells) {
    if (c.scope == scope && c.metric == metric) return c;
  }
  throw Error(ErrorKind::Parameter, "metric cell not in report");
}

ScopedMetricReport build_report(const PredictionSet& preds, std::span<const MetricKind> metrics,
                                double smape_epsilon) {
  static constexpr MetricKind kAll[] = {MetricKind::Mae, MetricKind::Smape, MetricKind::PearsonR};
  if (metrics.empty()) metrics = kAll;
  ScopedMetricReport report;
  for (auto scope : {MetricScope::Flattened, MetricScope::BetweenPerson, MetricScope::WithinPerson}) {
    for (auto metric : metrics) {
      MetricCell cell;
      cell.scope = scope;
      cell.metric = metric;
      try {
        const auto v = scoped(metric, scope, preds, smape_epsilon);
        cell.value = v.value;
        cell.standard_error = v.standard_error;
        cell.n_units = v.n_units;
        cell.excluded = v.excluded;
        if (scope == MetricScope::BetweenPerson && metric == MetricKind::PearsonR) {
          cell.note = "correlation over person means";
        }
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::UndefinedMetric) throw;
        cell.note = e.what();
        if (scope == MetricScope::WithinPerson && metric == MetricKind::PearsonR) {
          std::set<PersonId> people;
          for (const auto& entry : preds.entries) people.insert(entry.person);
          cell.excluded = people.size();
        }
      }
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

std::string report_to_csv(const std::string& split, const ScopedMetricReport& report,
                          bool with_header) {
  std::string out = with_header ? "split,scope,metric,value,se,n_units,excluded\n" : "";
  for (const auto& c : report.cells) {
    out += split + "," + std::string(to_string(c.scope)) + "," + std::string(to_string(c.metric)) +
           "," + (c.value ? csv::format_exact(*c.value) : "") + "," +
           (c.standard_error ? csv::format_exact(*c.standard_error) : "") + "," +
           std::to_string(c.n_units) + "," + std::to_string(c.excluded) + "\n";
  }
  return out;
}

}  // namespace longeval
