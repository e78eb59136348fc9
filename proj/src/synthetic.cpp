#include "longeval/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "longeval/csv.hpp"
#include "longeval/error.hpp"
#include "longeval/rng.hpp"

namespace longeval {

void CohortSpec::validate() const {
  if (n_people <= 0 || study_length <= 0 || feature_dim <= 0) {
    throw Error(ErrorKind::Parameter, "cohort sizes must be positive");
  }
  for (double sd : {sd_between, sd_innovation, sd_noise, feature_noise_sd, person_style_sd, loading_scale}) {
    if (!(sd >= 0.0)) throw Error(ErrorKind::Parameter, "standard deviations and scales must be >= 0");
  }
  if (!(ar_coef >= 0.0 && ar_coef < 1.0)) throw Error(ErrorKind::Parameter, "ar_coef must be in [0, 1)");
  for (double r : {feature_missing_rate, outcome_missing_rate}) {
    if (!(r >= 0.0 && r < 1.0)) throw Error(ErrorKind::Parameter, "missingness rates must be in [0, 1)");
  }
  if (block_length <= 0) throw Error(ErrorKind::Parameter, "block_length must be positive");
  schema().validate();
}

PanelSchema CohortSpec::schema() const {
  return {study_length, feature_dim, outcome_min, outcome_max};
}

std::string person_label(int index, int n_people) {
  const auto width = std::to_string(std::max(n_people - 1, 0)).size();
  std::string digits = std::to_string(index);
  return "p" + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

namespace {

std::vector<bool> missing_cells(int length, double rate, MissingnessMode mode, int block_length, Rng& rng) {
  std::vector<bool> missing(static_cast<std::size_t>(length), false);
  if (rate <= 0.0) return missing;
  if (mode == MissingnessMode::Random) {
    for (auto&& m : missing) m = rng.bernoulli(rate);
    return missing;
  }
  // Runs of block_length start on an observed day with probability q. Gaps
  // are geometric with mean (1 - q) / q, so the long-run missing fraction
  // L / (L + (1 - q) / q) equals rate when q = rate / (rate + L (1 - rate)).
  const double L = static_cast<double>(block_length);
  const double start = rate / (rate + L * (1.0 - rate));
  int remaining = 0;
  for (auto&& m : missing) {
    if (remaining == 0 && rng.bernoulli(start)) remaining = block_length;
    if (remaining > 0) {
      m = true;
      --remaining;
    }
  }
  return missing;
}

}  // namespace

SyntheticCohort generate(const CohortSpec& spec) {
  spec.validate();
  const int n = spec.n_people, T = spec.study_length, D = spec.feature_dim;

  Rng loading_rng(derive_seed(spec.seed, "loading"));
  GroundTruth truth;
  truth.outcome_mean = spec.outcome_mean;
  truth.loading.resize(D, 2);
  for (int k = 0; k < D; ++k) {
    const double angle = 2.0 * std::numbers::pi * loading_rng.uniform();
    truth.loading(k, 0) = spec.loading_scale * std::cos(angle);
    truth.loading(k, 1) = spec.loading_scale * std::sin(angle);
  }

  const double stationary_sd =
      spec.sd_innovation / std::sqrt(1.0 - spec.ar_coef * spec.ar_coef);

  PersonRows rows;
  for (int i = 0; i < n; ++i) {
    const PersonId person = person_label(i, n);
    Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(i)));

    const double b = rng.normal(0.0, spec.sd_between);
    Eigen::VectorXd style = Eigen::VectorXd::Zero(D);
    for (int k = 0; k < D; ++k) style(k) = rng.normal(0.0, spec.person_style_sd);

    std::vector<double> s(static_cast<std::size_t>(T));
    s[0] = rng.normal(0.0, stationary_sd);
    for (int t = 1; t < T; ++t) s[t] = spec.ar_coef * s[t - 1] + rng.normal(0.0, spec.sd_innovation);

    const auto feature_missing =
        missing_cells(T, spec.feature_missing_rate, spec.missingness, spec.block_length, rng);
    const auto outcome_missing =
        missing_cells(T, spec.outcome_missing_rate, spec.missingness, spec.block_length, rng);

    std::vector<DayRecord> records;
    records.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      const double y = std::clamp(spec.outcome_mean + b + s[t] + rng.normal(0.0, spec.sd_noise),
                                  spec.outcome_min, spec.outcome_max);
      std::vector<double> x(static_cast<std::size_t>(D));
      for (int k = 0; k < D; ++k) {
        x[k] = truth.loading(k, 0) * b + truth.loading(k, 1) * s[t] + style(k) +
               rng.normal(0.0, spec.feature_noise_sd);
      }
      Observation obs;
      if (!outcome_missing[t]) obs.outcome = y;
      if (!feature_missing[t]) obs.features = std::move(x);
      if (obs.outcome || obs.features) records.push_back({t, std::move(obs)});
    }
    truth.intercept[person] = b;
    truth.state[person] = std::move(s);
    rows.emplace(person, std::move(records));
  }
  return {Panel(spec.schema(), std::move(rows)), std::move(truth)};
}

PredictionSet oracle_between_only_predictor(const GroundTruth& truth, const Panel& panel) {
  PredictionSet out;
  for (const auto& [person, records] : panel.persons()) {
    const auto it = truth.intercept.find(person);
    if (it == truth.intercept.end()) throw Error(ErrorKind::Parameter, "no ground truth for " + person);
    for (const auto& rec : records) {
      if (!rec.obs.outcome) continue;
      out.entries.push_back({person, rec.day, *rec.obs.outcome, truth.outcome_mean + it->second});
    }
  }
  return out;
}

std::string truth_to_csv(const GroundTruth& truth) {
  std::string out = "person_id,day,b,s\n";
  for (const auto& [person, states] : truth.state) {
    const std::string b = csv::format_exact(truth.intercept.at(person));
    for (std::size_t t = 0; t < states.size(); ++t) {
      out += person + "," + std::to_string(t) + "," + b + "," + csv::format_exact(states[t]) + "\n";
    }
  }
  return out;
}

}  // namespace longeval
