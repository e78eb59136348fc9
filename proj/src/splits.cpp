#include "longeval/splits.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "longeval/csv.hpp"
#include "longeval/error.hpp"
#include "longeval/rng.hpp"

namespace longeval {

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::Traditional: return "traditional";
    case Regime::CrossSectional: return "cross_sectional";
    case Regime::Prospective: return "prospective";
    case Regime::CrossSectionalAndProspective: return "cross_and_prospective";
  }
  return "unknown";
}

std::string_view to_string(Assignment assignment) {
  switch (assignment) {
    case Assignment::Train: return "train";
    case Assignment::Dev: return "dev";
    case Assignment::Test: return "test";
    case Assignment::Unused: return "unused";
  }
  return "unknown";
}

Regime parse_regime(std::string_view text) {
  for (auto r : {Regime::Traditional, Regime::CrossSectional, Regime::Prospective,
                 Regime::CrossSectionalAndProspective}) {
    if (text == to_string(r)) return r;
  }
  throw Error(ErrorKind::Config, "unknown regime '" + std::string(text) + "'");
}

Assignment parse_assignment(std::string_view text) {
  for (auto a : {Assignment::Train, Assignment::Dev, Assignment::Test, Assignment::Unused}) {
    if (text == to_string(a)) return a;
  }
  throw Error(ErrorKind::Parse, "unknown assignment '" + std::string(text) + "'");
}

std::size_t SplitPlan::count(Assignment a) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), a));
}

std::vector<std::size_t> SplitPlan::indices(Assignment a) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == a) out.push_back(i);
  }
  return out;
}

PersonSet SplitPlan::people_with(Assignment a) const {
  PersonSet out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == a) out.insert(keys[i].person);
  }
  return out;
}

std::optional<Assignment> SplitPlan::lookup(const InstanceKey& key) const {
  const auto it = std::lower_bound(keys.begin(), keys.end(), key);
  if (it == keys.end() || *it != key) return std::nullopt;
  return labels[static_cast<std::size_t>(it - keys.begin())];
}

namespace {

SplitPlan blank_plan(const HistoryDataset& data, Regime regime, Assignment fill) {
  SplitPlan plan;
  plan.regime = regime;
  plan.keys.reserve(data.size());
  for (const auto& inst : data.instances) plan.keys.push_back(inst.key());
  plan.labels.assign(data.size(), fill);
  return plan;
}

double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

std::size_t rounded_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

// Contiguous equal-count chunks of an ordered list; sizes differ by at most 1.
template <class T>
std::vector<std::vector<T>> equal_count_bins(const std::vector<T>& ordered, std::size_t n_bins) {
  std::vector<std::vector<T>> bins(n_bins);
  const std::size_t n = ordered.size();
  for (std::size_t b = 0; b < n_bins; ++b) {
    const std::size_t lo = b * n / n_bins;
    const std::size_t hi = (b + 1) * n / n_bins;
    bins[b].assign(ordered.begin() + static_cast<std::ptrdiff_t>(lo),
                   ordered.begin() + static_cast<std::ptrdiff_t>(hi));
  }
  return bins;
}

std::vector<PersonId> persons_by_mean(const std::map<PersonId, double>& means) {
  std::vector<PersonId> ids;
  for (const auto& [p, _] : means) ids.push_back(p);
  std::stable_sort(ids.begin(), ids.end(), [&](const PersonId& a, const PersonId& b) {
    const double ma = means.at(a), mb = means.at(b);
    if (ma != mb) return ma < mb;
    return a < b;
  });
  return ids;
}

}  // namespace

PersonSet select_cohort(const Panel& panel, const StratificationSpec& spec,
                        const CohortFilter& filter, std::uint64_t seed) {
  if (filter.variation_floor < 0.0) throw Error(ErrorKind::Parameter, "variation_floor must be >= 0");
  if (spec.n_bins <= 0 || spec.per_bin_sample <= 0) {
    throw Error(ErrorKind::Parameter, "n_bins and per_bin_sample must be positive");
  }

  std::map<PersonId, double> means;
  for (const auto& [person, records] : panel.persons()) {
    std::vector<double> all, early, late;
    for (const auto& rec : records) {
      if (!rec.obs.outcome) continue;
      all.push_back(*rec.obs.outcome);
      (rec.day < filter.window_split ? early : late).push_back(*rec.obs.outcome);
    }
    if (all.empty()) continue;
    // Undefined variation (fewer than two outcomes) counts as zero.
    if (sample_sd(all) < filter.variation_floor || sample_sd(early) < filter.variation_floor ||
        sample_sd(late) < filter.variation_floor) {
      continue;
    }
    means[person] = std::accumulate(all.begin(), all.end(), 0.0) / static_cast<double>(all.size());
  }

  const auto n_bins = static_cast<std::size_t>(spec.n_bins);
  const auto per_bin = static_cast<std::size_t>(spec.per_bin_sample);
  if (n_bins * per_bin > means.size()) {
    throw Error(ErrorKind::InsufficientCohort,
                std::to_string(means.size()) + " eligible persons cannot fill " +
                    std::to_string(n_bins) + " strata x " + std::to_string(per_bin));
  }

  Rng rng(seed);
  PersonSet cohort;
  for (auto& bin : equal_count_bins(persons_by_mean(means), n_bins)) {
    if (bin.size() < per_bin) {
      throw Error(ErrorKind::InsufficientCohort, "stratum smaller than per_bin_sample");
    }
    rng.shuffle(std::span(bin));
    cohort.insert(bin.begin(), bin.begin() + static_cast<std::ptrdiff_t>(per_bin));
  }
  return cohort;
}

SplitPlan split_traditional(const HistoryDataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::Parameter, "test_fraction must be in (0, 1)");
  }
  SplitPlan plan = blank_plan(data, Regime::Traditional, Assignment::Train);
  plan.seed = seed;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span(order));
  const std::size_t n_test = rounded_count(test_fraction, data.size());
  for (std::size_t k = 0; k < n_test; ++k) plan.labels[order[k]] = Assignment::Test;
  return plan;
}

PersonSet choose_test_people(const HistoryDataset& data, const CrossSectionalOptions& options,
                             std::uint64_t seed) {
  if (!(options.test_fraction_people > 0.0 && options.test_fraction_people < 1.0)) {
    throw Error(ErrorKind::Parameter, "test_fraction_people must be in (0, 1)");
  }
  std::map<PersonId, std::pair<double, std::size_t>> sums;
  for (const auto& inst : data.instances) {
    auto& s = sums[inst.person];
    s.first += inst.target;
    s.second += 1;
  }
  if (sums.size() < 2) {
    throw Error(ErrorKind::DegeneratePartition, "cross-sectional split needs at least 2 persons");
  }
  const std::size_t n_people = sums.size();
  const std::size_t n_test = rounded_count(options.test_fraction_people, n_people);
  if (n_test == 0 || n_test >= n_people) {
    throw Error(ErrorKind::DegeneratePartition,
                "test fraction yields " + std::to_string(n_test) + " of " +
                    std::to_string(n_people) + " persons in test");
  }

  std::map<PersonId, double> means;
  for (const auto& [p, s] : sums) means[p] = s.first / static_cast<double>(s.second);

  Rng rng(seed);
  PersonSet test;
  if (!options.stratify_by_mean || options.strata <= 1) {
    std::vector<PersonId> ids;
    for (const auto& [p, _] : means) ids.push_back(p);
    rng.shuffle(std::span(ids));
    test.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    return test;
  }

  const std::size_t n_bins = std::min(static_cast<std::size_t>(options.strata), n_people);
  auto bins = equal_count_bins(persons_by_mean(means), n_bins);

  // Proportional allocation, largest remainder; ties go to the earlier bin.
  std::vector<std::size_t> quota(n_bins);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double exact = static_cast<double>(n_test * bins[b].size()) / static_cast<double>(n_people);
    quota[b] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[b];
    remainders.emplace_back(exact - static_cast<double>(quota[b]), b);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n_test; ++k, ++assigned) quota[remainders[k].second] += 1;

  for (std::size_t b = 0; b < n_bins; ++b) {
    rng.shuffle(std::span(bins[b]));
    test.insert(bins[b].begin(), bins[b].begin() + static_cast<std::ptrdiff_t>(quota[b]));
  }
  return test;
}

SplitPlan split_cross_sectional(const HistoryDataset& data, const CrossSectionalOptions& options,
                                std::uint64_t seed) {
  PersonSet test = choose_test_people(data, options, seed);
  SplitPlan plan = blank_plan(data, Regime::CrossSectional, Assignment::Train);
  plan.seed = seed;
  PersonSet train;
  for (std::size_t i = 0; i < plan.keys.size(); ++i) {
    if (test.contains(plan.keys[i].person)) {
      plan.labels[i] = Assignment::Test;
    } else {
      train.insert(plan.keys[i].person);
    }
  }
  plan.train_people = std::move(train);
  plan.test_people = std::move(test);
  return plan;
}

namespace {

void check_cutoff(const HistoryDataset& data, DayIndex cutoff) {
  if (!(cutoff > 0 && cutoff < data.study_length)) {
    throw Error(ErrorKind::Parameter, "cutoff must satisfy 0 < tau < study_length (" +
                                          std::to_string(data.study_length) + ")");
  }
}

}  // namespace

SplitPlan split_prospective(const HistoryDataset& data, DayIndex cutoff) {
  check_cutoff(data, cutoff);
  SplitPlan plan = blank_plan(data, Regime::Prospective, Assignment::Train);
  plan.cutoff = cutoff;
  for (std::size_t i = 0; i < plan.keys.size(); ++i) {
    if (plan.keys[i].day > cutoff) plan.labels[i] = Assignment::Test;
  }
  return plan;
}

SplitPlan split_cross_and_prospective(const HistoryDataset& data, const PersonSet& test_people,
                                      DayIndex cutoff) {
  check_cutoff(data, cutoff);
  if (test_people.empty()) throw Error(ErrorKind::Parameter, "test_people must be non-empty");
  const auto all = data.persons();
  const PersonSet known(all.begin(), all.end());
  for (const auto& p : test_people) {
    if (!known.contains(p)) throw Error(ErrorKind::Parameter, "test person '" + p + "' not in dataset");
  }
  SplitPlan plan = blank_plan(data, Regime::CrossSectionalAndProspective, Assignment::Unused);
  plan.cutoff = cutoff;
  PersonSet train;
  for (const auto& p : known) {
    if (!test_people.contains(p)) train.insert(p);
  }
  for (std::size_t i = 0; i < plan.keys.size(); ++i) {
    const bool is_test_person = test_people.contains(plan.keys[i].person);
    const bool after = plan.keys[i].day > cutoff;
    if (is_test_person && after) plan.labels[i] = Assignment::Test;
    if (!is_test_person && !after) plan.labels[i] = Assignment::Train;
  }
  plan.train_people = std::move(train);
  plan.test_people = test_people;
  return plan;
}

std::vector<SplitPlan> mask_to_match(const std::vector<SplitPlan>& plans, std::uint64_t seed) {
  if (plans.empty()) return {};
  for (const auto& p : plans) {
    if (p.keys != plans.front().keys) {
      throw Error(ErrorKind::Parameter, "plans must share the same instance universe");
    }
  }
  std::size_t min_train = SIZE_MAX, min_test = SIZE_MAX;
  for (const auto& p : plans) {
    min_train = std::min(min_train, p.count(Assignment::Train));
    min_test = std::min(min_test, p.count(Assignment::Test));
  }
  std::vector<SplitPlan> out = plans;
  for (std::size_t k = 0; k < out.size(); ++k) {
    Rng rng(derive_seed(seed, k));
    for (auto [label, target] : {std::pair{Assignment::Train, min_train},
                                 std::pair{Assignment::Test, min_test}}) {
      auto idx = out[k].indices(label);
      const std::size_t excess = idx.size() - target;
      if (excess == 0) continue;
      rng.shuffle(std::span(idx));
      for (std::size_t j = 0; j < excess; ++j) out[k].labels[idx[j]] = Assignment::Unused;
    }
  }
  return out;
}

namespace {

std::size_t carve_count(double fraction, std::size_t n, std::string_view what) {
  const std::size_t k = rounded_count(fraction, n);
  if (k == 0 || k >= n) {
    throw Error(ErrorKind::DegeneratePartition,
                "cannot carve dev: " + std::to_string(k) + " of " + std::to_string(n) + " " +
                    std::string(what));
  }
  return k;
}

PersonSet pick_dev_people(const SplitPlan& plan, double fraction, Rng& rng) {
  const auto train = plan.people_with(Assignment::Train);
  std::vector<PersonId> ids(train.begin(), train.end());
  const std::size_t k = carve_count(fraction, ids.size(), "training persons");
  rng.shuffle(std::span(ids));
  return PersonSet(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
}

// First day of the latest `fraction` of distinct training days.
DayIndex dev_day_threshold(const SplitPlan& plan, double fraction) {
  std::set<DayIndex> days;
  for (auto i : plan.indices(Assignment::Train)) days.insert(plan.keys[i].day);
  const std::size_t k = carve_count(fraction, days.size(), "training days");
  return *std::next(days.begin(), static_cast<std::ptrdiff_t>(days.size() - k));
}

}  // namespace

SplitPlan carve_dev(const SplitPlan& plan, double dev_fraction, std::uint64_t seed,
                    std::optional<Regime> as) {
  if (!(dev_fraction > 0.0 && dev_fraction < 1.0)) {
    throw Error(ErrorKind::Parameter, "dev_fraction must be in (0, 1)");
  }
  const Regime logic = as.value_or(plan.regime);
  SplitPlan out = plan;
  out.dev_regime = logic;
  Rng rng(seed);
  const auto train_idx = plan.indices(Assignment::Train);

  switch (logic) {
    case Regime::Traditional: {
      auto idx = train_idx;
      const std::size_t k = carve_count(dev_fraction, idx.size(), "training instances");
      rng.shuffle(std::span(idx));
      for (std::size_t j = 0; j < k; ++j) out.labels[idx[j]] = Assignment::Dev;
      break;
    }
    case Regime::CrossSectional: {
      const auto dev_people = pick_dev_people(plan, dev_fraction, rng);
      for (auto i : train_idx) {
        if (dev_people.contains(plan.keys[i].person)) out.labels[i] = Assignment::Dev;
      }
      break;
    }
    case Regime::Prospective: {
      const DayIndex first_dev_day = dev_day_threshold(plan, dev_fraction);
      for (auto i : train_idx) {
        if (plan.keys[i].day >= first_dev_day) out.labels[i] = Assignment::Dev;
      }
      break;
    }
    case Regime::CrossSectionalAndProspective: {
      const auto dev_people = pick_dev_people(plan, dev_fraction, rng);
      const DayIndex first_dev_day = dev_day_threshold(plan, dev_fraction);
      for (auto i : train_idx) {
        const bool dev_person = dev_people.contains(plan.keys[i].person);
        const bool late = plan.keys[i].day >= first_dev_day;
        if (dev_person && late) {
          out.labels[i] = Assignment::Dev;
        } else if (dev_person || late) {
          out.labels[i] = Assignment::Unused;
        }
      }
      break;
    }
  }
  if (out.count(Assignment::Train) == 0 || out.count(Assignment::Dev) == 0) {
    throw Error(ErrorKind::DegeneratePartition, "dev carving left train or dev empty");
  }
  return out;
}

bool AuditReport::clean() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const AuditCheck& c) { return !c.required || c.passed; });
}

const AuditCheck* AuditReport::find(std::string_view name) const {
  for (const auto& c : checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

namespace {

std::string overlap_detail(const PersonSet& a, const PersonSet& b) {
  std::vector<PersonId> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  if (both.empty()) return "";
  std::string s = std::to_string(both.size()) + " shared person(s), e.g. " + both.front();
  return s;
}

std::optional<DayIndex> max_day(const SplitPlan& plan, Assignment a) {
  std::optional<DayIndex> m;
  for (auto i : plan.indices(a)) m = std::max(m.value_or(plan.keys[i].day), plan.keys[i].day);
  return m;
}

std::optional<DayIndex> min_day(const SplitPlan& plan, Assignment a) {
  std::optional<DayIndex> m;
  for (auto i : plan.indices(a)) m = std::min(m.value_or(plan.keys[i].day), plan.keys[i].day);
  return m;
}

bool is_person_regime(Regime r) {
  return r == Regime::CrossSectional || r == Regime::CrossSectionalAndProspective;
}

bool is_time_regime(Regime r) {
  return r == Regime::Prospective || r == Regime::CrossSectionalAndProspective;
}

}  // namespace

AuditReport audit_plan(const SplitPlan& plan) {
  AuditReport report;
  report.regime = plan.regime;

  {
    AuditCheck c{"partition", true, true, ""};
    if (plan.keys.size() != plan.labels.size()) {
      c.passed = false;
      c.detail = "keys and labels differ in length";
    } else {
      for (std::size_t i = 1; i < plan.keys.size(); ++i) {
        if (!(plan.keys[i - 1] < plan.keys[i])) {
          c.passed = false;
          c.detail = "instance (" + plan.keys[i].person + ", " + std::to_string(plan.keys[i].day) +
                     ") repeated or out of order";
          break;
        }
      }
    }
    report.checks.push_back(std::move(c));
  }

  const auto train_people = plan.people_with(Assignment::Train);
  const auto dev_people = plan.people_with(Assignment::Dev);
  const auto test_people = plan.people_with(Assignment::Test);
  const bool person_regime = is_person_regime(plan.regime);
  const bool time_regime = is_time_regime(plan.regime);

  {
    AuditCheck c{"person_disjoint", person_regime, true, ""};
    c.detail = overlap_detail(train_people, test_people);
    c.passed = c.detail.empty();
    report.checks.push_back(std::move(c));
  }
  {
    AuditCheck c{"dev_test_person_disjoint", person_regime, true, ""};
    c.detail = overlap_detail(dev_people, test_people);
    c.passed = c.detail.empty();
    report.checks.push_back(std::move(c));
  }

  if (plan.train_people || plan.test_people) {
    AuditCheck c{"declared_people", true, true, ""};
    for (const auto& p : train_people) {
      if (plan.train_people && !plan.train_people->contains(p)) {
        c.passed = false;
        c.detail = "train instance from undeclared person " + p;
      }
    }
    for (const auto& p : test_people) {
      if (plan.test_people && !plan.test_people->contains(p)) {
        c.passed = false;
        c.detail = "test instance from undeclared person " + p;
      }
    }
    report.checks.push_back(std::move(c));
  }

  {
    AuditCheck c{"temporal_precedence", time_regime, true, ""};
    auto fit_max = max_day(plan, Assignment::Train);
    if (const auto dev_max = max_day(plan, Assignment::Dev)) {
      fit_max = std::max(fit_max.value_or(*dev_max), *dev_max);
    }
    const auto test_min = min_day(plan, Assignment::Test);
    if (plan.cutoff) {
      if (fit_max && *fit_max > *plan.cutoff) {
        c.passed = false;
        c.detail = "training day " + std::to_string(*fit_max) + " after cutoff";
      }
      if (test_min && *test_min <= *plan.cutoff) {
        c.passed = false;
        c.detail = "test day " + std::to_string(*test_min) + " at or before cutoff";
      }
    } else if (time_regime) {
      c.passed = false;
      c.detail = "temporal regime without a cutoff";
    } else if (fit_max && test_min && !(*fit_max < *test_min)) {
      c.passed = false;
      c.detail = "training days overlap test days";
    }
    report.checks.push_back(std::move(c));
  }

  if (plan.count(Assignment::Dev) > 0) {
    const Regime dev_logic = plan.dev_regime.value_or(plan.regime);
    {
      AuditCheck c{"dev_person_disjoint", is_person_regime(dev_logic), true, ""};
      c.detail = overlap_detail(train_people, dev_people);
      c.passed = c.detail.empty();
      report.checks.push_back(std::move(c));
    }
    {
      AuditCheck c{"dev_precedence", is_time_regime(dev_logic), true, ""};
      const auto train_max = max_day(plan, Assignment::Train);
      const auto dev_min = min_day(plan, Assignment::Dev);
      const auto dev_max = max_day(plan, Assignment::Dev);
      if (train_max && dev_min && !(*train_max < *dev_min)) {
        c.passed = false;
        c.detail = "train day " + std::to_string(*train_max) + " not before dev day " +
                   std::to_string(*dev_min);
      }
      if (plan.cutoff && dev_max && *dev_max > *plan.cutoff) {
        c.passed = false;
        c.detail = "dev day after cutoff";
      }
      report.checks.push_back(std::move(c));
    }
  }
  return report;
}

void require_clean(const SplitPlan& plan) {
  const auto report = audit_plan(plan);
  if (report.clean()) return;
  std::string msg = "leakage audit failed for " + std::string(to_string(plan.regime)) + " plan:";
  for (const auto& c : report.checks) {
    if (c.required && !c.passed) msg += " [" + c.name + ": " + c.detail + "]";
  }
  throw Error(ErrorKind::Leakage, msg);
}

std::string plan_to_csv(const SplitPlan& plan) {
  nlohmann::ordered_json header;
  header["regime"] = to_string(plan.regime);
  header["tau"] = plan.cutoff ? nlohmann::ordered_json(*plan.cutoff) : nlohmann::ordered_json();
  header["seed"] = plan.seed;
  header["dev_regime"] =
      plan.dev_regime ? nlohmann::ordered_json(to_string(*plan.dev_regime)) : nlohmann::ordered_json();
  header["train_people"] =
      plan.train_people ? nlohmann::ordered_json(*plan.train_people) : nlohmann::ordered_json();
  header["test_people"] =
      plan.test_people ? nlohmann::ordered_json(*plan.test_people) : nlohmann::ordered_json();

  std::string out = "# " + header.dump() + "\nperson_id,day,assignment\n";
  for (std::size_t i = 0; i < plan.keys.size(); ++i) {
    out += plan.keys[i].person + "," + std::to_string(plan.keys[i].day) + "," +
           std::string(to_string(plan.labels[i])) + "\n";
  }
  return out;
}

SplitPlan plan_from_csv(std::string_view text) {
  SplitPlan plan;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false, have_columns = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (csv::trim(line).empty()) continue;
    if (line.rfind("#", 0) == 0) {
      try {
        const auto h = nlohmann::json::parse(line.substr(1));
        plan.regime = parse_regime(h.at("regime").get<std::string>());
        if (!h.at("tau").is_null()) plan.cutoff = h.at("tau").get<DayIndex>();
        plan.seed = h.at("seed").get<std::uint64_t>();
        if (h.contains("dev_regime") && !h.at("dev_regime").is_null()) {
          plan.dev_regime = parse_regime(h.at("dev_regime").get<std::string>());
        }
        if (!h.at("train_people").is_null()) plan.train_people = h.at("train_people").get<PersonSet>();
        if (!h.at("test_people").is_null()) plan.test_people = h.at("test_people").get<PersonSet>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(ErrorKind::Parse, line_no, std::string("bad plan header: ") + e.what());
      }
      have_header = true;
      continue;
    }
    if (!have_columns) {
      if (line != "person_id,day,assignment") {
        throw ParseError(ErrorKind::Parse, line_no, "expected person_id,day,assignment");
      }
      have_columns = true;
      continue;
    }
    const auto f = csv::split_fields(line);
    if (f.size() != 3) throw ParseError(ErrorKind::Parse, line_no, "expected 3 fields");
    const auto day = csv::parse_int(f[1]);
    if (!day) throw ParseError(ErrorKind::Parse, line_no, "bad day");
    plan.keys.push_back({std::string(csv::trim(f[0])), static_cast<DayIndex>(*day)});
    try {
      plan.labels.push_back(parse_assignment(csv::trim(f[2])));
    } catch (const Error& e) {
      throw ParseError(ErrorKind::Parse, line_no, e.what());
    }
  }
  if (!have_header) throw ParseError(ErrorKind::Parse, 1, "missing '#' plan header");
  return plan;
}

}  // namespace longeval
