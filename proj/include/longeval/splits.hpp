#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "longeval/panel.hpp"

namespace longeval {

enum class Regime { Traditional, CrossSectional, Prospective, CrossSectionalAndProspective };

enum class Assignment { Train, Dev, Test, Unused };

std::string_view to_string(Regime regime);
std::string_view to_string(Assignment assignment);
Regime parse_regime(std::string_view text);
Assignment parse_assignment(std::string_view text);

using PersonSet = std::set<PersonId>;

// Per-instance assignment under one regime. keys/labels are aligned and
// sorted by key; keys follow the instance order of the source dataset.
struct SplitPlan {
  Regime regime = Regime::Traditional;
  std::vector<InstanceKey> keys;
  std::vector<Assignment> labels;
  std::optional<DayIndex> cutoff;
  std::optional<PersonSet> train_people;
  std::optional<PersonSet> test_people;
  // Regime logic used by carve_dev, when a dev split has been carved.
  std::optional<Regime> dev_regime;
  std::uint64_t seed = 0;

  std::size_t count(Assignment a) const;
  std::vector<std::size_t> indices(Assignment a) const;
  PersonSet people_with(Assignment a) const;
  std::optional<Assignment> lookup(const InstanceKey& key) const;

  // Empty train or empty test. Representable, but training refuses it.
  bool degenerate() const { return count(Assignment::Train) == 0 || count(Assignment::Test) == 0; }

  bool operator==(const SplitPlan&) const = default;
};

struct StratificationSpec {
  int n_bins = 10;
  int per_bin_sample = 2;
};

struct CohortFilter {
  double variation_floor = 0.01;
  // Outcome variation is also required separately on days < window_split
  // and days >= window_split (the first 60 / last 30 of a 90-day study).
  DayIndex window_split = 60;
};

// Variation filter, then mean-outcome strata, then uniform sampling per
// stratum. Ties in the mean are broken by person id.
PersonSet select_cohort(const Panel& panel, const StratificationSpec& spec,
                        const CohortFilter& filter, std::uint64_t seed);

SplitPlan split_traditional(const HistoryDataset& data, double test_fraction, std::uint64_t seed);

struct CrossSectionalOptions {
  double test_fraction_people = 0.2;
  bool stratify_by_mean = true;
  int strata = 5;
};

SplitPlan split_cross_sectional(const HistoryDataset& data, const CrossSectionalOptions& options,
                                std::uint64_t seed);

// Train: anchor_day <= cutoff. Test: anchor_day > cutoff.
SplitPlan split_prospective(const HistoryDataset& data, DayIndex cutoff);

// Train: train people at day <= cutoff. Test: test people at day > cutoff.
// Everything else is Unused.
SplitPlan split_cross_and_prospective(const HistoryDataset& data, const PersonSet& test_people,
                                      DayIndex cutoff);

// Chooses test people the way split_cross_sectional does, without building a
// plan. Used when several regimes must share one person partition.
PersonSet choose_test_people(const HistoryDataset& data, const CrossSectionalOptions& options,
                             std::uint64_t seed);

// Masks random Train/Test instances to Unused until every plan has the
// minimum train count and the minimum test count across the inputs.
std::vector<SplitPlan> mask_to_match(const std::vector<SplitPlan>& plans, std::uint64_t seed);

// Moves part of Train to Dev following the plan's own regime logic. `as`
// overrides the regime used for carving (e.g. a document-level dev split
// inside a cross-sectional plan); by default the plan's regime is used.
SplitPlan carve_dev(const SplitPlan& plan, double dev_fraction, std::uint64_t seed,
                    std::optional<Regime> as = std::nullopt);

struct AuditCheck {
  std::string name;
  bool required = false;  // required by the plan's regime
  bool passed = true;
  std::string detail;
};

struct AuditReport {
  Regime regime = Regime::Traditional;
  std::vector<AuditCheck> checks;

  // All required checks pass.
  bool clean() const;
  const AuditCheck* find(std::string_view name) const;
};

// Re-verifies partition, person-disjointness, temporal precedence, and dev
// placement. Checks that do not apply to the regime are still evaluated and
// reported with required = false.
AuditReport audit_plan(const SplitPlan& plan);

// Throws a Leakage error naming every failed required check.
void require_clean(const SplitPlan& plan);

std::string plan_to_csv(const SplitPlan& plan);
SplitPlan plan_from_csv(std::string_view text);

}  // namespace longeval
