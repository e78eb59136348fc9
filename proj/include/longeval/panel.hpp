#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace longeval {

using PersonId = std::string;
using DayIndex = int;

struct PanelSchema {
  int study_length = 90;
  int feature_dim = 1;
  double outcome_min = 1.0;
  double outcome_max = 5.0;

  void validate() const;
  bool operator==(const PanelSchema&) const = default;
};

struct Observation {
  std::optional<std::vector<double>> features;
  std::optional<double> outcome;
  // Features were carried forward from an earlier day.
  bool imputed = false;

  bool operator==(const Observation&) const = default;
};

struct DayRecord {
  DayIndex day = 0;
  Observation obs;

  bool operator==(const DayRecord&) const = default;
};

using PersonRows = std::map<PersonId, std::vector<DayRecord>>;

// Person-indexed, day-ordered observations. Immutable once built; every
// operation below returns a new Panel.
class Panel {
 public:
  // Sorts each person's records by day and enforces the panel invariants
  // (unique days, in-range days and outcomes, uniform feature dimension).
  Panel(PanelSchema schema, PersonRows rows);

  const PanelSchema& schema() const noexcept { return schema_; }
  const PersonRows& persons() const noexcept { return rows_; }

  std::size_t person_count() const noexcept { return rows_.size(); }
  std::size_t observation_count() const noexcept;
  std::vector<PersonId> person_ids() const;

  const std::vector<DayRecord>& records(const PersonId& person) const;
  const Observation* find(const PersonId& person, DayIndex day) const;

  bool operator==(const Panel&) const = default;

 private:
  PanelSchema schema_;
  PersonRows rows_;
};

// Reads `person_id,day,outcome,f0,...,f{D-1}`. An empty outcome field means
// the outcome is missing; an all-empty (or absent) feature block means the
// features are missing. Errors carry the 1-based line number.
Panel load_panel(const std::filesystem::path& path, const PanelSchema& schema);
Panel parse_panel_csv(std::string_view text, const PanelSchema& schema);

std::string panel_to_csv(const Panel& panel);
void save_panel(const Panel& panel, const std::filesystem::path& path);

struct CoverageResult {
  Panel panel;
  std::size_t dropped = 0;
  // Set when no person survives; not an error.
  bool empty = false;
};

// Keeps persons with at least min_fraction * study_length observed outcomes.
CoverageResult filter_coverage(const Panel& panel, double min_fraction);

// Last observation carried forward, features only. Days between a person's
// first feature observation and last record are filled; outcomes untouched.
Panel impute_locf(const Panel& panel);

enum class TaskMode { Nowcast, ForecastOneAhead };

struct InstanceKey {
  PersonId person;
  DayIndex day = 0;

  auto operator<=>(const InstanceKey&) const = default;
};

struct Instance {
  PersonId person;
  DayIndex anchor_day = 0;
  DayIndex target_day = 0;
  double target = 0.0;
  // Row indices into HistoryDataset::day_features, oldest day first.
  std::vector<std::size_t> history;

  InstanceKey key() const { return {person, anchor_day}; }
};

// Supervised instances with their per-day feature histories. Each distinct
// (person, day) feature vector is stored once in day_features.
struct HistoryDataset {
  TaskMode mode = TaskMode::Nowcast;
  int history_len = 1;
  int study_length = 0;
  Eigen::MatrixXd day_features;      // one row per (person, day)
  std::vector<InstanceKey> row_keys;  // aligned with day_features rows
  std::vector<Instance> instances;    // sorted by (person, anchor_day)

  std::size_t size() const noexcept { return instances.size(); }
  int feature_dim() const noexcept { return static_cast<int>(day_features.cols()); }
  std::vector<PersonId> persons() const;

  // h x D block of one instance's history, oldest first.
  Eigen::MatrixXd history_matrix(std::size_t index) const;

  // Same instances over a replacement feature table with the same row count,
  // e.g. the table after dimensionality reduction.
  HistoryDataset with_features(Eigen::MatrixXd features) const;
};

HistoryDataset build_instances(const Panel& panel, TaskMode mode, int history_len);

std::string_view to_string(TaskMode mode);
TaskMode parse_task_mode(std::string_view text);

}  // namespace longeval
