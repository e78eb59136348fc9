#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "longeval/metrics.hpp"
#include "longeval/panel.hpp"
#include "longeval/splits.hpp"
#include "longeval/synthetic.hpp"
#include "longeval/transformer.hpp"

namespace longeval {

enum class ModelKind { Ar, Boe, Transformer };

std::string_view to_string(ModelKind kind);        // "ar", "boe", "transformer"
std::string_view display_name(ModelKind kind);     // "AR", "BoE", "Transformer"
ModelKind parse_model_kind(std::string_view text);

// Where dev data comes from inside each regime's training region.
enum class DevSplit { Matched, Document };

// kShared trains one model on the combined training region (train people,
// days <= tau) and scores it under every requested regime.
enum class RunMode { PerRegime, Shared };

struct CohortSelection {
  StratificationSpec strata;
  CohortFilter filter;
};

struct DataConfig {
  std::optional<CohortSpec> synthetic;
  std::optional<std::filesystem::path> panel_csv;
  PanelSchema schema;  // for panel_csv
  TaskMode task = TaskMode::Nowcast;
  std::optional<double> min_coverage;
  std::optional<CohortSelection> cohort;
  bool impute = true;
};

struct SplitConfig {
  std::vector<Regime> regimes{Regime::Traditional, Regime::CrossSectional, Regime::Prospective};
  double test_fraction = 0.3;
  CrossSectionalOptions cross{0.3, true, 5};
  DayIndex tau = 63;
  double dev_fraction = 0.2;
  DevSplit dev_split = DevSplit::Matched;
  bool match_sizes = true;
  // Restrict every history length to the anchors available at the longest
  // one, so a sweep over h scores the same test instances.
  bool align_history = true;
};

struct ModelConfig {
  std::vector<ModelKind> kinds{ModelKind::Ar};
  std::vector<double> lambda_grid;  // empty means the default grid
  TransformerConfig transformer;
};

struct SeedConfig {
  std::uint64_t base = 0;
  // Unset entries derive from base under their own name.
  std::optional<std::uint64_t> synthetic;
  std::optional<std::uint64_t> cohort;
  std::optional<std::uint64_t> splits;
  std::optional<std::uint64_t> models;

  std::uint64_t resolve(const std::optional<std::uint64_t>& field, std::string_view name) const;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DataConfig data;
  SplitConfig splits;
  std::vector<int> hidden_sizes{0};  // 0 keeps the raw features
  std::vector<int> history_lengths{1};
  ModelConfig models;
  std::vector<MetricKind> metrics{MetricKind::Mae, MetricKind::Smape, MetricKind::PearsonR};
  RunMode mode = RunMode::PerRegime;
  int jobs = 1;
  std::filesystem::path output_dir = "out";
  SeedConfig seeds;

  void validate() const;
};

// Relative paths inside the document resolve against base_dir.
ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& config);

CohortSpec parse_cohort_spec(std::string_view json_text);

}  // namespace longeval
