#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "longeval/config.hpp"
#include "longeval/metrics.hpp"
#include "longeval/models.hpp"
#include "longeval/splits.hpp"

namespace longeval {

struct CellKey {
  Regime regime = Regime::Traditional;
  ModelKind model = ModelKind::Ar;
  int hidden = 0;
  int history = 1;

  auto operator<=>(const CellKey&) const = default;
  std::string label() const;  // e.g. "prospective/AR/d128/h3"
};

enum class CellStatus { Ok, Failed, Skipped };
std::string_view to_string(CellStatus status);
CellStatus parse_cell_status(std::string_view text);

struct CellResult {
  CellKey key;
  CellStatus status = CellStatus::Ok;
  std::string error_kind;  // for Failed and Skipped
  std::string error;
  std::size_t n_train = 0;  // instances the final model was fit on
  std::size_t n_dev = 0;
  std::size_t n_test = 0;
  double mae = 0.0;
  double baseline_mae = 0.0;
  std::optional<TTestResult> ttest;
  std::string ttest_note;
  ScopedMetricReport report;
  std::optional<SelectionTrace> trace;
  std::string model_hash;  // FNV-1a of the serialized model
  double seconds = 0.0;    // wall time; reported separately from results
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<CellResult> cells;  // sorted by key
  std::map<std::string, SplitPlan> plans;  // file stem -> plan
  std::vector<std::string> log;

  const CellResult* find(const CellKey& key) const;
};

// Builds the panel the config describes: synthetic generation or CSV load,
// then coverage filter, cohort selection, and LOCF as configured.
Panel prepare_panel(const ExperimentConfig& config);

ExperimentResult run(const ExperimentConfig& config);

// Same as run() but starting from an already prepared panel.
ExperimentResult run_on_panel(const ExperimentConfig& config, const Panel& panel);

// The audited plans run() would use, keyed by file stem: the regime name,
// with an "_h<h>" suffix when histories are not aligned.
std::map<std::string, SplitPlan> make_plans(const ExperimentConfig& config, const Panel& panel);

std::uint64_t fnv1a(std::string_view bytes);

// Every result file except timings.csv is a pure function of (config, seeds).
void write_result(const ExperimentResult& result, const std::filesystem::path& dir);
ExperimentResult read_result(const std::filesystem::path& dir);

// Plot-ready tables; see the README for the column layouts.
std::string table2_csv(const ExperimentResult& result);
std::string fig2b_csv(const ExperimentResult& result);
std::string fig3_csv(const ExperimentResult& result);
std::string fig4_csv(const ExperimentResult& result);
std::string fig5_csv(const ExperimentResult& result);
std::string cells_csv(const ExperimentResult& result);
std::string report_markdown(const ExperimentResult& result);

// Writes the csv tables and report.md into dir.
void emit_report(const ExperimentResult& result, const std::filesystem::path& dir);

}  // namespace longeval
