#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "longeval/config.hpp"
#include "longeval/csv.hpp"
#include "longeval/error.hpp"
#include "longeval/runner.hpp"
#include "longeval/synthetic.hpp"

using namespace longeval;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int jobs = 0;
  std::string plan;
  std::string result;
};

ExperimentConfig load(const Options& o) {
  auto c = load_config(o.config);
  if (o.seed) c.seeds.base = *o.seed;
  if (o.jobs > 0) c.jobs = o.jobs;
  if (!o.out.empty()) c.output_dir = o.out;
  c.validate();
  return c;
}

// Accepts a whole experiment config or just its synthetic block.
CohortSpec load_cohort(const Options& o) {
  const auto text = csv::read_file(o.config);
  const auto j = json::parse(text, nullptr, false);
  CohortSpec spec;
  if (!j.is_discarded() && j.is_object() && j.contains("data")) {
    const auto c = load_config(o.config);
    if (!c.data.synthetic) throw Error(ErrorKind::Config, "config has no synthetic data block");
    spec = *c.data.synthetic;
    spec.seed = c.seeds.resolve(c.seeds.synthetic, "synthetic");
    if (o.seed) spec.seed = c.seeds.synthetic ? *c.seeds.synthetic : derive_seed(*o.seed, "synthetic");
  } else {
    spec = parse_cohort_spec(text);
    if (o.seed) spec.seed = *o.seed;
  }
  return spec;
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

int cmd_generate(const Options& o) {
  const auto spec = load_cohort(o);
  const fs::path dir = o.out.empty() ? fs::path("out") : fs::path(o.out);
  const auto cohort = generate(spec);
  save_panel(cohort.panel, dir / "panel.csv");
  csv::write_file(dir / "truth.csv", truth_to_csv(cohort.truth));
  print({{"panel", (dir / "panel.csv").string()},
         {"persons", cohort.panel.persons().size()},
         {"seed", spec.seed}});
  return 0;
}

int cmd_split(const Options& o) {
  const auto config = load(o);
  const auto plans = make_plans(config, prepare_panel(config));
  json summary = json::array();
  for (const auto& [stem, plan] : plans) {
    const auto path = config.output_dir / "plans" / (stem + ".csv");
    csv::write_file(path, plan_to_csv(plan));
    summary.push_back({{"plan", path.string()},
                       {"train", plan.count(Assignment::Train)},
                       {"dev", plan.count(Assignment::Dev)},
                       {"test", plan.count(Assignment::Test)}});
  }
  print(summary);
  return 0;
}

int cmd_run(const Options& o) {
  const auto config = load(o);
  const auto result = run(config);
  write_result(result, config.output_dir);
  std::size_t ok = 0, failed = 0, skipped = 0;
  for (const auto& c : result.cells) {
    ok += c.status == CellStatus::Ok;
    failed += c.status == CellStatus::Failed;
    skipped += c.status == CellStatus::Skipped;
  }
  print({{"output_dir", config.output_dir.string()}, {"cells", result.cells.size()}, {"ok", ok},
         {"failed", failed}, {"skipped", skipped}});
  return failed == 0 ? 0 : 3;
}

int cmd_report(const Options& o) {
  const fs::path from = !o.result.empty() ? fs::path(o.result) : fs::path(o.out);
  if (from.empty()) throw Error(ErrorKind::Config, "report needs --result or --out");
  const fs::path to = o.out.empty() ? from : fs::path(o.out);
  emit_report(read_result(from), to);
  print({{"result", from.string()}, {"output_dir", to.string()}});
  return 0;
}

int cmd_audit(const Options& o) {
  const auto report = audit_plan(plan_from_csv(csv::read_file(o.plan)));
  json checks = json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name}, {"required", c.required}, {"passed", c.passed}, {"detail", c.detail}});
  }
  print({{"plan", o.plan}, {"regime", to_string(report.regime)}, {"clean", report.clean()}, {"checks", checks}});
  return report.clean() ? 0 : 4;
}

void error_summary(std::string_view kind, std::string_view message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Longitudinal evaluation toolkit"};
  app.require_subcommand(1);
  Options o;

  auto with_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "replace the base seed");
    sub->add_option("--out", o.out, "output directory");
  };
  auto* generate_cmd = app.add_subcommand("generate", "write a synthetic panel and its ground truth");
  with_config(generate_cmd);
  auto* split_cmd = app.add_subcommand("split", "write the audited split plans");
  with_config(split_cmd);
  auto* run_cmd = app.add_subcommand("run", "run the full experiment grid");
  with_config(run_cmd);
  run_cmd->add_option("--jobs", o.jobs, "concurrent cells")->check(CLI::PositiveNumber);
  auto* report_cmd = app.add_subcommand("report", "re-render tables from a persisted result");
  report_cmd->add_option("--result", o.result, "result directory");
  report_cmd->add_option("--out", o.out, "where to write the tables (default: the result directory)");
  auto* audit_cmd = app.add_subcommand("audit", "leakage check on a plan");
  audit_cmd->add_option("--plan", o.plan, "plan CSV")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_summary("usage", e.what());
    return 2;
  }

  try {
    if (*generate_cmd) return cmd_generate(o);
    if (*split_cmd) return cmd_split(o);
    if (*run_cmd) return cmd_run(o);
    if (*report_cmd) return cmd_report(o);
    if (*audit_cmd) return cmd_audit(o);
  } catch (const Error& e) {
    error_summary(to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    error_summary("internal", e.what());
    return 1;
  }
  return 1;
}
