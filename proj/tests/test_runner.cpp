#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "longeval/csv.hpp"
#include "longeval/runner.hpp"
#include "longeval/synthetic.hpp"
#include "oracles.hpp"
#include "test_helpers.hpp"

using namespace longeval;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.name = "unit";
  CohortSpec spec;
  spec.n_people = 20;
  spec.study_length = 40;
  spec.feature_dim = 6;
  c.data.synthetic = spec;
  c.splits.tau = 28;
  c.seeds.base = 11;
  return c;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("longeval_runner_" + name);
  fs::remove_all(dir);
  return dir;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(fields);
  }
  return rows;
}

}  // namespace

TEST(Runner, SingleCellConfigGivesOneReport) {
  auto c = small_config();
  c.splits.regimes = {Regime::CrossSectional};
  const auto r = run(c);
  ASSERT_EQ(r.cells.size(), 1u);
  const auto& cell = r.cells.front();
  EXPECT_EQ(cell.status, CellStatus::Ok) << cell.error;
  EXPECT_EQ(cell.report.cells.size(), 9u);
  EXPECT_TRUE(cell.trace.has_value());
  EXPECT_EQ(r.plans.size(), 1u);
}

// Rebuilds each regime's Table-2 row from the persisted plans with the
// extended-precision ridge and t-test oracles.
TEST(Runner, Table2MatchesManualComposition) {
  auto c = small_config();
  const auto r = run(c);
  ASSERT_EQ(r.cells.size(), 3u);

  CohortSpec spec = *c.data.synthetic;
  spec.seed = c.seeds.resolve(c.seeds.synthetic, "synthetic");
  const auto data = build_instances(impute_locf(generate(spec).panel), TaskMode::Nowcast, 1);

  auto rows_of = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (auto i : idx) {
      const auto r = static_cast<Eigen::Index>(data.instances[i].history.back());
      std::vector<double> x;
      for (Eigen::Index k = 0; k < data.day_features.cols(); ++k) x.push_back(data.day_features(r, k));
      X.push_back(std::move(x));
      y.push_back(data.instances[i].target);
    }
    return std::pair{X, y};
  };
  auto predict = [](const oracle::RidgeSolution& m, const std::vector<double>& x) {
    double p = m.bias;
    for (std::size_t k = 0; k < x.size(); ++k) p += m.weights[k] * x[k];
    return p;
  };

  for (auto regime : c.splits.regimes) {
    const auto& plan = r.plans.at(std::string(to_string(regime)));
    const auto [Xtr, ytr] = rows_of(plan.indices(Assignment::Train));
    const auto [Xdv, ydv] = rows_of(plan.indices(Assignment::Dev));
    const auto [Xte, yte] = rows_of(plan.indices(Assignment::Test));

    double best = 0.0, best_mae = INFINITY;
    for (double lambda : {1e-2, 1e-1, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5}) {
      const auto m = oracle::ridge(Xtr, ytr, lambda);
      double s = 0.0;
      for (std::size_t i = 0; i < Xdv.size(); ++i) s += std::fabs(predict(m, Xdv[i]) - ydv[i]);
      s /= static_cast<double>(Xdv.size());
      if (s <= best_mae + 1e-12) best_mae = s, best = lambda;
    }
    auto Xall = Xtr;
    auto yall = ytr;
    Xall.insert(Xall.end(), Xdv.begin(), Xdv.end());
    yall.insert(yall.end(), ydv.begin(), ydv.end());
    const auto m = oracle::ridge(Xall, yall, best);
    double base = 0.0;
    for (double y : yall) base += y;
    base /= static_cast<double>(yall.size());

    std::vector<double> em, eb;
    for (std::size_t i = 0; i < Xte.size(); ++i) {
      em.push_back(std::fabs(predict(m, Xte[i]) - yte[i]));
      eb.push_back(std::fabs(base - yte[i]));
    }
    double mae_m = 0.0, mae_b = 0.0;
    for (std::size_t i = 0; i < em.size(); ++i) mae_m += em[i], mae_b += eb[i];
    mae_m /= static_cast<double>(em.size());
    mae_b /= static_cast<double>(eb.size());
    const auto [t, p] = oracle::paired_t(em, eb);

    const auto* cell = r.find({regime, ModelKind::Ar, 0, 1});
    ASSERT_NE(cell, nullptr);
    ASSERT_EQ(cell->status, CellStatus::Ok) << cell->error;
    EXPECT_DOUBLE_EQ(cell->trace->chosen, best) << to_string(regime);
    EXPECT_NEAR(cell->mae, mae_m, 1e-9) << to_string(regime);
    EXPECT_NEAR(cell->baseline_mae, mae_b, 1e-12) << to_string(regime);
    ASSERT_TRUE(cell->ttest.has_value());
    EXPECT_NEAR(cell->ttest->t_stat, t, 1e-6);
    EXPECT_NEAR(cell->ttest->p_value, p, 1e-6);
    EXPECT_EQ(cell->n_test, yte.size());
    EXPECT_EQ(cell->n_train + cell->n_dev, yall.size());
  }
}

TEST(Runner, RerunIsByteIdentical) {
  auto c = small_config();
  c.models.kinds = {ModelKind::Ar, ModelKind::Boe};
  c.history_lengths = {1, 2};
  c.hidden_sizes = {0, 3};
  const auto a = scratch("det_a"), b = scratch("det_b");
  write_result(run(c), a);
  c.jobs = 3;
  write_result(run(c), b);
  std::size_t compared = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file() || entry.path().filename() == "timings.csv") continue;
    const auto rel = fs::relative(entry.path(), a);
    ASSERT_TRUE(fs::exists(b / rel)) << rel;
    EXPECT_EQ(csv::read_file(entry.path()), csv::read_file(b / rel)) << rel;
    ++compared;
  }
  EXPECT_GE(compared, 10u);
}

TEST(Runner, FullGridAccountingWithSkips) {
  auto c = small_config();
  c.splits.regimes = {Regime::Traditional, Regime::Prospective};
  c.models.kinds = {ModelKind::Ar, ModelKind::Boe};
  c.hidden_sizes = {0, 4, 50};
  c.history_lengths = {1, 3};
  const auto r = run(c);
  ASSERT_EQ(r.cells.size(), 2u * 2u * 3u * 2u);
  std::set<CellKey> keys;
  for (const auto& cell : r.cells) {
    keys.insert(cell.key);
    if (cell.key.hidden == 50) {
      EXPECT_EQ(cell.status, CellStatus::Skipped);
      EXPECT_FALSE(cell.error.empty());
    } else {
      EXPECT_EQ(cell.status, CellStatus::Ok) << cell.key.label() << ": " << cell.error;
    }
  }
  EXPECT_EQ(keys.size(), r.cells.size());
  std::size_t skip_lines = 0;
  for (const auto& line : r.log) skip_lines += line.find("skipped") != std::string::npos;
  EXPECT_EQ(skip_lines, 8u);
  EXPECT_TRUE(std::is_sorted(r.cells.begin(), r.cells.end(),
                             [](const CellResult& x, const CellResult& y) { return x.key < y.key; }));
}

TEST(Runner, AlignedHistoriesScoreTheSameTestInstances) {
  auto c = small_config();
  c.splits.regimes = {Regime::CrossSectional};
  c.history_lengths = {1, 4};
  const auto r = run(c);
  ASSERT_EQ(r.cells.size(), 2u);
  EXPECT_EQ(r.cells[0].n_test, r.cells[1].n_test);
  EXPECT_EQ(r.plans.size(), 1u);

  c.splits.align_history = false;
  const auto u = run(c);
  EXPECT_EQ(u.plans.size(), 2u);
  EXPECT_TRUE(u.plans.contains("cross_sectional_h4"));
}

TEST(Runner, CountsMatchPlans) {
  const auto r = run(small_config());
  for (const auto& cell : r.cells) {
    const auto& plan = r.plans.at(std::string(to_string(cell.key.regime)));
    EXPECT_EQ(cell.n_train, plan.count(Assignment::Train));
    EXPECT_EQ(cell.n_dev, plan.count(Assignment::Dev));
    EXPECT_EQ(cell.n_test, plan.count(Assignment::Test));
    EXPECT_TRUE(audit_plan(plan).clean());
  }
}

TEST(Runner, SharedModeTrainsOneModel) {
  auto c = small_config();
  c.mode = RunMode::Shared;
  c.splits.regimes = {Regime::CrossSectional, Regime::Prospective, Regime::CrossSectionalAndProspective};
  c.models.kinds = {ModelKind::Ar, ModelKind::Boe};
  const auto r = run(c);
  ASSERT_EQ(r.cells.size(), 6u);
  for (auto kind : c.models.kinds) {
    std::set<std::string> hashes;
    std::set<std::size_t> trains;
    for (const auto& cell : r.cells) {
      if (cell.key.model != kind) continue;
      ASSERT_EQ(cell.status, CellStatus::Ok) << cell.error;
      hashes.insert(cell.model_hash);
      trains.insert(cell.n_train);
    }
    EXPECT_EQ(hashes.size(), 1u);
    EXPECT_EQ(trains.size(), 1u);
  }
  // Unseen people versus seen people's future; the joint test set is the
  // late part of the unseen people.
  const auto& cs = r.plans.at("cross_sectional");
  const auto& pr = r.plans.at("prospective");
  const auto& csp = r.plans.at("cross_and_prospective");
  for (std::size_t i = 0; i < cs.keys.size(); ++i) {
    EXPECT_FALSE(cs.labels[i] == Assignment::Test && pr.labels[i] == Assignment::Test);
    if (csp.labels[i] == Assignment::Test) EXPECT_EQ(cs.labels[i], Assignment::Test);
    EXPECT_EQ(cs.labels[i] == Assignment::Train, csp.labels[i] == Assignment::Train);
    EXPECT_EQ(pr.labels[i] == Assignment::Dev, csp.labels[i] == Assignment::Dev);
  }
}

TEST(Runner, TransformerCellRuns) {
  auto c = small_config();
  c.splits.regimes = {Regime::Prospective};
  c.models.kinds = {ModelKind::Transformer};
  c.history_lengths = {3};
  c.models.transformer.max_epochs = 4;
  c.models.transformer.model_dim = 8;
  c.models.transformer.ffn_dim = 8;
  const auto r = run(c);
  ASSERT_EQ(r.cells.size(), 1u);
  const auto& cell = r.cells.front();
  ASSERT_EQ(cell.status, CellStatus::Ok) << cell.error;
  EXPECT_EQ(cell.trace->grid.size(), 4u);
  EXPECT_GE(cell.trace->chosen, 1.0);
  EXPECT_TRUE(std::isfinite(cell.mae));
}

TEST(Report, Table2HasOneRowPerRegimeAndModel) {
  auto c = small_config();
  c.models.kinds = {ModelKind::Ar, ModelKind::Boe};
  const auto rows = csv_rows(table2_csv(run(c)));
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0].front(), "regime");
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i].size(), rows[0].size());
}

TEST(Report, Fig5Schema) {
  auto c = small_config();
  c.models.kinds = {ModelKind::Ar, ModelKind::Boe};
  c.history_lengths = {1, 2};
  const auto r = run(c);
  const auto rows = csv_rows(fig5_csv(r));
  EXPECT_EQ(rows[0], (std::vector<std::string>{"regime", "model", "h", "scope", "MAE", "SE"}));
  // 3 regimes x 2 models x 2 h x 3 scopes
  EXPECT_EQ(rows.size(), 1u + 36u);
  std::set<std::string> models;
  for (std::size_t i = 1; i < rows.size(); ++i) models.insert(rows[i][1]);
  EXPECT_EQ(models, (std::set<std::string>{"AR", "BoE"}));
}

TEST(Report, MarkdownRendersTheCsvNumbers) {
  const auto r = run(small_config());
  const auto md = report_markdown(r);
  const auto rows = csv_rows(table2_csv(r));
  for (const auto& row : rows) {
    std::string line = "|";
    for (const auto& f : row) line += " " + f + " |";
    EXPECT_NE(md.find(line), std::string::npos) << line;
  }
  for (const auto& row : csv_rows(fig2b_csv(r))) {
    std::string line = "|";
    for (const auto& f : row) line += " " + f + " |";
    EXPECT_NE(md.find(line), std::string::npos) << line;
  }
}

TEST(Report, ResultRoundTrip) {
  auto c = small_config();
  c.models.kinds = {ModelKind::Ar, ModelKind::Boe};
  const auto r = run(c);
  const auto dir = scratch("roundtrip");
  write_result(r, dir);
  const auto back = read_result(dir);
  EXPECT_EQ(table2_csv(back), table2_csv(r));
  EXPECT_EQ(fig2b_csv(back), fig2b_csv(r));
  EXPECT_EQ(cells_csv(back), cells_csv(r));
  ASSERT_EQ(back.plans.size(), r.plans.size());
  for (const auto& [stem, plan] : r.plans) EXPECT_EQ(plan_to_csv(back.plans.at(stem)), plan_to_csv(plan));
  EXPECT_EQ(config_to_json(back.config), config_to_json([&] {
              auto x = r.config;
              x.jobs = 1;
              x.output_dir = "out";
              return x;
            }()));
}

TEST(Report, FilesWritten) {
  const auto dir = scratch("files");
  write_result(run(small_config()), dir);
  for (const char* f : {"result.json", "table2.csv", "fig2b.csv", "fig3.csv", "fig4.csv", "fig5.csv", "cells.csv",
                        "report.md", "timings.csv", "plans/traditional.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
}

TEST(Config, ParsesAndEchoes) {
  const auto c = parse_config(R"({
    "name": "demo", "seed": 5,
    "data": {"synthetic": {"n_people": 12, "study_length": 30, "feature_dim": 4}, "task": "forecast"},
    "splits": {"regimes": ["cross_sectional", "prospective"], "tau": 20, "dev_split": "document"},
    "hidden_sizes": [0, 2], "history_lengths": [1, 3],
    "models": {"kinds": ["ar", "BoE"], "transformer": {"max_epochs": 7}},
    "mode": "per_regime"
  })");
  EXPECT_EQ(c.name, "demo");
  EXPECT_EQ(c.data.task, TaskMode::ForecastOneAhead);
  EXPECT_EQ(c.splits.regimes.size(), 2u);
  EXPECT_EQ(c.splits.dev_split, DevSplit::Document);
  EXPECT_EQ(c.models.kinds[1], ModelKind::Boe);
  EXPECT_EQ(c.models.transformer.max_epochs, 7);
  const auto again = parse_config(config_to_json(c));
  EXPECT_EQ(config_to_json(again), config_to_json(c));
}

TEST(Config, NamedSeedsDeriveFromBase) {
  SeedConfig s;
  s.base = 3;
  EXPECT_EQ(s.resolve(std::nullopt, "splits"), derive_seed(3, "splits"));
  EXPECT_NE(s.resolve(std::nullopt, "splits"), s.resolve(std::nullopt, "models"));
  EXPECT_EQ(s.resolve(42u, "splits"), 42u);
}

TEST(Config, RejectsBadDocuments) {
  using testing_util::kind_of;
  const std::string data = R"("data": {"synthetic": {"study_length": 30}})";
  auto bad = [&](const std::string& body) {
    return kind_of([&] { parse_config("{" + data + (body.empty() ? "" : ", " + body) + "}"); });
  };
  EXPECT_EQ(bad(R"("splits": {"tau": 30})"), ErrorKind::Config);
  EXPECT_EQ(bad(R"("splits": {"taus": 3})"), ErrorKind::Config);
  EXPECT_EQ(bad(R"("hidden_sizes": [])"), ErrorKind::Config);
  EXPECT_EQ(bad(R"("history_lengths": [0])"), ErrorKind::Config);
  EXPECT_EQ(bad(R"("models": {"kinds": ["lstm"]})"), ErrorKind::Config);
  EXPECT_EQ(bad(R"("mode": "shared")"), ErrorKind::Config);  // default regimes include traditional
  EXPECT_EQ(bad(R"("jobs": 0)"), ErrorKind::Config);
  EXPECT_EQ(bad(R"("models": {"lambda_grid": [1, -1]})"), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_config("{not json"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_config(R"({"data": {"panel": "/nonexistent/panel.csv"}})"); }), ErrorKind::Config);
  EXPECT_EQ(kind_of([] { parse_config(R"({"splits": {}})"); }), ErrorKind::Config);
}
