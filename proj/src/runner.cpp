#include "longeval/runner.hpp"

#include <algorithm>
#include <exception>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "longeval/error.hpp"
#include "longeval/features.hpp"
#include "longeval/rng.hpp"
#include "longeval/synthetic.hpp"
#include "longeval/transformer.hpp"

namespace longeval {

std::string CellKey::label() const {
  return std::string(to_string(regime)) + "/" + std::string(display_name(model)) + "/d" + std::to_string(hidden) +
         "/h" + std::to_string(history);
}

std::string_view to_string(CellStatus status) {
  switch (status) {
    case CellStatus::Ok: return "ok";
    case CellStatus::Failed: return "failed";
    case CellStatus::Skipped: return "skipped";
  }
  return "unknown";
}

CellStatus parse_cell_status(std::string_view text) {
  for (auto s : {CellStatus::Ok, CellStatus::Failed, CellStatus::Skipped}) {
    if (text == to_string(s)) return s;
  }
  throw Error(ErrorKind::Parse, "unknown cell status '" + std::string(text) + "'");
}

const CellResult* ExperimentResult::find(const CellKey& key) const {
  const auto it = std::lower_bound(cells.begin(), cells.end(), key,
                                   [](const CellResult& c, const CellKey& k) { return c.key < k; });
  return it != cells.end() && it->key == key ? &*it : nullptr;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Panel prepare_panel(const ExperimentConfig& config) {
  Panel panel = [&] {
    if (!config.data.synthetic) return load_panel(*config.data.panel_csv, config.data.schema);
    CohortSpec spec = *config.data.synthetic;
    spec.seed = config.seeds.resolve(config.seeds.synthetic, "synthetic");
    return generate(spec).panel;
  }();
  if (config.data.min_coverage) {
    auto filtered = filter_coverage(panel, *config.data.min_coverage);
    if (filtered.empty) throw Error(ErrorKind::InsufficientCohort, "no person meets the coverage threshold");
    panel = std::move(filtered.panel);
  }
  if (config.data.cohort) {
    const auto keep = select_cohort(panel, config.data.cohort->strata, config.data.cohort->filter,
                                    config.seeds.resolve(config.seeds.cohort, "cohort"));
    PersonRows rows;
    for (const auto& id : keep) rows.emplace(id, panel.records(id));
    panel = Panel(panel.schema(), std::move(rows));
  }
  if (config.data.impute) panel = impute_locf(panel);
  return panel;
}

namespace {

using Clock = std::chrono::steady_clock;

HistoryDataset restrict_to(const HistoryDataset& data, const std::set<InstanceKey>& keep) {
  HistoryDataset out = data;
  out.instances.clear();
  for (const auto& inst : data.instances) {
    if (keep.contains(inst.key())) out.instances.push_back(inst);
  }
  return out;
}

std::vector<InstanceKey> keys_of(const HistoryDataset& data) {
  std::vector<InstanceKey> keys;
  keys.reserve(data.size());
  for (const auto& inst : data.instances) keys.push_back(inst.key());
  return keys;
}

// Plans for one instance universe, before dev carving.
std::vector<SplitPlan> regime_plans(const ExperimentConfig& config, const HistoryDataset& data,
                                    std::uint64_t split_seed) {
  const auto& s = config.splits;
  const std::uint64_t people_seed = derive_seed(split_seed, "people");
  std::optional<PersonSet> test_people;
  auto people = [&]() -> const PersonSet& {
    if (!test_people) test_people = choose_test_people(data, s.cross, people_seed);
    return *test_people;
  };
  std::vector<SplitPlan> plans;
  for (auto regime : s.regimes) {
    switch (regime) {
      case Regime::Traditional:
        plans.push_back(split_traditional(data, s.test_fraction, derive_seed(split_seed, "traditional")));
        break;
      case Regime::CrossSectional:
        plans.push_back(split_cross_sectional(data, s.cross, people_seed));
        break;
      case Regime::Prospective:
        plans.push_back(split_prospective(data, s.tau));
        break;
      case Regime::CrossSectionalAndProspective:
        plans.push_back(split_cross_and_prospective(data, people(), s.tau));
        break;
    }
  }
  if (s.match_sizes && plans.size() > 1) plans = mask_to_match(plans, derive_seed(split_seed, "mask"));
  for (std::size_t k = 0; k < plans.size(); ++k) {
    const std::optional<Regime> as =
        s.dev_split == DevSplit::Document ? std::optional(Regime::Traditional) : std::nullopt;
    plans[k] = carve_dev(plans[k], s.dev_fraction,
                         derive_seed(split_seed, "dev/" + std::string(to_string(plans[k].regime))), as);
    require_clean(plans[k]);
  }
  return plans;
}

// One training region (train people, days <= tau) scored three ways. The
// Train and Dev labels are identical across the returned plans.
std::vector<SplitPlan> shared_plans(const ExperimentConfig& config, const HistoryDataset& data,
                                    std::uint64_t split_seed) {
  const auto& s = config.splits;
  const PersonSet test = choose_test_people(data, s.cross, derive_seed(split_seed, "people"));
  SplitPlan region = split_cross_and_prospective(data, test, s.tau);
  const std::optional<Regime> as =
      s.dev_split == DevSplit::Document ? std::optional(Regime::Traditional) : std::nullopt;
  region = carve_dev(region, s.dev_fraction, derive_seed(split_seed, "dev/shared"), as);
  require_clean(region);

  std::vector<SplitPlan> plans;
  for (auto regime : s.regimes) {
    SplitPlan plan = region;
    plan.regime = regime;
    // Prospective scoring reads late days of the people the model trained on.
    if (regime == Regime::Prospective) plan.test_people = region.train_people;
    for (std::size_t i = 0; i < plan.keys.size(); ++i) {
      if (plan.labels[i] == Assignment::Train || plan.labels[i] == Assignment::Dev) continue;
      const bool test_person = test.contains(plan.keys[i].person);
      const bool late = plan.keys[i].day > s.tau;
      bool is_test = false;
      switch (regime) {
        case Regime::CrossSectional: is_test = test_person; break;
        case Regime::Prospective: is_test = !test_person && late; break;
        case Regime::CrossSectionalAndProspective: is_test = test_person && late; break;
        case Regime::Traditional: break;
      }
      plan.labels[i] = is_test ? Assignment::Test : Assignment::Unused;
    }
    require_clean(plan);
    plans.push_back(std::move(plan));
  }
  return plans;
}

struct Fitted {
  ModelKind kind = ModelKind::Ar;
  std::optional<RidgeModel> ridge;
  std::optional<MicroTransformer> transformer;
  SelectionTrace trace;
  std::string hash;

  double predict(const HistoryDataset& data, std::size_t index) const {
    const auto& inst = data.instances[index];
    if (ridge) {
      std::vector<Eigen::VectorXd> days;
      for (auto r : inst.history) days.emplace_back(data.day_features.row(static_cast<Eigen::Index>(r)).transpose());
      return ridge->predict(encode_history(days, ridge->encoding));
    }
    return transformer->predict(data.history_matrix(index));
  }
};

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Fitted fit_model(ModelKind kind, const HistoryDataset& data, const std::vector<std::size_t>& train,
                 const std::vector<std::size_t>& dev, Regime dev_regime, const ExperimentConfig& config,
                 std::uint64_t seed) {
  Fitted out;
  out.kind = kind;
  if (kind == ModelKind::Transformer) {
    auto sequences = [&](const std::vector<std::size_t>& idx, std::vector<Eigen::MatrixXd>& xs,
                         std::vector<double>& ys) {
      for (auto i : idx) {
        xs.push_back(data.history_matrix(i));
        ys.push_back(data.instances[i].target);
      }
    };
    std::vector<Eigen::MatrixXd> tx, dx;
    std::vector<double> ty, dy;
    sequences(train, tx, ty);
    sequences(dev, dx, dy);
    TransformerConfig tc = config.models.transformer;
    tc.window = data.history_len;
    auto fit = fit_transformer(tx, ty, dx, dy, tc, seed);
    for (std::size_t e = 0; e < fit.dev_mae.size(); ++e) {
      out.trace.grid.emplace_back(static_cast<double>(e + 1), fit.dev_mae[e]);
    }
    out.trace.chosen = fit.best_epoch;
    out.trace.dev_regime = dev_regime;
    out.trace.note = "early stopping on dev MAE: batch " + std::to_string(tc.batch_size) + ", max epochs " +
                     std::to_string(tc.max_epochs) + ", patience " + std::to_string(tc.patience) +
                     "; chosen is the best epoch";
    out.hash = hex(fnv1a(fit.model.to_text()));
    out.transformer = std::move(fit.model);
    return out;
  }
  const auto encoding = kind == ModelKind::Ar ? HistoryEncoding::Stacked : HistoryEncoding::Pooled;
  const auto grid = config.models.lambda_grid.empty() ? default_lambda_grid() : config.models.lambda_grid;
  auto sel = select_ridge(build_design(data, train, encoding), build_design(data, dev, encoding), grid, dev_regime,
                          encoding, data.history_len);
  out.trace = sel.trace;
  out.trace.note = "penalty chosen by dev MAE; refit on train + dev";
  out.hash = hex(fnv1a(ridge_to_text(sel.model)));
  out.ridge = std::move(sel.model);
  return out;
}

void score(CellResult& cell, const Fitted& model, double baseline, const HistoryDataset& data,
           const SplitPlan& plan, const ExperimentConfig& config) {
  const auto test = plan.indices(Assignment::Test);
  if (test.empty()) throw Error(ErrorKind::DegeneratePartition, "empty test set");
  PredictionSet preds;
  std::vector<double> model_err, base_err;
  for (auto i : test) {
    const auto& inst = data.instances[i];
    const double yhat = model.predict(data, i);
    preds.entries.push_back({inst.person, inst.anchor_day, inst.target, yhat});
    model_err.push_back(std::fabs(yhat - inst.target));
    base_err.push_back(std::fabs(baseline - inst.target));
  }
  cell.report = build_report(preds, config.metrics);
  cell.mae = std::accumulate(model_err.begin(), model_err.end(), 0.0) / static_cast<double>(model_err.size());
  cell.baseline_mae = std::accumulate(base_err.begin(), base_err.end(), 0.0) / static_cast<double>(base_err.size());
  try {
    cell.ttest = paired_one_sided_t(model_err, base_err);
  } catch (const Error& e) {
    cell.ttest_note = e.what();
  }
  cell.trace = model.trace;
  cell.model_hash = model.hash;
}

struct Unit {
  int history = 1;
  int hidden = 0;
  std::vector<std::size_t> plan_index;  // into the plans for this history length
};

struct Universe {
  HistoryDataset data;
  std::vector<SplitPlan> plans;  // aligned with config.splits.regimes
};

void record_failure(CellResult& cell, const Error& e) {
  cell.status = CellStatus::Failed;
  cell.error_kind = std::string(to_string(e.kind()));
  cell.error = e.what();
}

// Fits and scores every cell of one (history, hidden) pair.
std::vector<CellResult> run_unit(const ExperimentConfig& config, const Universe& universe, const Unit& unit,
                                 std::uint64_t model_seed, std::vector<std::string>& log) {
  std::vector<CellResult> cells;
  auto blank = [&](Regime regime, ModelKind kind) {
    CellResult c;
    c.key = {regime, kind, unit.hidden, unit.history};
    return c;
  };

  const int D = universe.data.feature_dim();
  if (unit.hidden > D) {
    for (auto p : unit.plan_index) {
      for (auto kind : config.models.kinds) {
        auto c = blank(universe.plans[p].regime, kind);
        c.status = CellStatus::Skipped;
        c.error_kind = "parameter";
        c.error = "hidden size " + std::to_string(unit.hidden) + " exceeds feature dimension " + std::to_string(D);
        log.push_back(c.key.label() + ": skipped, " + c.error);
        cells.push_back(std::move(c));
      }
    }
    return cells;
  }

  // Reduce with PCA fit on one plan's Train rows.
  auto reduce = [&](const SplitPlan& plan) {
    if (unit.hidden == 0) return universe.data;
    const auto pca = fit_pca_on_train(universe.data, plan, unit.hidden);
    return universe.data.with_features(transform_rows(pca, universe.data.day_features));
  };

  auto baseline_of = [&](const HistoryDataset& data, const std::vector<std::size_t>& fit_rows) {
    std::vector<double> ys;
    for (auto i : fit_rows) ys.push_back(data.instances[i].target);
    return fit_mean_baseline(ys).mean;
  };

  if (config.mode == RunMode::Shared) {
    // Train and Dev are identical in every shared plan; fit once per kind.
    const auto& region = universe.plans.front();
    std::optional<HistoryDataset> data;
    std::optional<Error> prep_error;
    try {
      data = reduce(region);
    } catch (const Error& e) {
      prep_error = e;
    }
    for (auto kind : config.models.kinds) {
      const auto t0 = Clock::now();
      std::optional<Fitted> model;
      std::optional<Error> fit_error = prep_error;
      double baseline = 0.0;
      const auto train = region.indices(Assignment::Train), dev = region.indices(Assignment::Dev);
      if (!fit_error) {
        try {
          auto fit_rows = train;
          fit_rows.insert(fit_rows.end(), dev.begin(), dev.end());
          baseline = baseline_of(*data, fit_rows);
          const CellKey shared_key{Regime::CrossSectionalAndProspective, kind, unit.hidden, unit.history};
          model = fit_model(kind, *data, train, dev, *region.dev_regime, config,
                            derive_seed(model_seed, "shared/" + shared_key.label()));
        } catch (const Error& e) {
          fit_error = e;
        }
      }
      const double fit_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      for (auto p : unit.plan_index) {
        const auto& plan = universe.plans[p];
        auto c = blank(plan.regime, kind);
        c.n_train = train.size();
        c.n_dev = dev.size();
        c.n_test = plan.count(Assignment::Test);
        c.seconds = fit_seconds;
        if (fit_error) {
          record_failure(c, *fit_error);
        } else {
          try {
            score(c, *model, baseline, *data, plan, config);
          } catch (const Error& e) {
            record_failure(c, e);
          }
        }
        if (c.status == CellStatus::Failed) log.push_back(c.key.label() + ": failed, " + c.error);
        cells.push_back(std::move(c));
      }
    }
    return cells;
  }

  for (auto p : unit.plan_index) {
    const auto& plan = universe.plans[p];
    std::optional<HistoryDataset> data;
    std::optional<Error> prep_error;
    try {
      data = reduce(plan);
    } catch (const Error& e) {
      prep_error = e;
    }
    for (auto kind : config.models.kinds) {
      const auto t0 = Clock::now();
      auto c = blank(plan.regime, kind);
      const auto train = plan.indices(Assignment::Train), dev = plan.indices(Assignment::Dev);
      c.n_train = train.size();
      c.n_dev = dev.size();
      c.n_test = plan.count(Assignment::Test);
      try {
        if (prep_error) throw *prep_error;
        if (plan.degenerate()) throw Error(ErrorKind::DegeneratePartition, "plan has an empty train or test set");
        auto fit_rows = train;
        fit_rows.insert(fit_rows.end(), dev.begin(), dev.end());
        const double baseline = baseline_of(*data, fit_rows);
        const auto model =
            fit_model(kind, *data, train, dev, *plan.dev_regime, config, derive_seed(model_seed, c.key.label()));
        score(c, model, baseline, *data, plan, config);
      } catch (const Error& e) {
        record_failure(c, e);
        log.push_back(c.key.label() + ": failed, " + c.error);
      }
      c.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      cells.push_back(std::move(c));
    }
  }
  return cells;
}

}  // namespace

ExperimentResult run(const ExperimentConfig& config) {
  config.validate();
  return run_on_panel(config, prepare_panel(config));
}

namespace {

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Instance universes and their plans for every history length.
std::map<int, Universe> build_universes(const ExperimentConfig& config, const Panel& panel,
                                        std::map<std::string, SplitPlan>& stems) {
  const std::uint64_t split_seed = config.seeds.resolve(config.seeds.splits, "splits");
  const auto histories = sorted_unique(config.history_lengths);
  std::map<int, Universe> universes;
  std::optional<std::set<InstanceKey>> common;
  if (config.splits.align_history) {
    const auto longest = build_instances(panel, config.data.task, histories.back());
    const auto keys = keys_of(longest);
    common.emplace(keys.begin(), keys.end());
  }
  std::optional<std::vector<SplitPlan>> shared_across_h;
  for (int h : histories) {
    Universe u;
    u.data = build_instances(panel, config.data.task, h);
    if (common) u.data = restrict_to(u.data, *common);
    if (u.data.size() == 0) throw Error(ErrorKind::DegeneratePartition, "no instances at h=" + std::to_string(h));
    if (common && shared_across_h) {
      u.plans = *shared_across_h;  // same key universe for every h
    } else {
      u.plans = config.mode == RunMode::Shared ? shared_plans(config, u.data, split_seed)
                                               : regime_plans(config, u.data, split_seed);
      if (common) shared_across_h = u.plans;
      for (const auto& plan : u.plans) {
        const std::string stem =
            std::string(to_string(plan.regime)) + (common ? "" : "_h" + std::to_string(h));
        stems.emplace(stem, plan);
      }
    }
    if (keys_of(u.data) != u.plans.front().keys) {
      throw Error(ErrorKind::Leakage, "plan keys do not match the instance universe");
    }
    universes.emplace(h, std::move(u));
  }
  return universes;
}

}  // namespace

std::map<std::string, SplitPlan> make_plans(const ExperimentConfig& config, const Panel& panel) {
  config.validate();
  std::map<std::string, SplitPlan> stems;
  build_universes(config, panel, stems);
  return stems;
}

ExperimentResult run_on_panel(const ExperimentConfig& config, const Panel& panel) {
  config.validate();
  ExperimentResult result;
  result.config = config;
  const std::uint64_t model_seed = config.seeds.resolve(config.seeds.models, "models");
  const auto histories = sorted_unique(config.history_lengths);
  const auto hidden = sorted_unique(config.hidden_sizes);
  const auto universes = build_universes(config, panel, result.plans);

  std::vector<Unit> units;
  for (int h : histories) {
    for (int d : hidden) {
      Unit unit{h, d, {}};
      unit.plan_index.resize(config.splits.regimes.size());
      std::iota(unit.plan_index.begin(), unit.plan_index.end(), 0);
      units.push_back(std::move(unit));
    }
  }

  // Units are independent; slots keep the merge order fixed.
  std::vector<std::vector<CellResult>> slots(units.size());
  std::vector<std::vector<std::string>> logs(units.size());
  std::vector<std::exception_ptr> errors(units.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t u = next++; u < units.size(); u = next++) {
      try {
        slots[u] = run_unit(config, universes.at(units[u].history), units[u], model_seed, logs[u]);
      } catch (...) {
        errors[u] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(config.jobs), units.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t u = 0; u < units.size(); ++u) {
    for (auto& c : slots[u]) result.cells.push_back(std::move(c));
    for (auto& line : logs[u]) result.log.push_back(std::move(line));
  }
  std::sort(result.cells.begin(), result.cells.end(),
            [](const CellResult& a, const CellResult& b) { return a.key < b.key; });
  return result;
}

}  // namespace longeval
