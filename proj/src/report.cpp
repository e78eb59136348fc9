#include <algorithm>
#include <set>

#include <json.hpp>

#include "longeval/csv.hpp"
#include "longeval/error.hpp"
#include "longeval/runner.hpp"

namespace longeval {

using nlohmann::json;

namespace {

// Numbers in every table go through here, so CSV and markdown agree.
std::string num(double v) { return csv::format_sig(v, 6); }
std::string num(const std::optional<double>& v) { return v ? num(*v) : ""; }

std::string clean(std::string text) {
  std::replace(text.begin(), text.end(), ',', ';');
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

std::string key_fields(const CellKey& k) {
  return std::string(to_string(k.regime)) + "," + std::string(display_name(k.model)) + "," +
         std::to_string(k.hidden) + "," + std::to_string(k.history);
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

json cell_to_json(const CellResult& c) {
  json metrics = json::array();
  for (const auto& m : c.report.cells) {
    metrics.push_back({{"scope", to_string(m.scope)},
                       {"metric", to_string(m.metric)},
                       {"value", optional_number(m.value)},
                       {"se", optional_number(m.standard_error)},
                       {"n_units", m.n_units},
                       {"excluded", m.excluded},
                       {"note", m.note}});
  }
  json j = {{"regime", to_string(c.key.regime)},
            {"model", to_string(c.key.model)},
            {"hidden", c.key.hidden},
            {"h", c.key.history},
            {"status", to_string(c.status)},
            {"error_kind", c.error_kind},
            {"error", c.error},
            {"n_train", c.n_train},
            {"n_dev", c.n_dev},
            {"n_test", c.n_test},
            {"mae", c.mae},
            {"baseline_mae", c.baseline_mae},
            {"ttest", nullptr},
            {"ttest_note", c.ttest_note},
            {"metrics", metrics},
            {"selection", nullptr},
            {"model_hash", c.model_hash}};
  if (c.ttest) j["ttest"] = {{"t", c.ttest->t_stat}, {"p", c.ttest->p_value}, {"dof", c.ttest->dof}};
  if (c.trace) {
    json grid = json::array();
    for (const auto& [x, score] : c.trace->grid) grid.push_back({x, score});
    j["selection"] = {{"grid", grid},
                      {"chosen", c.trace->chosen},
                      {"dev_regime", to_string(c.trace->dev_regime)},
                      {"note", c.trace->note}};
  }
  return j;
}

MetricScope parse_scope(std::string_view s) {
  for (auto scope : {MetricScope::Flattened, MetricScope::BetweenPerson, MetricScope::WithinPerson}) {
    if (s == to_string(scope)) return scope;
  }
  throw Error(ErrorKind::Parse, "unknown scope '" + std::string(s) + "'");
}

CellResult cell_from_json(const json& j) {
  CellResult c;
  c.key.regime = parse_regime(j.at("regime").get<std::string>());
  c.key.model = parse_model_kind(j.at("model").get<std::string>());
  c.key.hidden = j.at("hidden").get<int>();
  c.key.history = j.at("h").get<int>();
  c.status = parse_cell_status(j.at("status").get<std::string>());
  c.error_kind = j.at("error_kind").get<std::string>();
  c.error = j.at("error").get<std::string>();
  c.n_train = j.at("n_train").get<std::size_t>();
  c.n_dev = j.at("n_dev").get<std::size_t>();
  c.n_test = j.at("n_test").get<std::size_t>();
  c.mae = j.at("mae").get<double>();
  c.baseline_mae = j.at("baseline_mae").get<double>();
  if (!j.at("ttest").is_null()) {
    const auto& t = j.at("ttest");
    c.ttest = TTestResult{t.at("t").get<double>(), t.at("p").get<double>(), t.at("dof").get<std::size_t>()};
  }
  c.ttest_note = j.at("ttest_note").get<std::string>();
  for (const auto& m : j.at("metrics")) {
    MetricCell cell;
    cell.scope = parse_scope(m.at("scope").get<std::string>());
    cell.metric = parse_metric(m.at("metric").get<std::string>());
    cell.value = read_optional(m, "value");
    cell.standard_error = read_optional(m, "se");
    cell.n_units = m.at("n_units").get<std::size_t>();
    cell.excluded = m.at("excluded").get<std::size_t>();
    cell.note = m.at("note").get<std::string>();
    c.report.cells.push_back(std::move(cell));
  }
  if (!j.at("selection").is_null()) {
    const auto& s = j.at("selection");
    SelectionTrace t;
    for (const auto& g : s.at("grid")) t.grid.emplace_back(g.at(0).get<double>(), g.at(1).get<double>());
    t.chosen = s.at("chosen").get<double>();
    t.dev_regime = parse_regime(s.at("dev_regime").get<std::string>());
    t.note = s.at("note").get<std::string>();
    c.trace = std::move(t);
  }
  c.model_hash = j.at("model_hash").get<std::string>();
  return c;
}

// The config echo leaves out settings that do not affect results.
std::string result_config_json(const ExperimentConfig& config) {
  auto j = json::parse(config_to_json(config));
  j.erase("jobs");
  j.erase("output_dir");
  return j.dump(2);
}

const MetricCell* find_metric(const CellResult& c, MetricScope scope, MetricKind metric) {
  for (const auto& m : c.report.cells) {
    if (m.scope == scope && m.metric == metric) return &m;
  }
  return nullptr;
}

constexpr MetricScope kScopes[] = {MetricScope::Flattened, MetricScope::BetweenPerson, MetricScope::WithinPerson};

// Rows of (scope, MAE, SE) for one cell.
std::string mae_rows(const std::string& prefix, const CellResult& c) {
  std::string out;
  if (c.status != CellStatus::Ok) return out;
  for (auto scope : kScopes) {
    const auto* m = find_metric(c, scope, MetricKind::Mae);
    if (!m) continue;
    out += prefix + "," + std::string(to_string(scope)) + "," + num(m->value) + "," + num(m->standard_error) + "\n";
  }
  return out;
}

// Hidden size shown in the model comparison: 128 when the grid has it.
int fig5_hidden(const ExperimentResult& r) {
  std::set<int> sizes;
  for (const auto& c : r.cells) sizes.insert(c.key.hidden);
  if (sizes.empty()) return 0;
  return sizes.contains(128) ? 128 : *sizes.begin();
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string csv() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& fields) {
      for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + fields[i];
      out += "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }

  std::string markdown() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& fields) {
      out += "|";
      for (const auto& f : fields) out += " " + f + " |";
      out += "\n";
    };
    line(header);
    out += "|";
    for (std::size_t i = 0; i < header.size(); ++i) out += " --- |";
    out += "\n";
    for (const auto& r : rows) line(r);
    return out;
  }
};

Table table2(const ExperimentResult& r) {
  Table t{{"regime", "model", "hidden", "h", "mae", "baseline_mae", "delta", "t", "p", "n_train", "n_test", "status"},
          {}};
  for (const auto& c : r.cells) {
    std::vector<std::string> row{std::string(to_string(c.key.regime)), std::string(display_name(c.key.model)),
                                 std::to_string(c.key.hidden), std::to_string(c.key.history)};
    if (c.status == CellStatus::Ok) {
      row.push_back(num(c.mae));
      row.push_back(num(c.baseline_mae));
      row.push_back(num(c.mae - c.baseline_mae));
      row.push_back(c.ttest ? num(c.ttest->t_stat) : "");
      row.push_back(c.ttest ? num(c.ttest->p_value) : "");
    } else {
      row.insert(row.end(), 5, "");
    }
    row.push_back(std::to_string(c.n_train + c.n_dev));
    row.push_back(std::to_string(c.n_test));
    row.push_back(std::string(to_string(c.status)));
    t.rows.push_back(std::move(row));
  }
  return t;
}

Table fig2b(const ExperimentResult& r) {
  Table t{{"regime", "model", "hidden", "h", "scope", "metric", "value", "se", "n_units", "excluded"}, {}};
  for (const auto& c : r.cells) {
    if (c.status != CellStatus::Ok) continue;
    for (const auto& m : c.report.cells) {
      t.rows.push_back({std::string(to_string(c.key.regime)), std::string(display_name(c.key.model)),
                        std::to_string(c.key.hidden), std::to_string(c.key.history),
                        std::string(to_string(m.scope)), std::string(to_string(m.metric)), num(m.value),
                        num(m.standard_error), std::to_string(m.n_units), std::to_string(m.excluded)});
    }
  }
  return t;
}

}  // namespace

std::string table2_csv(const ExperimentResult& result) { return table2(result).csv(); }
std::string fig2b_csv(const ExperimentResult& result) { return fig2b(result).csv(); }

std::string fig3_csv(const ExperimentResult& result) {
  auto cells = result.cells;
  std::stable_sort(cells.begin(), cells.end(), [](const CellResult& a, const CellResult& b) {
    return std::tie(a.key.regime, a.key.model, a.key.history, a.key.hidden) <
           std::tie(b.key.regime, b.key.model, b.key.history, b.key.hidden);
  });
  std::string out = "regime,model,h,hidden,scope,MAE,SE\n";
  for (const auto& c : cells) {
    out += mae_rows(std::string(to_string(c.key.regime)) + "," + std::string(display_name(c.key.model)) + "," +
                        std::to_string(c.key.history) + "," + std::to_string(c.key.hidden),
                    c);
  }
  return out;
}

std::string fig4_csv(const ExperimentResult& result) {
  std::string out = "regime,model,hidden,h,scope,MAE,SE\n";
  for (const auto& c : result.cells) out += mae_rows(key_fields(c.key), c);
  return out;
}

std::string fig5_csv(const ExperimentResult& result) {
  const int hidden = fig5_hidden(result);
  std::string out = "regime,model,h,scope,MAE,SE\n";
  for (const auto& c : result.cells) {
    if (c.key.hidden != hidden) continue;
    out += mae_rows(std::string(to_string(c.key.regime)) + "," + std::string(display_name(c.key.model)) + "," +
                        std::to_string(c.key.history),
                    c);
  }
  return out;
}

std::string cells_csv(const ExperimentResult& result) {
  std::string out =
      "regime,model,hidden,h,status,n_train,n_dev,n_test,chosen,mae,baseline_mae,t,p,model_hash,error_kind,error\n";
  for (const auto& c : result.cells) {
    out += key_fields(c.key) + "," + std::string(to_string(c.status)) + "," + std::to_string(c.n_train) + "," +
           std::to_string(c.n_dev) + "," + std::to_string(c.n_test) + "," + (c.trace ? num(c.trace->chosen) : "") +
           "," + (c.status == CellStatus::Ok ? num(c.mae) + "," + num(c.baseline_mae) : ",") + "," +
           (c.ttest ? num(c.ttest->t_stat) + "," + num(c.ttest->p_value) : ",") + "," + c.model_hash + "," +
           c.error_kind + "," + clean(c.error) + "\n";
  }
  return out;
}

std::string report_markdown(const ExperimentResult& result) {
  std::string out = "# " + result.config.name + "\n\n";
  out += "## Test MAE against the mean-of-train baseline\n\n";
  out += "One-sided paired t-test on per-instance absolute errors; p < 0.05 means the model beats the baseline.\n\n";
  out += table2(result).markdown();
  out += "\n## Scoped metrics\n\n";
  out += "Between-person r is the correlation over person means.\n\n";
  out += fig2b(result).markdown();
  if (!result.log.empty()) {
    out += "\n## Log\n\n";
    for (const auto& line : result.log) out += "- " + line + "\n";
  }
  return out;
}

void emit_report(const ExperimentResult& result, const std::filesystem::path& dir) {
  csv::write_file(dir / "table2.csv", table2_csv(result));
  csv::write_file(dir / "fig2b.csv", fig2b_csv(result));
  csv::write_file(dir / "fig3.csv", fig3_csv(result));
  csv::write_file(dir / "fig4.csv", fig4_csv(result));
  csv::write_file(dir / "fig5.csv", fig5_csv(result));
  csv::write_file(dir / "cells.csv", cells_csv(result));
  csv::write_file(dir / "report.md", report_markdown(result));
}

void write_result(const ExperimentResult& result, const std::filesystem::path& dir) {
  json cells = json::array();
  for (const auto& c : result.cells) cells.push_back(cell_to_json(c));
  json plans = json::array();
  for (const auto& [stem, _] : result.plans) plans.push_back(stem);
  const json j = {{"config", json::parse(result_config_json(result.config))},
                  {"cells", cells},
                  {"plans", plans},
                  {"log", result.log}};
  csv::write_file(dir / "result.json", j.dump(2) + "\n");
  for (const auto& [stem, plan] : result.plans) csv::write_file(dir / "plans" / (stem + ".csv"), plan_to_csv(plan));
  emit_report(result, dir);

  std::string timings = "regime,model,hidden,h,seconds\n";
  for (const auto& c : result.cells) timings += key_fields(c.key) + "," + num(c.seconds) + "\n";
  csv::write_file(dir / "timings.csv", timings);
}

ExperimentResult read_result(const std::filesystem::path& dir) {
  ExperimentResult r;
  json j;
  try {
    j = json::parse(csv::read_file(dir / "result.json"));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("result.json: ") + e.what());
  }
  try {
    // The echo may point at files that have since moved; cells do not need them.
    try {
      r.config = parse_config(j.at("config").dump());
    } catch (const Error& e) {
      r.log.push_back(std::string("config not reloaded: ") + e.what());
      if (j.at("config").contains("name")) r.config.name = j.at("config").at("name").get<std::string>();
    }
    for (const auto& c : j.at("cells")) r.cells.push_back(cell_from_json(c));
    for (const auto& line : j.at("log")) r.log.push_back(line.get<std::string>());
    for (const auto& stem : j.at("plans")) {
      const auto name = stem.get<std::string>();
      r.plans.emplace(name, plan_from_csv(csv::read_file(dir / "plans" / (name + ".csv"))));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("result.json: ") + e.what());
  }
  std::sort(r.cells.begin(), r.cells.end(), [](const CellResult& a, const CellResult& b) { return a.key < b.key; });
  return r;
}

}  // namespace longeval
