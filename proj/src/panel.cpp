#include "longeval/panel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <sstream>

#include "longeval/csv.hpp"
#include "longeval/error.hpp"

namespace longeval {

void PanelSchema::validate() const {
  if (study_length <= 0) throw Error(ErrorKind::Parameter, "study_length must be positive");
  if (feature_dim <= 0) throw Error(ErrorKind::Parameter, "feature_dim must be positive");
  if (!(outcome_min <= outcome_max)) {
    throw Error(ErrorKind::Parameter, "outcome_min must not exceed outcome_max");
  }
}

Panel::Panel(PanelSchema schema, PersonRows rows) : schema_(schema), rows_(std::move(rows)) {
  schema_.validate();
  for (auto& [person, records] : rows_) {
    if (person.empty()) throw Error(ErrorKind::Parse, "empty person id");
    std::stable_sort(records.begin(), records.end(),
                     [](const DayRecord& a, const DayRecord& b) { return a.day < b.day; });
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& rec = records[i];
      if (i > 0 && records[i - 1].day == rec.day) {
        throw Error(ErrorKind::Duplicate,
                    "duplicate observation for " + person + " day " + std::to_string(rec.day));
      }
      if (rec.day < 0 || rec.day >= schema_.study_length) {
        throw Error(ErrorKind::Range, "day " + std::to_string(rec.day) + " outside study for " + person);
      }
      if (rec.obs.outcome && (*rec.obs.outcome < schema_.outcome_min ||
                              *rec.obs.outcome > schema_.outcome_max)) {
        throw Error(ErrorKind::Range, "outcome out of bounds for " + person);
      }
      if (rec.obs.features &&
          static_cast<int>(rec.obs.features->size()) != schema_.feature_dim) {
        throw Error(ErrorKind::Shape, "feature dimension mismatch for " + person);
      }
    }
  }
}

std::size_t Panel::observation_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [_, records] : rows_) n += records.size();
  return n;
}

std::vector<PersonId> Panel::person_ids() const {
  std::vector<PersonId> ids;
  ids.reserve(rows_.size());
  for (const auto& [person, _] : rows_) ids.push_back(person);
  return ids;
}

const std::vector<DayRecord>& Panel::records(const PersonId& person) const {
  const auto it = rows_.find(person);
  if (it == rows_.end()) throw Error(ErrorKind::Parameter, "unknown person " + person);
  return it->second;
}

const Observation* Panel::find(const PersonId& person, DayIndex day) const {
  const auto it = rows_.find(person);
  if (it == rows_.end()) return nullptr;
  const auto& records = it->second;
  const auto rec = std::lower_bound(records.begin(), records.end(), day,
                                    [](const DayRecord& r, DayIndex d) { return r.day < d; });
  if (rec == records.end() || rec->day != day) return nullptr;
  return &rec->obs;
}

Panel parse_panel_csv(std::string_view text, const PanelSchema& schema) {
  schema.validate();
  const auto D = static_cast<std::size_t>(schema.feature_dim);
  PersonRows rows;
  std::set<std::pair<std::string, DayIndex>> seen;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool header_done = false;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (csv::trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto fields = csv::split_fields(line);

    if (!header_done) {
      if (fields.size() != 3 + D || csv::trim(fields[0]) != "person_id" ||
          csv::trim(fields[1]) != "day" || csv::trim(fields[2]) != "outcome") {
        throw ParseError(ErrorKind::Parse, line_no,
                         "header must be person_id,day,outcome followed by " +
                             std::to_string(D) + " feature columns");
      }
      header_done = true;
      continue;
    }

    if (fields.size() < 3) throw ParseError(ErrorKind::Parse, line_no, "expected at least 3 fields");
    const std::string person(csv::trim(fields[0]));
    if (person.empty()) throw ParseError(ErrorKind::Parse, line_no, "empty person_id");

    const auto day = csv::parse_int(fields[1]);
    if (!day) throw ParseError(ErrorKind::Parse, line_no, "bad day '" + std::string(fields[1]) + "'");
    if (*day < 0 || *day >= schema.study_length) {
      throw ParseError(ErrorKind::Range, line_no, "day " + std::to_string(*day) + " outside [0, " +
                                                      std::to_string(schema.study_length) + ")");
    }

    Observation obs;
    if (!csv::trim(fields[2]).empty()) {
      const auto y = csv::parse_double(fields[2]);
      if (!y || !std::isfinite(*y)) throw ParseError(ErrorKind::Parse, line_no, "bad outcome");
      if (*y < schema.outcome_min || *y > schema.outcome_max) {
        throw ParseError(ErrorKind::Range, line_no,
                         "outcome " + csv::format_exact(*y) + " outside [" +
                             csv::format_exact(schema.outcome_min) + ", " +
                             csv::format_exact(schema.outcome_max) + "]");
      }
      obs.outcome = *y;
    }

    const auto feature_fields = std::span(fields).subspan(3);
    const bool all_empty = std::all_of(feature_fields.begin(), feature_fields.end(),
                                       [](std::string_view f) { return csv::trim(f).empty(); });
    if (!all_empty) {
      if (feature_fields.size() != D) {
        throw ParseError(ErrorKind::Parse, line_no,
                         "expected " + std::to_string(D) + " features, got " +
                             std::to_string(feature_fields.size()));
      }
      std::vector<double> x(D);
      for (std::size_t k = 0; k < D; ++k) {
        const auto v = csv::parse_double(feature_fields[k]);
        if (!v || !std::isfinite(*v)) {
          throw ParseError(ErrorKind::Parse, line_no, "bad feature f" + std::to_string(k));
        }
        x[k] = *v;
      }
      obs.features = std::move(x);
    } else if (feature_fields.size() != 0 && feature_fields.size() != D) {
      throw ParseError(ErrorKind::Parse, line_no, "wrong number of (empty) feature fields");
    }

    const auto d = static_cast<DayIndex>(*day);
    if (!seen.emplace(person, d).second) {
      throw ParseError(ErrorKind::Duplicate, line_no,
                       "duplicate (person, day) = (" + person + ", " + std::to_string(d) + ")");
    }
    rows[person].push_back({d, std::move(obs)});
  }
  if (!header_done) throw ParseError(ErrorKind::Parse, 1, "missing header row");
  return Panel(schema, std::move(rows));
}

Panel load_panel(const std::filesystem::path& path, const PanelSchema& schema) {
  return parse_panel_csv(csv::read_file(path), schema);
}

std::string panel_to_csv(const Panel& panel) {
  const int D = panel.schema().feature_dim;
  std::string out = "person_id,day,outcome";
  for (int k = 0; k < D; ++k) out += ",f" + std::to_string(k);
  out += '\n';
  for (const auto& [person, records] : panel.persons()) {
    for (const auto& rec : records) {
      out += person;
      out += ',';
      out += std::to_string(rec.day);
      out += ',';
      if (rec.obs.outcome) out += csv::format_exact(*rec.obs.outcome);
      if (rec.obs.features) {
        for (double v : *rec.obs.features) {
          out += ',';
          out += csv::format_exact(v);
        }
      } else {
        out.append(static_cast<std::size_t>(D), ',');
      }
      out += '\n';
    }
  }
  return out;
}

void save_panel(const Panel& panel, const std::filesystem::path& path) {
  csv::write_file(path, panel_to_csv(panel));
}

CoverageResult filter_coverage(const Panel& panel, double min_fraction) {
  if (!(min_fraction > 0.0 && min_fraction <= 1.0)) {
    throw Error(ErrorKind::Parameter, "min_fraction must be in (0, 1]");
  }
  const double required = min_fraction * panel.schema().study_length;
  PersonRows kept;
  std::size_t dropped = 0;
  for (const auto& [person, records] : panel.persons()) {
    const auto observed = std::count_if(records.begin(), records.end(),
                                        [](const DayRecord& r) { return r.obs.outcome.has_value(); });
    // Tolerance absorbs products like 0.7 * 90 = 62.999...
    if (static_cast<double>(observed) + 1e-9 >= required) {
      kept.emplace(person, records);
    } else {
      ++dropped;
    }
  }
  const bool empty = kept.empty();
  return {Panel(panel.schema(), std::move(kept)), dropped, empty};
}

Panel impute_locf(const Panel& panel) {
  PersonRows out;
  for (const auto& [person, records] : panel.persons()) {
    std::vector<DayRecord> filled;
    const auto first = std::find_if(records.begin(), records.end(),
                                    [](const DayRecord& r) { return r.obs.features.has_value(); });
    if (first == records.end()) {
      out.emplace(person, records);
      continue;
    }
    filled.assign(records.begin(), first);
    std::vector<double> last;
    DayIndex next_day = first->day;
    for (auto it = first; it != records.end(); ++it) {
      // Calendar gaps get explicit carried-forward records.
      for (; next_day < it->day; ++next_day) {
        filled.push_back({next_day, Observation{last, std::nullopt, true}});
      }
      DayRecord rec = *it;
      if (!rec.obs.features) {
        rec.obs.features = last;
        rec.obs.imputed = true;
      }
      filled.push_back(std::move(rec));
      last = *filled.back().obs.features;
      next_day = it->day + 1;
    }
    out.emplace(person, std::move(filled));
  }
  return Panel(panel.schema(), std::move(out));
}

std::vector<PersonId> HistoryDataset::persons() const {
  std::vector<PersonId> ids;
  for (const auto& inst : instances) {
    if (ids.empty() || ids.back() != inst.person) ids.push_back(inst.person);
  }
  return ids;
}

Eigen::MatrixXd HistoryDataset::history_matrix(std::size_t index) const {
  const auto& inst = instances.at(index);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(inst.history.size()), day_features.cols());
  for (std::size_t k = 0; k < inst.history.size(); ++k) {
    m.row(static_cast<Eigen::Index>(k)) = day_features.row(static_cast<Eigen::Index>(inst.history[k]));
  }
  return m;
}

HistoryDataset HistoryDataset::with_features(Eigen::MatrixXd features) const {
  if (features.rows() != day_features.rows()) {
    throw Error(ErrorKind::Shape, "replacement feature table has wrong row count");
  }
  HistoryDataset out;
  out.mode = mode;
  out.history_len = history_len;
  out.study_length = study_length;
  out.day_features = std::move(features);
  out.row_keys = row_keys;
  out.instances = instances;
  return out;
}

HistoryDataset build_instances(const Panel& panel, TaskMode mode, int history_len) {
  const int T = panel.schema().study_length;
  if (history_len < 1) throw Error(ErrorKind::Parameter, "history length must be >= 1");
  if (history_len > T) {
    throw Error(ErrorKind::Parameter, "history length " + std::to_string(history_len) +
                                          " exceeds study length " + std::to_string(T));
  }
  const int D = panel.schema().feature_dim;

  HistoryDataset ds;
  ds.mode = mode;
  ds.history_len = history_len;
  ds.study_length = T;

  std::vector<std::vector<double>> table;
  std::map<InstanceKey, std::size_t> row_of;
  auto row_for = [&](const PersonId& person, DayIndex day, const std::vector<double>& x) {
    InstanceKey key{person, day};
    auto [it, inserted] = row_of.emplace(key, table.size());
    if (inserted) {
      table.push_back(x);
      ds.row_keys.push_back(std::move(key));
    }
    return it->second;
  };

  const int lead = mode == TaskMode::ForecastOneAhead ? 1 : 0;
  for (const auto& [person, records] : panel.persons()) {
    std::map<DayIndex, const Observation*> by_day;
    for (const auto& rec : records) by_day.emplace(rec.day, &rec.obs);

    for (const auto& rec : records) {
      const DayIndex anchor = rec.day;
      const DayIndex target_day = anchor + lead;
      const Observation* target_obs = lead == 0 ? &rec.obs : nullptr;
      if (lead != 0) {
        const auto it = by_day.find(target_day);
        if (it != by_day.end()) target_obs = it->second;
      }
      if (target_obs == nullptr || !target_obs->outcome) continue;
      if (anchor - history_len + 1 < 0) continue;

      bool complete = true;
      for (DayIndex d = anchor - history_len + 1; d <= anchor && complete; ++d) {
        const auto it = by_day.find(d);
        complete = it != by_day.end() && it->second->features.has_value();
      }
      if (!complete) continue;

      Instance inst;
      inst.person = person;
      inst.anchor_day = anchor;
      inst.target_day = target_day;
      inst.target = *target_obs->outcome;
      for (DayIndex d = anchor - history_len + 1; d <= anchor; ++d) {
        inst.history.push_back(row_for(person, d, *by_day.at(d)->features));
      }
      ds.instances.push_back(std::move(inst));
    }
  }

  ds.day_features.resize(static_cast<Eigen::Index>(table.size()), D);
  for (std::size_t r = 0; r < table.size(); ++r) {
    ds.day_features.row(static_cast<Eigen::Index>(r)) =
        Eigen::Map<const Eigen::RowVectorXd>(table[r].data(), D);
  }
  return ds;
}

std::string_view to_string(TaskMode mode) {
  return mode == TaskMode::Nowcast ? "nowcast" : "forecast";
}

TaskMode parse_task_mode(std::string_view text) {
  if (text == "nowcast") return TaskMode::Nowcast;
  if (text == "forecast" || text == "forecast_one_ahead") return TaskMode::ForecastOneAhead;
  throw Error(ErrorKind::Config, "unknown task mode '" + std::string(text) + "'");
}

}  // namespace longeval
