#include "longeval/config.hpp"

#include <algorithm>
#include <set>

#include <json.hpp>

#include "longeval/csv.hpp"
#include "longeval/error.hpp"
#include "longeval/rng.hpp"

namespace longeval {

using nlohmann::json;

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Ar: return "ar";
    case ModelKind::Boe: return "boe";
    case ModelKind::Transformer: return "transformer";
  }
  return "unknown";
}

std::string_view display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Ar: return "AR";
    case ModelKind::Boe: return "BoE";
    case ModelKind::Transformer: return "Transformer";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view text) {
  for (auto k : {ModelKind::Ar, ModelKind::Boe, ModelKind::Transformer}) {
    if (text == to_string(k) || text == display_name(k)) return k;
  }
  throw Error(ErrorKind::Config, "unknown model kind '" + std::string(text) + "'");
}

std::uint64_t SeedConfig::resolve(const std::optional<std::uint64_t>& field, std::string_view name) const {
  return field ? *field : derive_seed(base, name);
}

namespace {

// Rejects keys outside `allowed` so a misspelt option fails loudly instead of
// silently falling back to its default.
void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw Error(ErrorKind::Config, std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorKind::Config, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

CohortSpec cohort_from_json(const json& j) {
  check_keys(j, "synthetic",
             {"n_people", "study_length", "feature_dim", "outcome_mean", "sd_between", "ar_coef",
              "sd_innovation", "sd_noise", "loading_scale", "feature_noise_sd", "person_style_sd",
              "feature_missing_rate", "outcome_missing_rate", "missingness", "block_length", "outcome_min",
              "outcome_max", "seed"});
  CohortSpec s;
  read(j, "n_people", s.n_people);
  read(j, "study_length", s.study_length);
  read(j, "feature_dim", s.feature_dim);
  read(j, "outcome_mean", s.outcome_mean);
  read(j, "sd_between", s.sd_between);
  read(j, "ar_coef", s.ar_coef);
  read(j, "sd_innovation", s.sd_innovation);
  read(j, "sd_noise", s.sd_noise);
  read(j, "loading_scale", s.loading_scale);
  read(j, "feature_noise_sd", s.feature_noise_sd);
  read(j, "person_style_sd", s.person_style_sd);
  read(j, "feature_missing_rate", s.feature_missing_rate);
  read(j, "outcome_missing_rate", s.outcome_missing_rate);
  read(j, "block_length", s.block_length);
  read(j, "outcome_min", s.outcome_min);
  read(j, "outcome_max", s.outcome_max);
  read(j, "seed", s.seed);
  if (j.contains("missingness")) {
    const auto m = j.at("missingness").get<std::string>();
    if (m == "random") {
      s.missingness = MissingnessMode::Random;
    } else if (m == "block") {
      s.missingness = MissingnessMode::Block;
    } else {
      throw Error(ErrorKind::Config, "missingness must be 'random' or 'block'");
    }
  }
  s.validate();
  return s;
}

json cohort_to_json(const CohortSpec& s) {
  return {{"n_people", s.n_people},
          {"study_length", s.study_length},
          {"feature_dim", s.feature_dim},
          {"outcome_mean", s.outcome_mean},
          {"sd_between", s.sd_between},
          {"ar_coef", s.ar_coef},
          {"sd_innovation", s.sd_innovation},
          {"sd_noise", s.sd_noise},
          {"loading_scale", s.loading_scale},
          {"feature_noise_sd", s.feature_noise_sd},
          {"person_style_sd", s.person_style_sd},
          {"feature_missing_rate", s.feature_missing_rate},
          {"outcome_missing_rate", s.outcome_missing_rate},
          {"missingness", s.missingness == MissingnessMode::Block ? "block" : "random"},
          {"block_length", s.block_length},
          {"outcome_min", s.outcome_min},
          {"outcome_max", s.outcome_max},
          {"seed", s.seed}};
}

TransformerConfig transformer_from_json(const json& j) {
  check_keys(j, "models.transformer",
             {"model_dim", "ffn_dim", "use_ffn", "attention_dropout", "output_dropout", "learning_rate",
              "weight_decay", "beta1", "beta2", "adam_eps", "batch_size", "max_epochs", "patience",
              "layer_norm_eps"});
  TransformerConfig c;
  read(j, "model_dim", c.model_dim);
  read(j, "ffn_dim", c.ffn_dim);
  read(j, "use_ffn", c.use_ffn);
  read(j, "attention_dropout", c.attention_dropout);
  read(j, "output_dropout", c.output_dropout);
  read(j, "learning_rate", c.learning_rate);
  read(j, "weight_decay", c.weight_decay);
  read(j, "beta1", c.beta1);
  read(j, "beta2", c.beta2);
  read(j, "adam_eps", c.adam_eps);
  read(j, "batch_size", c.batch_size);
  read(j, "max_epochs", c.max_epochs);
  read(j, "patience", c.patience);
  read(j, "layer_norm_eps", c.layer_norm_eps);
  return c;
}

json transformer_to_json(const TransformerConfig& c) {
  return {{"model_dim", c.model_dim},         {"ffn_dim", c.ffn_dim},
          {"use_ffn", c.use_ffn},             {"attention_dropout", c.attention_dropout},
          {"output_dropout", c.output_dropout}, {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},   {"beta1", c.beta1},
          {"beta2", c.beta2},                 {"adam_eps", c.adam_eps},
          {"batch_size", c.batch_size},       {"max_epochs", c.max_epochs},
          {"patience", c.patience},           {"layer_norm_eps", c.layer_norm_eps}};
}

std::optional<std::uint64_t> optional_seed(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::uint64_t>();
}

}  // namespace

void ExperimentConfig::validate() const {
  if (data.synthetic.has_value() == data.panel_csv.has_value()) {
    throw Error(ErrorKind::Config, "data needs exactly one of 'synthetic' or 'panel'");
  }
  if (data.panel_csv && !std::filesystem::exists(*data.panel_csv)) {
    throw Error(ErrorKind::Config, "panel file not found: " + data.panel_csv->string());
  }
  if (data.min_coverage && !(*data.min_coverage >= 0.0 && *data.min_coverage <= 1.0)) {
    throw Error(ErrorKind::Config, "min_coverage must be in [0, 1]");
  }
  const int T = data.synthetic ? data.synthetic->study_length : data.schema.study_length;
  if (splits.regimes.empty()) throw Error(ErrorKind::Config, "at least one regime is required");
  if (std::set<Regime>(splits.regimes.begin(), splits.regimes.end()).size() != splits.regimes.size()) {
    throw Error(ErrorKind::Config, "regimes must not repeat");
  }
  if (!(splits.tau > 0 && splits.tau < T)) throw Error(ErrorKind::Config, "tau must satisfy 0 < tau < study_length");
  if (!(splits.test_fraction > 0.0 && splits.test_fraction < 1.0)) {
    throw Error(ErrorKind::Config, "test_fraction must be in (0, 1)");
  }
  if (!(splits.cross.test_fraction_people > 0.0 && splits.cross.test_fraction_people < 1.0)) {
    throw Error(ErrorKind::Config, "test_fraction_people must be in (0, 1)");
  }
  if (splits.cross.strata < 1) throw Error(ErrorKind::Config, "strata must be positive");
  if (!(splits.dev_fraction > 0.0 && splits.dev_fraction < 1.0)) {
    throw Error(ErrorKind::Config, "dev_fraction must be in (0, 1)");
  }
  if (hidden_sizes.empty() || history_lengths.empty() || models.kinds.empty() || metrics.empty()) {
    throw Error(ErrorKind::Config, "hidden_sizes, history_lengths, models and metrics must be non-empty");
  }
  for (int d : hidden_sizes) {
    if (d < 0) throw Error(ErrorKind::Config, "hidden sizes must be >= 0");
  }
  for (int h : history_lengths) {
    if (h < 1 || h > T) throw Error(ErrorKind::Config, "history lengths must be in [1, study_length]");
  }
  for (double l : models.lambda_grid) {
    if (!(l > 0.0)) throw Error(ErrorKind::Config, "lambda grid values must be positive");
  }
  if (jobs < 1) throw Error(ErrorKind::Config, "jobs must be >= 1");
  if (mode == RunMode::Shared) {
    for (auto r : splits.regimes) {
      if (r == Regime::Traditional) {
        throw Error(ErrorKind::Config, "shared mode evaluates person/time regimes only");
      }
    }
  }
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  try {
    check_keys(j, "config",
               {"name", "seed", "seeds", "data", "splits", "hidden_sizes", "history_lengths", "models", "metrics",
                "mode", "jobs", "output_dir"});
    read(j, "name", c.name);
    read(j, "seed", c.seeds.base);
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      check_keys(s, "seeds", {"synthetic", "cohort", "splits", "models"});
      c.seeds.synthetic = optional_seed(s, "synthetic");
      c.seeds.cohort = optional_seed(s, "cohort");
      c.seeds.splits = optional_seed(s, "splits");
      c.seeds.models = optional_seed(s, "models");
    }

    const auto& d = j.at("data");
    check_keys(d, "data", {"synthetic", "panel", "schema", "task", "min_coverage", "cohort", "impute"});
    if (d.contains("synthetic")) {
      c.data.synthetic = cohort_from_json(d.at("synthetic"));
      if (d.at("synthetic").contains("seed")) c.seeds.synthetic = c.data.synthetic->seed;
    }
    if (d.contains("panel")) {
      std::filesystem::path p = d.at("panel").get<std::string>();
      c.data.panel_csv = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
    if (d.contains("schema")) {
      const auto& s = d.at("schema");
      check_keys(s, "data.schema", {"study_length", "feature_dim", "outcome_min", "outcome_max"});
      read(s, "study_length", c.data.schema.study_length);
      read(s, "feature_dim", c.data.schema.feature_dim);
      read(s, "outcome_min", c.data.schema.outcome_min);
      read(s, "outcome_max", c.data.schema.outcome_max);
      c.data.schema.validate();
    }
    if (d.contains("task")) c.data.task = parse_task_mode(d.at("task").get<std::string>());
    if (d.contains("min_coverage")) c.data.min_coverage = d.at("min_coverage").get<double>();
    if (d.contains("cohort")) {
      const auto& k = d.at("cohort");
      check_keys(k, "data.cohort", {"n_bins", "per_bin_sample", "variation_floor", "window_split"});
      CohortSelection sel;
      read(k, "n_bins", sel.strata.n_bins);
      read(k, "per_bin_sample", sel.strata.per_bin_sample);
      read(k, "variation_floor", sel.filter.variation_floor);
      read(k, "window_split", sel.filter.window_split);
      c.data.cohort = sel;
    }
    read(d, "impute", c.data.impute);

    if (j.contains("splits")) {
      const auto& s = j.at("splits");
      check_keys(s, "splits",
                 {"regimes", "test_fraction", "test_fraction_people", "stratify", "strata", "tau", "dev_fraction",
                  "dev_split", "match_sizes", "align_history"});
      if (s.contains("regimes")) {
        c.splits.regimes.clear();
        for (const auto& r : s.at("regimes")) c.splits.regimes.push_back(parse_regime(r.get<std::string>()));
      }
      read(s, "test_fraction", c.splits.test_fraction);
      read(s, "test_fraction_people", c.splits.cross.test_fraction_people);
      read(s, "stratify", c.splits.cross.stratify_by_mean);
      read(s, "strata", c.splits.cross.strata);
      read(s, "tau", c.splits.tau);
      read(s, "dev_fraction", c.splits.dev_fraction);
      if (s.contains("dev_split")) {
        const auto v = s.at("dev_split").get<std::string>();
        if (v == "matched") {
          c.splits.dev_split = DevSplit::Matched;
        } else if (v == "document") {
          c.splits.dev_split = DevSplit::Document;
        } else {
          throw Error(ErrorKind::Config, "dev_split must be 'matched' or 'document'");
        }
      }
      read(s, "match_sizes", c.splits.match_sizes);
      read(s, "align_history", c.splits.align_history);
    }
    read(j, "hidden_sizes", c.hidden_sizes);
    read(j, "history_lengths", c.history_lengths);
    if (j.contains("models")) {
      const auto& m = j.at("models");
      check_keys(m, "models", {"kinds", "lambda_grid", "transformer"});
      if (m.contains("kinds")) {
        c.models.kinds.clear();
        for (const auto& k : m.at("kinds")) c.models.kinds.push_back(parse_model_kind(k.get<std::string>()));
      }
      read(m, "lambda_grid", c.models.lambda_grid);
      if (m.contains("transformer")) c.models.transformer = transformer_from_json(m.at("transformer"));
    }
    if (j.contains("metrics")) {
      c.metrics.clear();
      for (const auto& k : j.at("metrics")) c.metrics.push_back(parse_metric(k.get<std::string>()));
    }
    if (j.contains("mode")) {
      const auto v = j.at("mode").get<std::string>();
      if (v == "per_regime") {
        c.mode = RunMode::PerRegime;
      } else if (v == "shared") {
        c.mode = RunMode::Shared;
      } else {
        throw Error(ErrorKind::Config, "mode must be 'per_regime' or 'shared'");
      }
    }
    read(j, "jobs", c.jobs);
    if (j.contains("output_dir")) {
      std::filesystem::path p = j.at("output_dir").get<std::string>();
      c.output_dir = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("bad config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(csv::read_file(path), path.parent_path());
}

CohortSpec parse_cohort_spec(std::string_view json_text) {
  try {
    return cohort_from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, std::string("bad cohort spec: ") + e.what());
  }
}

std::string config_to_json(const ExperimentConfig& c) {
  json data;
  if (c.data.synthetic) {
    auto spec = *c.data.synthetic;
    spec.seed = c.seeds.resolve(c.seeds.synthetic, "synthetic");
    data["synthetic"] = cohort_to_json(spec);
  }
  if (c.data.panel_csv) {
    data["panel"] = c.data.panel_csv->generic_string();
    data["schema"] = {{"study_length", c.data.schema.study_length},
                      {"feature_dim", c.data.schema.feature_dim},
                      {"outcome_min", c.data.schema.outcome_min},
                      {"outcome_max", c.data.schema.outcome_max}};
  }
  data["task"] = std::string(to_string(c.data.task));
  if (c.data.min_coverage) data["min_coverage"] = *c.data.min_coverage;
  if (c.data.cohort) {
    data["cohort"] = {{"n_bins", c.data.cohort->strata.n_bins},
                      {"per_bin_sample", c.data.cohort->strata.per_bin_sample},
                      {"variation_floor", c.data.cohort->filter.variation_floor},
                      {"window_split", c.data.cohort->filter.window_split}};
  }
  data["impute"] = c.data.impute;

  json regimes = json::array();
  for (auto r : c.splits.regimes) regimes.push_back(std::string(to_string(r)));
  json kinds = json::array();
  for (auto k : c.models.kinds) kinds.push_back(std::string(to_string(k)));
  json metrics = json::array();
  for (auto m : c.metrics) metrics.push_back(std::string(to_string(m)));

  json j = {
      {"name", c.name},
      {"seed", c.seeds.base},
      {"seeds",
       {{"synthetic", c.seeds.resolve(c.seeds.synthetic, "synthetic")},
        {"cohort", c.seeds.resolve(c.seeds.cohort, "cohort")},
        {"splits", c.seeds.resolve(c.seeds.splits, "splits")},
        {"models", c.seeds.resolve(c.seeds.models, "models")}}},
      {"data", data},
      {"splits",
       {{"regimes", regimes},
        {"test_fraction", c.splits.test_fraction},
        {"test_fraction_people", c.splits.cross.test_fraction_people},
        {"stratify", c.splits.cross.stratify_by_mean},
        {"strata", c.splits.cross.strata},
        {"tau", c.splits.tau},
        {"dev_fraction", c.splits.dev_fraction},
        {"dev_split", c.splits.dev_split == DevSplit::Document ? "document" : "matched"},
        {"match_sizes", c.splits.match_sizes},
        {"align_history", c.splits.align_history}}},
      {"hidden_sizes", c.hidden_sizes},
      {"history_lengths", c.history_lengths},
      {"models",
       {{"kinds", kinds},
        {"lambda_grid", c.models.lambda_grid},
        {"transformer", transformer_to_json(c.models.transformer)}}},
      {"metrics", metrics},
      {"mode", c.mode == RunMode::Shared ? "shared" : "per_regime"},
      {"jobs", c.jobs},
      {"output_dir", c.output_dir.generic_string()},
  };
  return j.dump(2);
}

}  // namespace longeval
