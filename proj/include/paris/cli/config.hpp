#pragma once

// Run configuration for the command-line pipelines. One JSON document holds
// everything a run depends on; unknown keys are rejected so typos fail loudly.
// All randomness derives from `seed` through derive_seed().

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "paris/data.hpp"
#include "paris/error.hpp"
#include "paris/features.hpp"
#include "paris/metrics.hpp"
#include "paris/pruning.hpp"

namespace paris::cli {

using Json = nlohmann::json;

// Bad configuration or usage; maps to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class DataSource { synthetic, csv };

struct SyntheticSource {
  // spec.seed is ignored; the generator seed is derive_seed(seed, 0, "synthetic").
  data::SyntheticSpec spec{.seed = 0, .n = 5000, .tail_exponent = 2.0, .noise_sd = 0.1, .corrupt_fraction = 0.3,
                           .event_length = 50};
  // Score validation and test rows against the uncorrupted labels.
  bool clean_holdout = true;
};

struct CsvSource {
  std::string path;
  data::CsvSchema schema;
};

struct DataConfig {
  DataSource source = DataSource::synthetic;
  SyntheticSource synthetic;
  CsvSource csv;
};

struct FoldConfig {
  std::size_t n_test_groups = 3;
  std::size_t n_val_groups = 20;
  std::vector<std::size_t> only;  // fold ids to run; empty runs all
};

struct EvaluationConfig {
  std::vector<double> percentiles = metrics::default_percentiles();
  std::size_t n_thresholds = 20;
  std::size_t n_extreme = 10;
  double tail_percentile = 20.0;  // the "tail cRMSE" used for winners and summaries
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::string output_dir = "paris_out";
  std::size_t ensemble_size = 1;
  DataConfig data;
  data::WindowSpec window;
  FoldConfig folds;
  features::MlpConfig mlp;
  pruning::PruneConfig prune;
  bool fine_tune = false;  // warm-start each cycle's extractor from the previous one
  EvaluationConfig evaluation;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Hashing and seed derivation.

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// seed(component) = splitmix64(splitmix64(global + fold) ^ fnv1a64(tag))
inline std::uint64_t derive_seed(std::uint64_t global, std::uint64_t fold, std::string_view tag) {
  return splitmix64(splitmix64(global + fold) ^ fnv1a64(tag));
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

// ---------------------------------------------------------------------------
// JSON reading with unknown-key rejection.

namespace detail {

class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& child(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  std::string where(const std::string& key = "") const {
    std::string p = path_.empty() ? "config" : path_;
    return key.empty() ? p : p + "." + key;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.contains(it.key())) throw ConfigError("unknown key " + where(it.key()));
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline RunConfig config_from_json(const Json& j) {
  RunConfig c;
  detail::ObjectReader root(j, "");
  root.read("seed", c.seed);
  root.read("jobs", c.jobs);
  root.read("output_dir", c.output_dir);
  root.read("ensemble_size", c.ensemble_size);
  root.read("fine_tune", c.fine_tune);

  if (root.has("data")) {
    detail::ObjectReader d(root.child("data"), "data");
    std::string source = "synthetic";
    d.read("source", source);
    if (source == "synthetic")
      c.data.source = DataSource::synthetic;
    else if (source == "csv")
      c.data.source = DataSource::csv;
    else
      throw ConfigError("data.source must be \"synthetic\" or \"csv\"");
    if (d.has("synthetic")) {
      detail::ObjectReader s(d.child("synthetic"), "data.synthetic");
      auto& spec = c.data.synthetic.spec;
      s.read("n", spec.n);
      s.read("tail_exponent", spec.tail_exponent);
      s.read("noise_sd", spec.noise_sd);
      s.read("corrupt_fraction", spec.corrupt_fraction);
      s.read("event_length", spec.event_length);
      s.read("clean_holdout", c.data.synthetic.clean_holdout);
      s.finish();
    }
    if (d.has("csv")) {
      detail::ObjectReader s(d.child("csv"), "data.csv");
      auto& schema = c.data.csv.schema;
      s.read("path", c.data.csv.path);
      s.read("group_column", schema.group_column);
      s.read("target_column", schema.target_column);
      s.read("feature_columns", schema.feature_columns);
      std::string delim = ",";
      s.read("delimiter", delim);
      if (delim.size() != 1) throw ConfigError("data.csv.delimiter must be a single character");
      schema.delimiter = delim[0];
      s.read("sentinel_thresholds", schema.sentinel_thresholds);
      s.read("strict", schema.strict);
      s.finish();
    }
    d.finish();
  }

  if (root.has("window")) {
    detail::ObjectReader w(root.child("window"), "window");
    w.read("history_len", c.window.history_len);
    w.read("horizon", c.window.horizon);
    w.finish();
  }
  if (root.has("folds")) {
    detail::ObjectReader f(root.child("folds"), "folds");
    f.read("n_test_groups", c.folds.n_test_groups);
    f.read("n_val_groups", c.folds.n_val_groups);
    f.read("only", c.folds.only);
    f.finish();
  }
  if (root.has("mlp")) {
    detail::ObjectReader m(root.child("mlp"), "mlp");
    m.read("hidden_sizes", c.mlp.hidden_sizes);
    m.read("max_epochs", c.mlp.max_epochs);
    m.read("patience", c.mlp.patience);
    m.read("learning_rate", c.mlp.learning_rate);
    m.read("batch_size", c.mlp.batch_size);
    m.finish();
  }
  if (root.has("prune")) {
    detail::ObjectReader p(root.child("prune"), "prune");
    p.read("prune_fraction_per_cycle", c.prune.prune_fraction_per_cycle);
    p.read("total_prune_fraction", c.prune.total_prune_fraction);
    if (p.has("lambda")) {
      const Json& l = p.child("lambda");
      if (l.is_string() && l.get<std::string>() == "estimate")
        c.prune.lambda = pruning::LambdaPolicy::estimated();
      else if (l.is_number())
        c.prune.lambda = pruning::LambdaPolicy::fixed(l.get<double>());
      else
        throw ConfigError("prune.lambda must be \"estimate\" or a number");
    }
    std::string policy = "prune_anyway";
    p.read("positive_delta_policy", policy);
    if (policy == "prune_anyway")
      c.prune.positive_delta_policy = pruning::PositiveDeltaPolicy::prune_anyway;
    else if (policy == "stop_cycle")
      c.prune.positive_delta_policy = pruning::PositiveDeltaPolicy::stop_cycle;
    else
      throw ConfigError("prune.positive_delta_policy must be \"prune_anyway\" or \"stop_cycle\"");
    p.finish();
  }
  if (root.has("evaluation")) {
    detail::ObjectReader e(root.child("evaluation"), "evaluation");
    e.read("percentiles", c.evaluation.percentiles);
    e.read("n_thresholds", c.evaluation.n_thresholds);
    e.read("n_extreme", c.evaluation.n_extreme);
    e.read("tail_percentile", c.evaluation.tail_percentile);
    e.finish();
  }
  root.finish();
  return c;
}

// Canonical form: every field present, defaults filled in, only the active
// data source section. Keys are sorted by the JSON object type.
inline Json config_to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["output_dir"] = c.output_dir;
  j["ensemble_size"] = c.ensemble_size;
  j["fine_tune"] = c.fine_tune;
  if (c.data.source == DataSource::synthetic) {
    const auto& s = c.data.synthetic;
    j["data"] = {{"source", "synthetic"},
                 {"synthetic",
                  {{"n", s.spec.n},
                   {"tail_exponent", s.spec.tail_exponent},
                   {"noise_sd", s.spec.noise_sd},
                   {"corrupt_fraction", s.spec.corrupt_fraction},
                   {"event_length", s.spec.event_length},
                   {"clean_holdout", s.clean_holdout}}}};
  } else {
    const auto& s = c.data.csv;
    j["data"] = {{"source", "csv"},
                 {"csv",
                  {{"path", s.path},
                   {"group_column", s.schema.group_column},
                   {"target_column", s.schema.target_column},
                   {"feature_columns", s.schema.feature_columns},
                   {"delimiter", std::string(1, s.schema.delimiter)},
                   {"sentinel_thresholds", s.schema.sentinel_thresholds},
                   {"strict", s.schema.strict}}}};
  }
  j["window"] = {{"history_len", c.window.history_len}, {"horizon", c.window.horizon}};
  j["folds"] = {{"n_test_groups", c.folds.n_test_groups}, {"n_val_groups", c.folds.n_val_groups},
                {"only", c.folds.only}};
  j["mlp"] = {{"hidden_sizes", c.mlp.hidden_sizes},
              {"max_epochs", c.mlp.max_epochs},
              {"patience", c.mlp.patience},
              {"learning_rate", c.mlp.learning_rate},
              {"batch_size", c.mlp.batch_size}};
  Json lambda = c.prune.lambda.estimate ? Json("estimate") : Json(c.prune.lambda.fixed_value);
  j["prune"] = {{"prune_fraction_per_cycle", c.prune.prune_fraction_per_cycle},
                {"total_prune_fraction", c.prune.total_prune_fraction},
                {"lambda", lambda},
                {"positive_delta_policy", c.prune.positive_delta_policy == pruning::PositiveDeltaPolicy::stop_cycle
                                              ? "stop_cycle"
                                              : "prune_anyway"}};
  j["evaluation"] = {{"percentiles", c.evaluation.percentiles},
                     {"n_thresholds", c.evaluation.n_thresholds},
                     {"n_extreme", c.evaluation.n_extreme},
                     {"tail_percentile", c.evaluation.tail_percentile}};
  return j;
}

inline std::string canonical_config(const RunConfig& c) { return config_to_json(c).dump(2) + "\n"; }

// Identifies the scientific content of a run: where it writes and how many
// threads it uses do not change results, so they are left out.
inline std::string config_hash(const RunConfig& c) {
  Json j = config_to_json(c);
  j.erase("output_dir");
  j.erase("jobs");
  return hex64(fnv1a64(j.dump()));
}

inline void RunConfig::validate() const {
  if (jobs == 0) throw ConfigError("jobs must be >= 1");
  if (ensemble_size == 0) throw ConfigError("ensemble_size must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir must be non-empty");
  try {
    mlp.validate();
    prune.validate();
    window.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (data.source == DataSource::csv) {
    if (data.csv.path.empty()) throw ConfigError("data.csv.path is required");
    if (data.csv.schema.group_column.empty() || data.csv.schema.target_column.empty())
      throw ConfigError("data.csv.group_column and data.csv.target_column are required");
    if (data.csv.schema.feature_columns.empty()) throw ConfigError("data.csv.feature_columns must be non-empty");
  } else {
    const auto& s = data.synthetic.spec;
    if (s.n < 100) throw ConfigError("data.synthetic.n must be >= 100");
    if (!(s.tail_exponent > 0.0)) throw ConfigError("data.synthetic.tail_exponent must be positive");
    if (s.corrupt_fraction < 0.0 || s.corrupt_fraction >= 1.0)
      throw ConfigError("data.synthetic.corrupt_fraction must be in [0, 1)");
    if (s.event_length < 2) throw ConfigError("data.synthetic.event_length must be >= 2");
    if (!(s.noise_sd >= 0.0)) throw ConfigError("data.synthetic.noise_sd must be >= 0");
  }
  if (folds.n_test_groups == 0) throw ConfigError("folds.n_test_groups must be >= 1");
  for (auto f : folds.only)
    if (f >= folds.n_test_groups) throw ConfigError("folds.only refers to a fold beyond n_test_groups");
  for (double q : evaluation.percentiles)
    if (!(q > 0.0 && q <= 100.0)) throw ConfigError("evaluation.percentiles must lie in (0, 100]");
  if (!(evaluation.tail_percentile > 0.0 && evaluation.tail_percentile <= 100.0))
    throw ConfigError("evaluation.tail_percentile must lie in (0, 100]");
}

inline RunConfig parse_config(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = config_from_json(j);
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace paris::cli
