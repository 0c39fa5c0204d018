#pragma once

// Subcommands of the `paris` tool and the argument parser that dispatches to
// them. Exit codes: 0 success, 1 runtime failure, 2 configuration or usage.

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "paris/cli/config.hpp"
#include "paris/cli/pipeline.hpp"
#include "paris/cli/report.hpp"

namespace paris::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::string out;
};

// Precedence: flags, then PARIS_OUTPUT_DIR (output directory only), then the
// config file, then defaults.
inline RunConfig resolve_config(const Overrides& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (!o.out.empty()) {
    c.output_dir = o.out;
  } else if (const char* env = std::getenv("PARIS_OUTPUT_DIR"); env && *env) {
    c.output_dir = env;
  }
  c.validate();
  return c;
}

// Runs the selected folds on up to config.jobs threads. `on_done` is called
// from the worker that finished the fold.
template <class OnDone>
std::vector<FoldOutcome> run_folds(const SourceData& src, const std::vector<FoldPlan>& plans,
                                   const std::vector<std::size_t>& ids, const RunConfig& config,
                                   const FoldOptions& options, OnDone on_done) {
  std::vector<FoldOutcome> out(ids.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t slot; (slot = next.fetch_add(1)) < ids.size();) {
      out[slot] = run_fold(src, plans.at(ids[slot]), ids[slot], config, options);
      on_done(out[slot]);
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(config.jobs, ids.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return out;
}

inline std::string fold_dir(std::size_t fold) { return "fold_" + std::to_string(fold); }

// Per-fold artifacts, written as soon as the fold finishes.
inline void write_fold_artifacts(ArtifactWriter& w, const FoldOutcome& f, const RunConfig& config) {
  const std::string dir = fold_dir(f.fold) + "/";
  w.write(dir + "retained_indices.txt", index_list(f.retained));
  w.write(dir + "pruned_indices.txt", index_list(f.paris.pruned_indices));
  Json trace = {{"fold", f.fold}, {"steps", trace_json(f.paris.trace)}, {"cycles", Json::array()}};
  for (const auto& c : f.paris.cycles) trace["cycles"].push_back(cycle_json(c));
  w.write(dir + "trace.json", trace.dump(2) + "\n");
  std::ostringstream dump;
  data::write_dataset_csv(f.pruned_raw, dump);
  w.write(dir + "pruned_dataset.csv", dump.str());
  w.write(dir + "fold_report.json", fold_json(f, config.evaluation.tail_percentile).dump(2) + "\n");
}

inline Json run_header(const RunConfig& config, const std::string& kind, bool complete) {
  return {{"kind", kind}, {"complete", complete}, {"config_hash", config_hash(config)}, {"seed", config.seed}};
}

inline void log_fold(std::ostream& log, const FoldOutcome& f) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  log << "fold " << f.fold << ": " << (f.complete ? "ok" : "FAILED") << ", retained " << f.retained.size() << "/"
      << f.n_train;
  if (!f.complete) log << " (" << f.error << ")";
  log << '\n';
}

// prune and benchmark share everything but the random control and the grid.
inline int run_pruning_command(const RunConfig& config, bool benchmark, bool evaluate, std::ostream& log) {
  const SourceData src = load_source(config);
  const auto plans = plan_folds(src, config);
  const auto ids = selected_folds(config, plans.size());
  ArtifactWriter w(config.output_dir);
  w.write("config.json", canonical_config(config));
  log << "loaded " << src.data.size() << " samples in " << src.data.groups().size() << " groups; running "
      << ids.size() << " fold(s)\n";

  FoldOptions options;
  options.evaluate = evaluate || benchmark;
  options.random_control = benchmark;
  const auto folds = run_folds(src, plans, ids, config, options, [&](const FoldOutcome& f) {
    write_fold_artifacts(w, f, config);
    log_fold(log, f);
  });

  bool complete = true;
  for (const auto& f : folds) complete = complete && f.complete;
  const std::string kind = benchmark ? "benchmark" : "prune";
  Json report = run_header(config, kind, complete);
  report["data"] = {{"n_samples", src.data.size()},
                    {"n_groups", src.data.groups().size()},
                    {"rows_read", src.rows_read},
                    {"rows_dropped", src.rows_dropped},
                    {"skipped_groups", src.skipped_groups}};
  report["folds"] = Json::array();
  for (const auto& f : folds) report["folds"].push_back(fold_json(f, config.evaluation.tail_percentile));
  report["aggregate"] = aggregate_json(folds);
  if (benchmark) {
    report["benchmark"] = benchmark_grid_json(folds);
    w.write("benchmark.csv", benchmark_grid_csv(report["benchmark"]));
  }
  w.write("report.json", report.dump(2) + "\n");
  w.write("metrics.csv", tidy_metrics_csv(report));
  w.write("manifest.json", manifest_json(config, kind, w.artifacts()).dump(2) + "\n");
  if (!complete) log << "run incomplete; see report.json\n";
  return complete ? kExitOk : kExitRuntime;
}

struct DatasetArg {
  std::string id;
  std::string path;
};

// "id=path" or a bare path (then the path is the id).
inline DatasetArg parse_dataset_arg(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) return {s, s};
  if (eq == 0 || eq + 1 == s.size()) throw ConfigError("bad --dataset value '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

// Retrains the ensemble on each dataset dump (plus the fold's full training
// split, id "full") and scores it on the fold's validation and test groups.
inline int run_evaluate_command(const RunConfig& config, const std::vector<std::string>& dataset_args,
                                std::size_t fold, std::ostream& log) {
  std::vector<DatasetArg> datasets;
  std::set<std::string> seen_ids{"full"};
  for (const auto& a : dataset_args) {
    datasets.push_back(parse_dataset_arg(a));
    if (!seen_ids.insert(datasets.back().id).second) throw ConfigError("duplicate dataset id " + datasets.back().id);
    if (!fs::exists(datasets.back().path)) throw ConfigError("dataset not found: " + datasets.back().path);
  }
  std::vector<GroupedDataset> loaded;
  for (const auto& d : datasets) {
    std::ifstream in(d.path);
    try {
      loaded.push_back(data::read_dataset_csv(in));
    } catch (const Error& e) {
      throw ConfigError("cannot read dataset " + d.path + ": " + e.what());
    }
  }

  const SourceData src = load_source(config);
  const auto plans = plan_folds(src, config);
  if (fold >= plans.size()) throw ConfigError("--fold out of range");
  const PreparedFold pf = prepare_fold(src, plans[fold], fold);
  const std::set<SampleId> train_ids(pf.train.original_indices.begin(), pf.train.original_indices.end());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    for (auto id : loaded[i].original_indices)
      if (!train_ids.contains(id))
        throw ConfigError("dataset " + datasets[i].id + " contains sample " + std::to_string(id) +
                          " outside fold " + std::to_string(fold) + "'s training split");
    if (loaded[i].input_dim() != pf.train.input_dim())
      throw ConfigError("dataset " + datasets[i].id + " has the wrong input width");
  }

  ArtifactWriter w(config.output_dir);
  w.write("config.json", canonical_config(config));
  FoldOutcome f;
  f.fold = fold;
  f.plan = plans[fold];
  f.n_train = pf.train.size();
  f.n_val = pf.val.size();
  f.n_test = pf.test.size();
  try {
    f.methods.push_back(train_and_score("full", pf.train, pf, config));
    for (std::size_t i = 0; i < loaded.size(); ++i)
      f.methods.push_back(train_and_score(datasets[i].id, loaded[i].normalized(pf.stats), pf, config));
  } catch (const std::exception& e) {
    f.complete = false;
    f.error = e.what();
  }
  Json entry = {{"fold", fold}, {"complete", f.complete}, {"n_val", f.n_val}, {"n_test", f.n_test}};
  if (!f.complete) entry["error"] = f.error;
  entry["methods"] = Json::array();
  for (const auto& m : f.methods) entry["methods"].push_back(method_json(m, config.evaluation.tail_percentile));
  Json report = run_header(config, "evaluate", f.complete);
  report["folds"] = Json::array({entry});
  w.write("report.json", report.dump(2) + "\n");
  w.write("metrics.csv", tidy_metrics_csv(report));
  w.write("manifest.json", manifest_json(config, "evaluate", w.artifacts()).dump(2) + "\n");
  for (const auto& m : f.methods)
    log << m.method << ": n_train " << m.n_train << ", test rmse " << m.test.report.rmse << '\n';
  return f.complete ? kExitOk : kExitRuntime;
}

// Writes the synthetic dataset (as a dataset dump) and its clean labels.
inline int run_synth_command(const RunConfig& config, std::ostream& log) {
  data::SyntheticSpec spec = config.data.synthetic.spec;
  spec.seed = derive_seed(config.seed, 0, "synthetic");
  const auto syn = data::generate_synthetic_longtail(spec);
  ArtifactWriter w(config.output_dir);
  w.write("config.json", canonical_config(config));
  std::ostringstream dump;
  data::write_dataset_csv(syn.data, dump);
  w.write("synthetic.csv", dump.str());
  std::ostringstream labels;
  labels.precision(17);
  labels << "original_index,clean_target,corrupted\n";
  for (std::size_t i = 0; i < syn.data.size(); ++i)
    labels << syn.data.original_indices[i] << ',' << syn.clean_targets[i] << ',' << (syn.corrupted[i] ? 1 : 0)
           << '\n';
  w.write("synthetic_labels.csv", labels.str());
  w.write("manifest.json", manifest_json(config, "synth", w.artifacts()).dump(2) + "\n");
  log << "wrote " << syn.data.size() << " samples to " << (w.root() / "synthetic.csv").string() << '\n';
  return kExitOk;
}

// Re-renders tidy CSV tables from an existing report.json.
inline int run_report_command(const std::string& input, const std::string& out_dir, std::ostream& log) {
  if (!fs::exists(input)) throw ConfigError("report not found: " + input);
  Json report;
  try {
    report = Json::parse(read_file(input));
    const fs::path dir = out_dir.empty() ? fs::path(input).parent_path() : fs::path(out_dir);
    write_file_atomic(dir / "metrics.csv", tidy_metrics_csv(report));
    if (report.contains("benchmark")) write_file_atomic(dir / "benchmark.csv", benchmark_grid_csv(report["benchmark"]));
    log << "wrote " << (dir / "metrics.csv").string() << '\n';
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed report " + input + ": " + e.what());
  }
  return kExitOk;
}

// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& log = std::cerr) {
  CLI::App app{"PARIS dataset pruning toolkit"};
  app.set_version_flag("--version", "paris 0.1.0");
  Overrides o;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  app.add_option("--config", o.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "global seed (overrides the config)");
  auto* jobs_opt = app.add_option("--jobs", jobs, "folds run in parallel")->check(CLI::PositiveNumber);
  app.add_option("--out", o.out, "output directory (overrides PARIS_OUTPUT_DIR and the config)");
  app.require_subcommand(1);

  auto* prune = app.add_subcommand("prune", "prune the training split of each fold");
  bool no_evaluate = false;
  prune->add_flag("--no-evaluate", no_evaluate, "skip retraining and scoring");
  auto* bench = app.add_subcommand("benchmark", "full vs PARIS vs random pruning per fold");
  auto* eval = app.add_subcommand("evaluate", "retrain on dataset dumps and score them");
  std::vector<std::string> datasets;
  std::size_t eval_fold = 0;
  eval->add_option("--dataset", datasets, "dataset dump, as PATH or ID=PATH (repeatable)");
  eval->add_option("--fold", eval_fold, "fold whose validation and test groups are used");
  auto* synth = app.add_subcommand("synth", "write the synthetic dataset");
  auto* rep = app.add_subcommand("report", "render tidy CSV from a report.json");
  std::string report_input;
  rep->add_option("input", report_input, "report.json")->required();
  for (auto* sub : {prune, bench, eval, synth, rep}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, std::cout, log);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cout, log);
    return kExitUsage;
  }

  try {
    if (*seed_opt) o.seed = seed;
    if (*jobs_opt) o.jobs = jobs;
    if (rep->parsed()) return run_report_command(report_input, o.out, log);
    const RunConfig config = resolve_config(o);
    if (prune->parsed()) return run_pruning_command(config, false, !no_evaluate, log);
    if (bench->parsed()) return run_pruning_command(config, true, true, log);
    if (eval->parsed()) return run_evaluate_command(config, datasets, eval_fold, log);
    if (synth->parsed()) return run_synth_command(config, log);
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace paris::cli
