#pragma once

// Fold-level pipelines shared by the subcommands: load the source, split a
// fold, standardize with training statistics, prune, and score ensembles
// trained on the full, pruned and randomly pruned training sets.

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "paris/cli/config.hpp"
#include "paris/data.hpp"
#include "paris/features.hpp"
#include "paris/metrics.hpp"
#include "paris/pruning.hpp"

namespace paris::cli {

using data::FoldPlan;
using data::GroupedDataset;
using data::SampleId;

struct SourceData {
  GroupedDataset data;
  // Labels used to score validation/test rows, keyed by original index. Empty
  // means "score against data.targets".
  std::map<SampleId, double> holdout_targets;
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;
  std::vector<data::GroupId> skipped_groups;
};

inline SourceData load_source(const RunConfig& config) {
  SourceData src;
  if (config.data.source == DataSource::synthetic) {
    data::SyntheticSpec spec = config.data.synthetic.spec;
    spec.seed = derive_seed(config.seed, 0, "synthetic");
    auto syn = data::generate_synthetic_longtail(spec);
    src.data = std::move(syn.data);
    src.rows_read = src.data.size();
    if (config.data.synthetic.clean_holdout)
      for (std::size_t i = 0; i < src.data.size(); ++i)
        src.holdout_targets[src.data.original_indices[i]] = syn.clean_targets[i];
  } else {
    auto table = data::ingest_csv(config.data.csv.path, config.data.csv.schema);
    auto windows = data::make_windows(table, config.window);
    src.data = std::move(windows.dataset);
    src.rows_read = table.rows_read;
    src.rows_dropped = table.rows_read - table.rows_kept;
    src.skipped_groups = std::move(windows.skipped_groups);
  }
  src.data.validate();
  return src;
}

// Standardized train/val/test for one fold. Statistics come from the training
// rows only; val/test targets are replaced by holdout labels when present.
struct PreparedFold {
  std::size_t fold = 0;
  FoldPlan plan;
  GroupedDataset train;
  GroupedDataset val;
  GroupedDataset test;
  data::Normalization stats;
};

inline PreparedFold prepare_fold(const SourceData& src, const FoldPlan& plan, std::size_t fold) {
  data::FoldData raw = data::split_fold(src.data, plan);
  auto relabel = [&](GroupedDataset& ds) {
    if (src.holdout_targets.empty()) return;
    for (std::size_t i = 0; i < ds.size(); ++i) ds.targets[i] = src.holdout_targets.at(ds.original_indices[i]);
  };
  relabel(raw.val);
  relabel(raw.test);
  PreparedFold f;
  f.fold = fold;
  f.plan = plan;
  f.stats = data::Normalization::fit(raw.train.inputs, raw.train.targets);
  f.train = raw.train.normalized(f.stats);
  f.val = raw.val.normalized(f.stats);
  f.test = raw.test.normalized(f.stats);
  return f;
}

// Scores on one evaluation set, in original target units.
struct SplitScore {
  metrics::MetricReport report;
  double tail_crmse = std::nan("");  // cRMSE at evaluation.tail_percentile
  std::size_t n_tail = 0;
};

inline SplitScore score_split(const GroupedDataset& eval_set, const linalg::Vector& pred_normalized,
                              const EvaluationConfig& e) {
  const auto& stats = eval_set.normalization;
  const linalg::Vector y = stats.denormalize_targets(eval_set.targets);
  const linalg::Vector p = stats.denormalize_targets(pred_normalized);
  metrics::MetricOptions o;
  o.percentiles = e.percentiles;
  o.thresholds = metrics::default_thresholds(y, e.n_thresholds);
  o.n_extreme = std::min(e.n_extreme, y.size());
  SplitScore s;
  s.report = metrics::evaluate(y, p, o);
  const auto tail = metrics::conditional_rmse_percentile(y, p, e.tail_percentile);
  s.n_tail = tail.crmse.n_samples;
  if (tail.crmse.value) s.tail_crmse = *tail.crmse.value;
  return s;
}

struct MethodResult {
  std::string method;  // "full", "paris" or "random"
  std::size_t n_train = 0;
  SplitScore val;
  SplitScore test;
};

// Trains `ensemble_size` members on `train` (early stopping on the fold's
// validation set) and scores the ensemble mean on val and test.
inline MethodResult train_and_score(const std::string& method, const GroupedDataset& train, const PreparedFold& fold,
                                    const RunConfig& config) {
  features::MlpConfig mlp = config.mlp;
  mlp.seed = derive_seed(config.seed, fold.fold, "ensemble");
  auto members = features::train_ensemble(train, fold.val, mlp, config.ensemble_size, 1);
  MethodResult r;
  r.method = method;
  r.n_train = train.size();
  r.val = score_split(fold.val, features::ensemble_predict(members, fold.val.inputs), config.evaluation);
  r.test = score_split(fold.test, features::ensemble_predict(members, fold.test.inputs), config.evaluation);
  return r;
}

struct FoldOutcome {
  std::size_t fold = 0;
  FoldPlan plan;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::size_t n_test = 0;
  pruning::ParisResult paris;
  std::vector<SampleId> retained;  // ascending original indices
  GroupedDataset pruned_raw;       // retained rows, as loaded (raw units and labels)
  std::vector<MethodResult> methods;
  bool complete = true;
  std::string error;

  double pruned_fraction() const {
    return n_train == 0 ? 0.0 : 1.0 - static_cast<double>(retained.size()) / static_cast<double>(n_train);
  }
  const MethodResult* method(const std::string& name) const {
    for (const auto& m : methods)
      if (m.method == name) return &m;
    return nullptr;
  }
};

struct FoldOptions {
  bool evaluate = true;        // train and score the full-data baseline and PARIS
  bool random_control = false;  // also the random-pruning control at the same budget
};

inline pruning::MlpExtractorFactory extractor_factory(const RunConfig& config, std::size_t fold) {
  pruning::MlpExtractorFactory f;
  f.config = config.mlp;
  f.config.seed = derive_seed(config.seed, fold, "extractor");
  f.fine_tune = config.fine_tune;
  return f;
}

// Runs one fold. Errors are captured into the outcome (complete = false) so a
// failing fold does not take the others down.
inline FoldOutcome run_fold(const SourceData& src, const FoldPlan& plan, std::size_t fold, const RunConfig& config,
                            const FoldOptions& options) {
  FoldOutcome out;
  out.fold = fold;
  out.plan = plan;
  try {
    const PreparedFold pf = prepare_fold(src, plan, fold);
    out.n_train = pf.train.size();
    out.n_val = pf.val.size();
    out.n_test = pf.test.size();
    try {
      out.paris = pruning::run_paris(pf.train, pf.val, config.prune, extractor_factory(config, fold));
    } catch (const pruning::ParisAborted& e) {
      out.paris = e.partial();
      out.complete = false;
      out.error = e.what();
    }
    out.retained = out.paris.pruned.original_indices;
    std::sort(out.retained.begin(), out.retained.end());
    out.pruned_raw = src.data.retain({out.retained.begin(), out.retained.end()});
    if (!out.complete) return out;

    if (options.evaluate) {
      out.methods.push_back(train_and_score("full", pf.train, pf, config));
      out.methods.push_back(train_and_score("paris", out.paris.pruned, pf, config));
    }
    if (options.random_control) {
      const auto trajectory = out.paris.budget_trajectory();
      auto random_set = pruning::random_prune(pf.train, trajectory, derive_seed(config.seed, fold, "random"));
      out.methods.push_back(train_and_score("random", random_set, pf, config));
    }
  } catch (const std::exception& e) {
    out.complete = false;
    out.error = e.what();
  }
  return out;
}

inline std::vector<FoldPlan> plan_folds(const SourceData& src, const RunConfig& config) {
  try {
    return data::build_fold_plans(src.data, config.folds.n_test_groups, config.folds.n_val_groups);
  } catch (const data::InsufficientGroups& e) {
    throw ConfigError(std::string("fold settings do not fit the data: ") + e.what());
  }
}

inline std::vector<std::size_t> selected_folds(const RunConfig& config, std::size_t n_plans) {
  std::vector<std::size_t> ids = config.folds.only;
  if (ids.empty())
    for (std::size_t f = 0; f < n_plans; ++f) ids.push_back(f);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

}  // namespace paris::cli
