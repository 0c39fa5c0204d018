#pragma once

// Report emission: JSON documents, tidy CSV metric tables, index lists,
// atomic file writes and the run manifest.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "paris/cli/config.hpp"
#include "paris/cli/pipeline.hpp"

namespace paris::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Files.

// Writes `content` to `path` via a temporary sibling and a rename, so readers
// never observe a half-written file.
inline void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Artifact {
  std::string path;  // relative to the output directory
  std::string fnv1a64;
  std::size_t bytes = 0;
};

// Collects every file a run writes, for the manifest. Thread-safe.
class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }

  void write(const std::string& relative, const std::string& content) {
    write_file_atomic(root_ / relative, content);
    std::lock_guard<std::mutex> lock(mu_);
    artifacts_.push_back({relative, hex64(fnv1a64(content)), content.size()});
  }

  std::vector<Artifact> artifacts() const {
    std::lock_guard<std::mutex> lock(mu_);
    auto a = artifacts_;
    std::sort(a.begin(), a.end(), [](const Artifact& x, const Artifact& y) { return x.path < y.path; });
    return a;
  }

 private:
  fs::path root_;
  mutable std::mutex mu_;
  std::vector<Artifact> artifacts_;
};

// ---------------------------------------------------------------------------
// JSON conversions.

inline Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json crmse_json(const metrics::ConditionalRmse& c) {
  return {{"crmse", optional_number(c.value)}, {"n_samples", c.n_samples}, {"empty", c.empty()}};
}

inline Json metric_report_json(const metrics::MetricReport& r) {
  Json j;
  j["rmse"] = r.rmse;
  j["n_samples"] = r.n_samples;
  j["crmse_by_threshold"] = Json::array();
  for (const auto& t : r.crmse_by_threshold) {
    Json e = crmse_json(t.crmse);
    e["threshold"] = t.threshold;
    j["crmse_by_threshold"].push_back(e);
  }
  j["crmse_by_percentile"] = Json::array();
  for (const auto& p : r.crmse_by_percentile) {
    Json e = crmse_json(p.crmse);
    e["percentile"] = p.percentile;
    e["threshold"] = p.threshold;
    j["crmse_by_percentile"].push_back(e);
  }
  j["extreme_events"] = Json::array();
  for (const auto& x : r.extreme_events)
    j["extreme_events"].push_back(
        {{"index", x.index}, {"y_true", x.y_true}, {"y_pred", x.y_pred}, {"abs_error", x.abs_error}});
  return j;
}

inline Json split_score_json(const SplitScore& s, double tail_percentile) {
  Json j = metric_report_json(s.report);
  j["tail"] = {{"percentile", tail_percentile},
               {"crmse", std::isnan(s.tail_crmse) ? Json(nullptr) : Json(s.tail_crmse)},
               {"n_samples", s.n_tail}};
  return j;
}

inline Json method_json(const MethodResult& m, double tail_percentile) {
  return {{"method", m.method},
          {"n_train", m.n_train},
          {"val", split_score_json(m.val, tail_percentile)},
          {"test", split_score_json(m.test, tail_percentile)}};
}

inline Json cycle_json(const pruning::CycleSummary& c) {
  return {{"cycle", c.cycle},
          {"retained_before", c.retained_before},
          {"k_requested", c.k_requested},
          {"k_promoted", c.k_promoted},
          {"pruned", c.pruned},
          {"stopped_early", c.stopped_early},
          {"lambda", c.lambda},
          {"lambda_fallback", c.lambda_fallback},
          {"lambda_raw", std::isfinite(c.lambda_raw) ? Json(c.lambda_raw) : Json(nullptr)},
          {"head_discrepancy", c.head_discrepancy},
          {"val_mse_before", c.val_mse_before},
          {"val_mse_after", c.val_mse_after},
          {"refactorizations", c.refactorizations},
          {"extractor_epochs", c.extractor_epochs},
          {"extractor_val_mse", c.extractor_val_mse}};
}

inline Json trace_json(const pruning::PruneTrace& trace) {
  Json steps = Json::array();
  for (const auto& s : trace)
    steps.push_back({{"cycle", s.cycle},
                     {"k_star", s.k_star},
                     {"v_star", s.v_star},
                     {"delta_loss", s.delta_loss},
                     {"residual_before", s.residual_before},
                     {"residual_after", s.residual_after},
                     {"refactorized", s.refactorizations > 0}});
  return steps;
}

inline Json fold_json(const FoldOutcome& f, double tail_percentile) {
  Json j;
  j["fold"] = f.fold;
  j["complete"] = f.complete;
  if (!f.complete) j["error"] = f.error;
  j["test_group"] = f.plan.test_group;
  j["val_groups"] = f.plan.val_groups;
  j["n_train_groups"] = f.plan.train_groups.size();
  j["n_train"] = f.n_train;
  j["n_val"] = f.n_val;
  j["n_test"] = f.n_test;
  j["n_retained"] = f.retained.size();
  j["n_pruned"] = f.paris.pruned_indices.size();
  j["pruned_fraction"] = f.pruned_fraction();
  j["stalled"] = f.paris.stalled;
  j["budget_trajectory"] = f.paris.budget_trajectory();
  j["cycles"] = Json::array();
  for (const auto& c : f.paris.cycles) j["cycles"].push_back(cycle_json(c));
  j["methods"] = Json::array();
  for (const auto& m : f.methods) j["methods"].push_back(method_json(m, tail_percentile));
  return j;
}

// ---------------------------------------------------------------------------
// Aggregates.

struct MeanSd {
  double mean = std::nan("");
  double sd = std::nan("");  // sample standard deviation; 0 for a single value
  std::size_t n = 0;
};

inline MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd r;
  std::vector<double> x;
  for (double d : v)
    if (std::isfinite(d)) x.push_back(d);
  r.n = x.size();
  if (x.empty()) return r;
  r.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double d : x) ss += (d - r.mean) * (d - r.mean);
  r.sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
  return r;
}

inline Json mean_sd_json(const MeanSd& m) {
  if (m.n == 0) return {{"mean", nullptr}, {"sd", nullptr}, {"n", 0}};
  return {{"mean", m.mean}, {"sd", m.sd}, {"n", m.n}};
}

inline std::vector<std::string> method_names(const std::vector<FoldOutcome>& folds) {
  std::vector<std::string> names;
  for (const auto& f : folds)
    for (const auto& m : f.methods)
      if (std::find(names.begin(), names.end(), m.method) == names.end()) names.push_back(m.method);
  return names;
}

// Mean +/- sd across folds of the per-fold quantities.
inline Json aggregate_json(const std::vector<FoldOutcome>& folds) {
  Json j;
  std::vector<double> frac;
  for (const auto& f : folds)
    if (f.complete) frac.push_back(f.pruned_fraction());
  j["pruned_fraction"] = mean_sd_json(mean_sd(frac));
  j["methods"] = Json::object();
  for (const auto& name : method_names(folds)) {
    std::vector<double> vr, vt, tr, tt;
    for (const auto& f : folds)
      if (const auto* m = f.method(name)) {
        vr.push_back(m->val.report.rmse);
        vt.push_back(m->val.tail_crmse);
        tr.push_back(m->test.report.rmse);
        tt.push_back(m->test.tail_crmse);
      }
    j["methods"][name] = {{"val_rmse", mean_sd_json(mean_sd(vr))},
                          {"val_tail_crmse", mean_sd_json(mean_sd(vt))},
                          {"test_rmse", mean_sd_json(mean_sd(tr))},
                          {"test_tail_crmse", mean_sd_json(mean_sd(tt))}};
  }
  return j;
}

// Name of the method with the smallest finite value; ties go to the earlier one.
inline std::string winner(const std::vector<std::pair<std::string, double>>& values) {
  std::string best;
  double best_v = std::numeric_limits<double>::infinity();
  for (const auto& [name, v] : values)
    if (std::isfinite(v) && v < best_v) {
      best_v = v;
      best = name;
    }
  return best;
}

// Per-fold comparison grid on the test split plus an aggregate row.
inline Json benchmark_grid_json(const std::vector<FoldOutcome>& folds) {
  const auto names = method_names(folds);
  Json rows = Json::array();
  std::map<std::string, std::vector<double>> col_rmse, col_tail;
  for (const auto& f : folds) {
    Json row;
    row["fold"] = f.fold;
    row["complete"] = f.complete;
    std::vector<std::pair<std::string, double>> rm, tl;
    for (const auto& name : names) {
      const auto* m = f.method(name);
      if (!m) continue;
      row[name] = {{"rmse", m->test.report.rmse},
                   {"tail_crmse", std::isnan(m->test.tail_crmse) ? Json(nullptr) : Json(m->test.tail_crmse)},
                   {"n_train", m->n_train}};
      rm.emplace_back(name, m->test.report.rmse);
      tl.emplace_back(name, m->test.tail_crmse);
      col_rmse[name].push_back(m->test.report.rmse);
      col_tail[name].push_back(m->test.tail_crmse);
    }
    row["winner"] = {{"rmse", winner(rm)}, {"tail_crmse", winner(tl)}};
    rows.push_back(row);
  }
  Json agg;
  std::vector<std::pair<std::string, double>> rm, tl;
  for (const auto& name : names) {
    const MeanSd r = mean_sd(col_rmse[name]);
    const MeanSd t = mean_sd(col_tail[name]);
    agg[name] = {{"rmse", mean_sd_json(r)}, {"tail_crmse", mean_sd_json(t)}};
    rm.emplace_back(name, r.mean);
    tl.emplace_back(name, t.mean);
  }
  agg["winner"] = {{"rmse", winner(rm)}, {"tail_crmse", winner(tl)}};
  return {{"split", "test"}, {"methods", names}, {"rows", rows}, {"aggregate", agg}};
}

// ---------------------------------------------------------------------------
// Tidy CSV: one row per (fold, method, split, metric).

inline std::string csv_number(const Json& v) {
  if (v.is_null()) return "";
  std::ostringstream s;
  s.precision(17);
  s << v.get<double>();
  return s.str();
}

// Renders every method score found under report["folds"][*]["methods"].
inline std::string tidy_metrics_csv(const Json& report) {
  std::ostringstream out;
  out << "fold,method,split,metric,key,value,n_samples\n";
  if (!report.contains("folds")) return out.str();
  for (const auto& f : report.at("folds")) {
    if (!f.contains("methods")) continue;
    const std::string fold = f.contains("fold") ? f.at("fold").dump() : "";
    for (const auto& m : f.at("methods")) {
      const std::string method = m.at("method").get<std::string>();
      for (const char* split : {"val", "test"}) {
        if (!m.contains(split)) continue;
        const Json& s = m.at(split);
        const std::string prefix = fold + "," + method + "," + split + ",";
        out << prefix << "rmse,," << csv_number(s.at("rmse")) << ',' << s.at("n_samples").dump() << '\n';
        for (const auto& t : s.at("crmse_by_threshold"))
          out << prefix << "crmse_threshold," << csv_number(t.at("threshold")) << ',' << csv_number(t.at("crmse"))
              << ',' << t.at("n_samples").dump() << '\n';
        for (const auto& p : s.at("crmse_by_percentile"))
          out << prefix << "crmse_percentile," << csv_number(p.at("percentile")) << ','
              << csv_number(p.at("crmse")) << ',' << p.at("n_samples").dump() << '\n';
        std::size_t rank = 1;
        for (const auto& e : s.at("extreme_events"))
          out << prefix << "extreme_abs_error," << rank++ << ',' << csv_number(e.at("abs_error")) << ",1\n";
      }
    }
  }
  return out.str();
}

// Benchmark grid as a flat table (aggregate row uses fold "mean" and "sd").
inline std::string benchmark_grid_csv(const Json& grid) {
  std::ostringstream out;
  out << "fold,method,rmse,tail_crmse,winner_rmse,winner_tail_crmse\n";
  for (const auto& row : grid.at("rows"))
    for (const auto& name : grid.at("methods")) {
      const std::string n = name.get<std::string>();
      if (!row.contains(n)) continue;
      out << row.at("fold").dump() << ',' << n << ',' << csv_number(row.at(n).at("rmse")) << ','
          << csv_number(row.at(n).at("tail_crmse")) << ',' << (row.at("winner").at("rmse") == n ? 1 : 0) << ','
          << (row.at("winner").at("tail_crmse") == n ? 1 : 0) << '\n';
    }
  const Json& agg = grid.at("aggregate");
  for (const char* stat : {"mean", "sd"})
    for (const auto& name : grid.at("methods")) {
      const std::string n = name.get<std::string>();
      out << stat << ',' << n << ',' << csv_number(agg.at(n).at("rmse").at(stat)) << ','
          << csv_number(agg.at(n).at("tail_crmse").at(stat)) << ','
          << (std::string(stat) == "mean" && agg.at("winner").at("rmse") == n ? 1 : 0) << ','
          << (std::string(stat) == "mean" && agg.at("winner").at("tail_crmse") == n ? 1 : 0) << '\n';
    }
  return out.str();
}

inline std::string index_list(const std::vector<SampleId>& ids) {
  std::ostringstream out;
  for (auto id : ids) out << id << '\n';
  return out.str();
}

inline Json manifest_json(const RunConfig& config, const std::string& command,
                          const std::vector<Artifact>& artifacts) {
  Json j;
  j["command"] = command;
  j["config_hash"] = config_hash(config);
  j["seed"] = config.seed;
  j["checksum"] = "fnv1a64";
  j["artifacts"] = Json::array();
  for (const auto& a : artifacts)
    j["artifacts"].push_back({{"path", a.path}, {"fnv1a64", a.fnv1a64}, {"bytes", a.bytes}});
  return j;
}

}  // namespace paris::cli
