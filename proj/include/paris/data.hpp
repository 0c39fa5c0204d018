#pragma once

// Grouped regression datasets: CSV ingestion of grouped time series, sliding
// history windows, severity-ranked leave-one-group-out fold plans, training
// statistics for standardization, and a seeded long-tailed synthetic problem.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "paris/error.hpp"
#include "paris/linalg.hpp"

namespace paris::data {

using linalg::DenseMatrix;
using linalg::Vector;
using GroupId = std::int64_t;
using SampleId = std::int64_t;

class MissingColumn : public Error {
 public:
  explicit MissingColumn(const std::string& name) : Error("missing column: " + name), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class UnparseableRow : public Error {
 public:
  UnparseableRow(std::size_t line, const std::string& why)
      : Error("unparseable row at line " + std::to_string(line) + ": " + why), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyGroup : public Error {
 public:
  using Error::Error;
};

class InsufficientGroups : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Dataset.

// Affine standardization x -> (x - mean) / scale per input column, and the
// same for targets. Default-constructed statistics are the identity.
struct Normalization {
  Vector input_mean;
  Vector input_scale;
  double target_mean = 0.0;
  double target_scale = 1.0;

  bool is_identity() const {
    return input_mean.empty() && target_mean == 0.0 && target_scale == 1.0;
  }

  static Normalization fit(const DenseMatrix& inputs, std::span<const double> targets) {
    if (inputs.rows() == 0) throw InvalidArgument("Normalization::fit: empty data");
    Normalization n;
    n.input_mean.resize(inputs.cols());
    n.input_scale.resize(inputs.cols());
    for (std::size_t j = 0; j < inputs.cols(); ++j) {
      auto [m, s] = mean_sd(inputs.col(j));
      n.input_mean[j] = m;
      n.input_scale[j] = s;
    }
    auto [tm, ts] = mean_sd(targets);
    n.target_mean = tm;
    n.target_scale = ts;
    return n;
  }

  DenseMatrix normalize_inputs(const DenseMatrix& x) const {
    if (input_mean.empty()) return x;
    check_width(x);
    DenseMatrix out = x;
    for (std::size_t j = 0; j < x.cols(); ++j)
      for (double& v : out.col(j)) v = (v - input_mean[j]) / input_scale[j];
    return out;
  }

  DenseMatrix denormalize_inputs(const DenseMatrix& x) const {
    if (input_mean.empty()) return x;
    check_width(x);
    DenseMatrix out = x;
    for (std::size_t j = 0; j < x.cols(); ++j)
      for (double& v : out.col(j)) v = v * input_scale[j] + input_mean[j];
    return out;
  }

  Vector normalize_targets(std::span<const double> y) const {
    Vector out(y.begin(), y.end());
    for (double& v : out) v = (v - target_mean) / target_scale;
    return out;
  }

  Vector denormalize_targets(std::span<const double> y) const {
    Vector out(y.begin(), y.end());
    for (double& v : out) v = v * target_scale + target_mean;
    return out;
  }

 private:
  static std::pair<double, double> mean_sd(std::span<const double> v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    double sd = std::sqrt(ss / static_cast<double>(v.size()));
    if (!(sd > 1e-12)) sd = 1.0;  // constant column: centre only
    return {m, sd};
  }

  void check_width(const DenseMatrix& x) const {
    if (x.cols() != input_mean.size()) throw DimensionMismatch("Normalization: input width");
  }
};

struct GroupedDataset {
  DenseMatrix inputs;  // N x d_in
  Vector targets;
  std::vector<GroupId> group_ids;
  std::vector<SampleId> original_indices;
  std::vector<std::string> input_names;
  // The transformation already applied to inputs/targets (identity for raw data).
  Normalization normalization;

  std::size_t size() const { return targets.size(); }
  std::size_t input_dim() const { return inputs.cols(); }

  void validate() const {
    const std::size_t n = targets.size();
    if (inputs.rows() != n || group_ids.size() != n || original_indices.size() != n)
      throw DimensionMismatch("GroupedDataset: field lengths disagree");
    if (!input_names.empty() && input_names.size() != inputs.cols())
      throw DimensionMismatch("GroupedDataset: input_names width");
    std::set<SampleId> seen(original_indices.begin(), original_indices.end());
    if (seen.size() != n) throw InvalidArgument("GroupedDataset: duplicate original index");
    if (!inputs.all_finite()) throw linalg::NonFiniteValue("GroupedDataset: non-finite input");
    for (double t : targets)
      if (!std::isfinite(t)) throw linalg::NonFiniteValue("GroupedDataset: non-finite target");
  }

  GroupedDataset subset(std::span<const std::size_t> positions) const {
    GroupedDataset out;
    out.inputs = inputs.select_rows(positions);
    out.targets.reserve(positions.size());
    out.group_ids.reserve(positions.size());
    out.original_indices.reserve(positions.size());
    for (std::size_t p : positions) {
      out.targets.push_back(targets[p]);
      out.group_ids.push_back(group_ids[p]);
      out.original_indices.push_back(original_indices[p]);
    }
    out.input_names = input_names;
    out.normalization = normalization;
    return out;
  }

  // Rows whose original index is in `keep`, preserving order.
  GroupedDataset retain(const std::set<SampleId>& keep) const {
    std::vector<std::size_t> pos;
    for (std::size_t p = 0; p < size(); ++p)
      if (keep.contains(original_indices[p])) pos.push_back(p);
    return subset(pos);
  }

  GroupedDataset select_groups(const std::set<GroupId>& groups) const {
    std::vector<std::size_t> pos;
    for (std::size_t p = 0; p < size(); ++p)
      if (groups.contains(group_ids[p])) pos.push_back(p);
    return subset(pos);
  }

  std::vector<GroupId> groups() const {
    std::set<GroupId> g(group_ids.begin(), group_ids.end());
    return {g.begin(), g.end()};
  }

  GroupedDataset normalized(const Normalization& stats) const {
    if (!normalization.is_identity()) throw InvalidArgument("dataset is already normalized");
    GroupedDataset out = *this;
    out.inputs = stats.normalize_inputs(inputs);
    out.targets = stats.normalize_targets(targets);
    out.normalization = stats;
    return out;
  }

  GroupedDataset denormalized() const {
    GroupedDataset out = *this;
    out.inputs = normalization.denormalize_inputs(inputs);
    out.targets = normalization.denormalize_targets(targets);
    out.normalization = Normalization{};
    return out;
  }
};

// ---------------------------------------------------------------------------
// CSV ingestion.

struct CsvSchema {
  std::string group_column;
  std::string target_column;
  std::vector<std::string> feature_columns;
  char delimiter = ',';
  // Values with |v| >= threshold are fill values (e.g. 999.9 in OMNI data).
  std::map<std::string, double> sentinel_thresholds;
  // Throw UnparseableRow instead of skipping and counting.
  bool strict = false;
};

// A maximal run of consecutive kept rows of one group.
struct SeriesSegment {
  std::size_t first_line = 0;
  std::vector<double> features;  // length x n_features, row-major
  Vector targets;
  std::size_t length() const { return targets.size(); }
};

struct GroupSeries {
  GroupId id = 0;
  std::vector<SeriesSegment> segments;
  std::size_t length() const {
    std::size_t n = 0;
    for (const auto& s : segments) n += s.length();
    return n;
  }
};

struct TimeSeriesTable {
  std::vector<std::string> feature_names;
  std::vector<GroupSeries> groups;  // in order of first appearance
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t missing_rows = 0;
  std::size_t unparseable_rows = 0;
  std::vector<std::size_t> unparseable_lines;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

inline bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null";
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<GroupId> parse_group(std::string_view s) {
  GroupId v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace detail

inline TimeSeriesTable parse_csv(std::istream& in, const CsvSchema& schema) {
  if (schema.feature_columns.empty()) throw InvalidArgument("CsvSchema: no feature columns");
  std::string header;
  if (!std::getline(in, header)) throw EmptyGroup("CSV input is empty");
  const auto names = detail::split(header, schema.delimiter);
  auto find = [&](const std::string& col) {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (detail::trim(names[i]) == col) return i;
    throw MissingColumn(col);
  };
  const std::size_t group_col = find(schema.group_column);
  const std::size_t target_col = find(schema.target_column);
  std::vector<std::size_t> feat_cols;
  std::vector<double> feat_thresh;
  for (const auto& f : schema.feature_columns) {
    feat_cols.push_back(find(f));
    auto it = schema.sentinel_thresholds.find(f);
    feat_thresh.push_back(it == schema.sentinel_thresholds.end() ? std::numeric_limits<double>::infinity()
                                                                 : it->second);
  }
  const double target_thresh = schema.sentinel_thresholds.contains(schema.target_column)
                                   ? schema.sentinel_thresholds.at(schema.target_column)
                                   : std::numeric_limits<double>::infinity();

  TimeSeriesTable table;
  table.feature_names = schema.feature_columns;
  std::unordered_map<GroupId, std::size_t> slot;
  // Group of the previous file line when that line was kept; a segment only
  // continues across consecutive kept lines of the same group.
  std::optional<GroupId> prev_kept;
  std::size_t prev_line = 0;

  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    ++table.rows_read;
    const auto fields = detail::split(line, schema.delimiter);
    auto fail = [&](const std::string& why) {
      if (schema.strict) throw UnparseableRow(line_no, why);
      ++table.unparseable_rows;
      table.unparseable_lines.push_back(line_no);
      prev_kept.reset();
    };
    if (fields.size() != names.size()) {
      fail("expected " + std::to_string(names.size()) + " fields, got " + std::to_string(fields.size()));
      continue;
    }
    const auto gid = detail::parse_group(detail::trim(fields[group_col]));
    if (!gid) {
      fail("group id is not an integer");
      continue;
    }

    bool missing = false;
    bool bad = false;
    std::vector<double> row(feat_cols.size());
    auto read = [&](std::size_t col, double thresh, double& out) {
      const auto tok = detail::trim(fields[col]);
      if (detail::is_missing_token(tok)) {
        missing = true;
        return;
      }
      const auto v = detail::parse_double(tok);
      if (!v) {
        bad = true;
        return;
      }
      if (!std::isfinite(*v) || std::abs(*v) >= thresh) missing = true;
      out = *v;
    };
    for (std::size_t f = 0; f < feat_cols.size() && !bad; ++f) read(feat_cols[f], feat_thresh[f], row[f]);
    double target = 0.0;
    if (!bad) read(target_col, target_thresh, target);

    if (bad) {
      fail("non-numeric value");
      continue;
    }
    if (missing) {
      ++table.missing_rows;
      prev_kept.reset();
      continue;
    }

    auto [it, inserted] = slot.try_emplace(*gid, table.groups.size());
    if (inserted) table.groups.push_back(GroupSeries{*gid, {}});
    GroupSeries& g = table.groups[it->second];
    const bool contiguous = prev_kept == *gid && prev_line + 1 == line_no;
    if (!contiguous || g.segments.empty()) g.segments.push_back(SeriesSegment{line_no, {}, {}});
    auto& seg = g.segments.back();
    seg.features.insert(seg.features.end(), row.begin(), row.end());
    seg.targets.push_back(target);
    ++table.rows_kept;
    prev_kept = *gid;
    prev_line = line_no;
  }
  if (table.rows_kept == 0) throw EmptyGroup("CSV input contains no usable rows");
  return table;
}

inline TimeSeriesTable ingest_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path);
  return parse_csv(in, schema);
}

// ---------------------------------------------------------------------------
// Windowing.

struct WindowSpec {
  std::size_t history_len = 6;
  std::size_t horizon = 1;
  void validate() const {
    if (history_len < 1) throw InvalidArgument("WindowSpec: history_len must be >= 1");
  }
};

struct WindowResult {
  GroupedDataset dataset;
  std::vector<GroupId> skipped_groups;  // too short for a single window
};

// Input at time t is the feature rows t-history_len+1 .. t concatenated oldest
// first; the target is the target series at t+horizon. Windows never cross a
// segment, so they never span two groups or a dropped row. Original indices
// are assigned sequentially in (group appearance, time) order.
inline WindowResult make_windows(const TimeSeriesTable& table, const WindowSpec& spec) {
  spec.validate();
  const std::size_t nf = table.feature_names.size();
  const std::size_t width = nf * spec.history_len;
  const std::size_t span_len = spec.history_len + spec.horizon;

  std::vector<double> rows;  // row-major, converted at the end
  WindowResult out;
  GroupedDataset& ds = out.dataset;
  for (const auto& g : table.groups) {
    std::size_t produced = 0;
    for (const auto& seg : g.segments) {
      if (seg.length() < span_len) continue;
      const std::size_t count = seg.length() - span_len + 1;
      for (std::size_t w = 0; w < count; ++w) {
        const std::size_t t = w + spec.history_len - 1;
        for (std::size_t lag = 0; lag < spec.history_len; ++lag) {
          const std::size_t src = t + 1 - spec.history_len + lag;
          rows.insert(rows.end(), seg.features.begin() + static_cast<std::ptrdiff_t>(src * nf),
                      seg.features.begin() + static_cast<std::ptrdiff_t>((src + 1) * nf));
        }
        ds.targets.push_back(seg.targets[t + spec.horizon]);
        ds.group_ids.push_back(g.id);
        ds.original_indices.push_back(static_cast<SampleId>(ds.original_indices.size()));
      }
      produced += count;
    }
    if (produced == 0) out.skipped_groups.push_back(g.id);
  }
  ds.inputs = DenseMatrix(ds.targets.size(), width);
  for (std::size_t i = 0; i < ds.targets.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) ds.inputs(i, j) = rows[i * width + j];
  for (std::size_t lag = 0; lag < spec.history_len; ++lag) {
    const std::size_t back = spec.history_len - 1 - lag;
    for (const auto& name : table.feature_names)
      ds.input_names.push_back(back == 0 ? name + "[t]" : name + "[t-" + std::to_string(back) + "]");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Folds.

struct FoldPlan {
  GroupId test_group = 0;
  std::vector<GroupId> val_groups;
  std::vector<GroupId> train_groups;
};

// Severity of a group is its minimum target (most negative is most severe).
// Ranking: severity ascending, ties by group id ascending.
inline std::vector<GroupId> rank_groups_by_severity(const GroupedDataset& ds) {
  std::map<GroupId, double> severity;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto [it, inserted] = severity.try_emplace(ds.group_ids[i], ds.targets[i]);
    if (!inserted) it->second = std::min(it->second, ds.targets[i]);
  }
  std::vector<std::pair<double, GroupId>> order;
  for (auto [g, s] : severity) order.emplace_back(s, g);
  std::sort(order.begin(), order.end());
  std::vector<GroupId> out;
  for (auto [s, g] : order) out.push_back(g);
  return out;
}

inline std::vector<FoldPlan> build_fold_plans(const GroupedDataset& ds, std::size_t n_test_groups,
                                              std::size_t n_val_groups) {
  const auto ranked = rank_groups_by_severity(ds);
  if (n_test_groups < 1) throw InvalidArgument("build_fold_plans: n_test_groups must be >= 1");
  if (ranked.size() < n_test_groups || ranked.size() < n_val_groups + 2)
    throw InsufficientGroups("need at least " + std::to_string(std::max(n_test_groups, n_val_groups + 2)) +
                             " groups, have " + std::to_string(ranked.size()));
  std::vector<FoldPlan> plans;
  for (std::size_t t = 0; t < n_test_groups; ++t) {
    FoldPlan plan;
    plan.test_group = ranked[t];
    for (GroupId g : ranked) {
      if (g == plan.test_group) continue;
      if (plan.val_groups.size() < n_val_groups)
        plan.val_groups.push_back(g);
      else
        plan.train_groups.push_back(g);
    }
    std::sort(plan.train_groups.begin(), plan.train_groups.end());
    plans.push_back(std::move(plan));
  }
  return plans;
}

struct FoldData {
  GroupedDataset train;
  GroupedDataset val;
  GroupedDataset test;
};

inline FoldData split_fold(const GroupedDataset& ds, const FoldPlan& plan) {
  return {ds.select_groups({plan.train_groups.begin(), plan.train_groups.end()}),
          ds.select_groups({plan.val_groups.begin(), plan.val_groups.end()}),
          ds.select_groups({plan.test_group})};
}

// ---------------------------------------------------------------------------
// Synthetic long-tailed benchmark.

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t n = 5000;
  double tail_exponent = 2.0;  // Pareto shape of event amplitudes
  double noise_sd = 0.1;
  // Fraction of samples whose label reverts to the quiet (majority) regime.
  double corrupt_fraction = 0.0;
  std::size_t event_length = 50;
};

struct SyntheticDataset {
  GroupedDataset data;
  Vector clean_targets;
  std::vector<bool> corrupted;
};

inline constexpr std::size_t kSyntheticInputs = 4;

// Quiet-regime part of the response, a smooth function of the ambient drivers.
inline double synthetic_quiet_response(std::span<const double> x) {
  return 0.5 * x[1] + 0.3 * std::sin(2.0 * x[2]);
}

// Full noiseless response. x[0] is the storm driver (>= 0), x[1..2] ambient
// drivers, x[3] a nuisance input.
inline double synthetic_response(std::span<const double> x) {
  return synthetic_quiet_response(x) - 3.0 * x[0] * (1.0 + 0.25 * std::tanh(x[1]));
}

// Events of `event_length` samples; each event draws an amplitude excess
// e = Pareto(tail_exponent) - 1 and a Gaussian time profile, giving a storm
// driver e * profile(t) that produces heavy-tailed negative targets.
inline SyntheticDataset generate_synthetic_longtail(const SyntheticSpec& spec) {
  if (spec.n < 100) throw InvalidArgument("generate_synthetic_longtail: n must be >= 100");
  if (!(spec.tail_exponent > 0.0)) throw InvalidArgument("tail_exponent must be positive");
  if (spec.corrupt_fraction < 0.0 || spec.corrupt_fraction >= 1.0)
    throw InvalidArgument("corrupt_fraction must be in [0, 1)");
  if (spec.event_length < 2) throw InvalidArgument("event_length must be >= 2");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticDataset out;
  GroupedDataset& ds = out.data;
  ds.inputs = DenseMatrix(spec.n, kSyntheticInputs);
  ds.input_names = {"storm_driver", "ambient_1", "ambient_2", "nuisance"};
  ds.targets.resize(spec.n);
  out.clean_targets.resize(spec.n);
  out.corrupted.assign(spec.n, false);

  std::size_t i = 0;
  GroupId event = 0;
  while (i < spec.n) {
    const std::size_t len = std::min(spec.event_length, spec.n - i);
    const double amplitude = std::pow(1.0 - unif(rng), -1.0 / spec.tail_exponent);
    const double excess = amplitude - 1.0;
    const double peak = unif(rng) * static_cast<double>(len - 1);
    const double width = std::max(1.0, static_cast<double>(spec.event_length) / 6.0);
    for (std::size_t t = 0; t < len; ++t, ++i) {
      const double z = (static_cast<double>(t) - peak) / width;
      double x[kSyntheticInputs];
      x[0] = excess * std::exp(-z * z);
      x[1] = gauss(rng);
      x[2] = gauss(rng);
      x[3] = gauss(rng);
      for (std::size_t j = 0; j < kSyntheticInputs; ++j) ds.inputs(i, j) = x[j];
      const double noise = spec.noise_sd * gauss(rng);
      out.clean_targets[i] = synthetic_response(x) + noise;
      ds.targets[i] = out.clean_targets[i];
      if (spec.corrupt_fraction > 0.0 && unif(rng) < spec.corrupt_fraction) {
        out.corrupted[i] = true;
        ds.targets[i] = synthetic_quiet_response(x) + noise;
      }
      ds.group_ids.push_back(event);
      ds.original_indices.push_back(static_cast<SampleId>(i));
    }
    ++event;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Canonical dataset dump: original_index, group_id, target, inputs...

inline void write_dataset_csv(const GroupedDataset& ds, std::ostream& out) {
  out << "original_index,group_id,target";
  for (std::size_t j = 0; j < ds.input_dim(); ++j)
    out << ',' << (j < ds.input_names.size() ? ds.input_names[j] : "x" + std::to_string(j));
  out << '\n';
  out.precision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    out << ds.original_indices[i] << ',' << ds.group_ids[i] << ',' << ds.targets[i];
    for (std::size_t j = 0; j < ds.input_dim(); ++j) out << ',' << ds.inputs(i, j);
    out << '\n';
  }
}

inline GroupedDataset read_dataset_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw EmptyGroup("dataset dump is empty");
  const auto names = detail::split(header, ',');
  if (names.size() < 4 || detail::trim(names[0]) != "original_index" ||
      detail::trim(names[1]) != "group_id" || detail::trim(names[2]) != "target")
    throw MissingColumn("original_index,group_id,target");
  GroupedDataset ds;
  for (std::size_t j = 3; j < names.size(); ++j) ds.input_names.emplace_back(detail::trim(names[j]));
  std::vector<double> rows;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split(line, ',');
    if (f.size() != names.size()) throw UnparseableRow(line_no, "field count");
    const auto idx = detail::parse_group(detail::trim(f[0]));
    const auto gid = detail::parse_group(detail::trim(f[1]));
    const auto y = detail::parse_double(detail::trim(f[2]));
    if (!idx || !gid || !y) throw UnparseableRow(line_no, "non-numeric value");
    ds.original_indices.push_back(*idx);
    ds.group_ids.push_back(*gid);
    ds.targets.push_back(*y);
    for (std::size_t j = 3; j < f.size(); ++j) {
      const auto v = detail::parse_double(detail::trim(f[j]));
      if (!v) throw UnparseableRow(line_no, "non-numeric value");
      rows.push_back(*v);
    }
  }
  const std::size_t width = ds.input_names.size();
  ds.inputs = DenseMatrix(ds.targets.size(), width);
  for (std::size_t i = 0; i < ds.targets.size(); ++i)
    for (std::size_t j = 0; j < width; ++j) ds.inputs(i, j) = rows[i * width + j];
  ds.validate();
  return ds;
}

}  // namespace paris::data
