#pragma once

// Error metrics for long-tailed regression. "Severe" means small (most
// negative) true values, so conditional metrics look at the lower tail.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "paris/error.hpp"

namespace paris::metrics {

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

inline void check_lengths(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size()) throw LengthMismatch("metric inputs differ in length");
}

inline double rmse(std::span<const double> y_true, std::span<const double> y_pred) {
  check_lengths(y_true, y_pred);
  if (y_true.empty()) throw InvalidArgument("rmse: empty input");
  double ss = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) ss += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
  return std::sqrt(ss / static_cast<double>(y_true.size()));
}

// RMSE over a subset; `value` is empty when the subset is.
struct ConditionalRmse {
  std::optional<double> value;
  std::size_t n_samples = 0;
  bool empty() const { return n_samples == 0; }
};

// RMSE over samples with y_true <= threshold.
inline ConditionalRmse conditional_rmse(std::span<const double> y_true, std::span<const double> y_pred,
                                        double threshold) {
  check_lengths(y_true, y_pred);
  ConditionalRmse out;
  double ss = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i)
    if (y_true[i] <= threshold) {
      ss += (y_true[i] - y_pred[i]) * (y_true[i] - y_pred[i]);
      ++out.n_samples;
    }
  if (out.n_samples > 0) out.value = std::sqrt(ss / static_cast<double>(out.n_samples));
  return out;
}

// q-th percentile (q in [0, 100]) with linear interpolation between order
// statistics at rank (n - 1) q / 100.
inline double percentile(std::span<const double> values, double q) {
  if (values.empty()) throw InvalidArgument("percentile: empty input");
  if (!(q >= 0.0 && q <= 100.0)) throw InvalidArgument("percentile: q outside [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * q / 100.0;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct PercentileRmse {
  double percentile = 0.0;
  double threshold = 0.0;
  ConditionalRmse crmse;
};

inline PercentileRmse conditional_rmse_percentile(std::span<const double> y_true, std::span<const double> y_pred,
                                                  double q) {
  check_lengths(y_true, y_pred);
  if (!(q > 0.0 && q <= 100.0)) throw InvalidArgument("conditional_rmse_percentile: q outside (0, 100]");
  PercentileRmse out;
  out.percentile = q;
  out.threshold = percentile(y_true, q);
  out.crmse = conditional_rmse(y_true, y_pred, out.threshold);
  return out;
}

struct ExtremeEventError {
  std::size_t index = 0;
  double y_true = 0.0;
  double y_pred = 0.0;
  double abs_error = 0.0;
};

// The n most severe (smallest) true values, most severe first; ties keep the
// lower index first.
inline std::vector<ExtremeEventError> extreme_event_errors(std::span<const double> y_true,
                                                           std::span<const double> y_pred, std::size_t n) {
  check_lengths(y_true, y_pred);
  if (n > y_true.size()) throw InvalidArgument("extreme_event_errors: n exceeds sample count");
  std::vector<std::size_t> idx(y_true.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return y_true[a] < y_true[b]; });
  std::vector<ExtremeEventError> out;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = idx[k];
    out.push_back({i, y_true[i], y_pred[i], std::abs(y_true[i] - y_pred[i])});
  }
  return out;
}

struct ThresholdRmse {
  double threshold = 0.0;
  ConditionalRmse crmse;
};

struct MetricReport {
  double rmse = 0.0;
  std::size_t n_samples = 0;
  std::vector<ThresholdRmse> crmse_by_threshold;
  std::vector<PercentileRmse> crmse_by_percentile;
  std::vector<ExtremeEventError> extreme_events;
};

inline const std::vector<double>& default_percentiles() {
  static const std::vector<double> p{1, 2, 5, 10, 20, 50};
  return p;
}

// Evenly spaced thresholds from min(y_true) up to its median.
inline std::vector<double> default_thresholds(std::span<const double> y_true, std::size_t count = 20) {
  if (y_true.empty() || count == 0) return {};
  const double lo = *std::min_element(y_true.begin(), y_true.end());
  const double hi = percentile(y_true, 50.0);
  std::vector<double> t;
  if (count == 1 || hi <= lo) return {hi};
  for (std::size_t k = 0; k < count; ++k)
    t.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1));
  return t;
}

struct MetricOptions {
  std::vector<double> percentiles = default_percentiles();
  std::vector<double> thresholds;  // empty: default_thresholds
  std::size_t n_extreme = 10;
};

inline MetricReport evaluate(std::span<const double> y_true, std::span<const double> y_pred,
                             const MetricOptions& options = {}) {
  MetricReport r;
  r.rmse = rmse(y_true, y_pred);
  r.n_samples = y_true.size();
  const auto thresholds = options.thresholds.empty() ? default_thresholds(y_true) : options.thresholds;
  for (double t : thresholds) r.crmse_by_threshold.push_back({t, conditional_rmse(y_true, y_pred, t)});
  for (double q : options.percentiles) r.crmse_by_percentile.push_back(conditional_rmse_percentile(y_true, y_pred, q));
  r.extreme_events = extreme_event_errors(y_true, y_pred, std::min(options.n_extreme, y_true.size()));
  return r;
}

}  // namespace paris::metrics
