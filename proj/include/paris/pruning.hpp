#pragma once

// Greedy representer-guided pruning.
//
// Inner loop (features fixed): find the validation point v* with the largest
// squared residual r, score every surviving training point k by the change in
// that point's squared residual if column k of S were zeroed,
//     delta_k = 2 r S[v*, k] + S[v*, k]^2,
// remove the minimizer, downdate the Gram factor by phi_k, re-solve w* and
// refresh alpha and the residuals. Outer loop: retrain the feature extractor
// on the survivors, pick lambda, rebuild the representer state and run
// another inner cycle, until the pruning budget is spent.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "paris/data.hpp"
#include "paris/error.hpp"
#include "paris/features.hpp"
#include "paris/linalg.hpp"
#include "paris/representer.hpp"

namespace paris::pruning {

using data::GroupedDataset;
using data::SampleId;
using linalg::DenseMatrix;
using linalg::Vector;
using representer::RepresenterState;

class DatasetExhausted : public Error {
 public:
  using Error::Error;
};

enum class PositiveDeltaPolicy { prune_anyway, stop_cycle };

struct LambdaPolicy {
  bool estimate = true;      // closed-form estimate from the trained head
  double fixed_value = 0.0;  // used when estimate == false

  static LambdaPolicy estimated() { return {}; }
  static LambdaPolicy fixed(double v) { return {false, v}; }
};

struct PruneConfig {
  double prune_fraction_per_cycle = 0.25;  // p
  double total_prune_fraction = 0.75;      // P_max
  LambdaPolicy lambda;
  PositiveDeltaPolicy positive_delta_policy = PositiveDeltaPolicy::prune_anyway;

  void validate() const {
    const double p = prune_fraction_per_cycle;
    const double pmax = total_prune_fraction;
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("prune_fraction_per_cycle must be in (0, 1)");
    if (!(pmax > 0.0 && pmax < 1.0)) throw InvalidArgument("total_prune_fraction must be in (0, 1)");
    if (p > pmax) throw InvalidArgument("prune_fraction_per_cycle must not exceed total_prune_fraction");
    if (!lambda.estimate && !(lambda.fixed_value > 0.0))
      throw InvalidArgument("fixed lambda must be positive");
  }
};

struct DeletionResidualRow {
  std::size_t v_star = 0;
  double r_vstar = 0.0;
  std::vector<std::size_t> positions;  // surviving positions, ascending
  Vector delta;                        // aligned with positions
};

// Scores every surviving training point against validation point v_star.
inline DeletionResidualRow deletion_residuals(const RepresenterState& state, std::size_t v_star) {
  if (v_star >= state.n_val()) throw InvalidArgument("deletion_residuals: v_star out of range");
  DeletionResidualRow row;
  row.v_star = v_star;
  row.r_vstar = state.residuals[v_star];
  row.positions = state.active;
  row.delta.resize(state.active.size());
  const double r = row.r_vstar;
  for (std::size_t a = 0; a < state.active.size(); ++a) {
    const double s = state.influence(v_star, state.active[a]);
    row.delta[a] = 2.0 * r * s + s * s;
  }
  return row;
}

// argmax_i r_i^2, lowest index on ties.
inline std::size_t select_hardest_validation(std::span<const double> residuals) {
  if (residuals.empty()) throw InvalidArgument("select_hardest_validation: no validation residuals");
  std::size_t best = 0;
  double best_sq = residuals[0] * residuals[0];
  for (std::size_t i = 1; i < residuals.size(); ++i) {
    const double sq = residuals[i] * residuals[i];
    if (sq > best_sq) {
      best_sq = sq;
      best = i;
    }
  }
  return best;
}

struct PruneStep {
  std::size_t cycle = 0;
  std::size_t v_star = 0;
  std::size_t position = 0;  // row within the cycle's training matrix
  SampleId k_star = 0;       // original dataset index (filled by run_paris; else the position)
  double delta_loss = 0.0;
  double residual_before = 0.0;
  double residual_after = 0.0;
  std::size_t refactorizations = 0;
};

using PruneTrace = std::vector<PruneStep>;

struct Removal {
  RepresenterState state;
  bool refactorized = false;
};

// State after dropping one surviving position: Cholesky downdate by phi_k
// (full refactorization of the reduced Gram matrix if the downdate breaks
// definiteness), then w*, alpha and residuals from the new factor.
inline Removal remove_training_point(const RepresenterState& state, std::size_t position) {
  auto it = std::lower_bound(state.active.begin(), state.active.end(), position);
  if (it == state.active.end() || *it != position)
    throw InvalidArgument("remove_training_point: position is not active");
  if (state.n_active() < 2) throw DatasetExhausted("cannot prune the last training point");

  const DenseMatrix& phi = *state.phi_train;
  const Vector phi_k = phi.row(position);
  const double y_k = (*state.y_train)[position];

  Removal out{state, false};
  RepresenterState& s = out.state;
  s.active.erase(s.active.begin() + (it - state.active.begin()));
  for (std::size_t d = 0; d < s.rhs.size(); ++d) s.rhs[d] -= y_k * phi_k[d];
  try {
    s.chol = linalg::cholesky_downdate(state.chol, phi_k);
  } catch (const linalg::DowndateBreaksPD&) {
    s.chol = linalg::cholesky_factorize(linalg::gram(phi.select_rows(s.active), s.lambda));
    out.refactorized = true;
  }
  s.w_star = linalg::solve_with_factor(s.chol, s.rhs);
  representer::refresh_dual(s);
  return out;
}

struct StepResult {
  RepresenterState state;
  std::optional<PruneStep> step;  // empty when the stop_cycle policy declined to prune
};

inline StepResult prune_one(const RepresenterState& state, const PruneConfig& config) {
  if (state.n_active() < 2) throw DatasetExhausted("fewer than two training points remain");
  const std::size_t v_star = select_hardest_validation(state.residuals);
  const DeletionResidualRow row = deletion_residuals(state, v_star);

  std::size_t best = 0;
  for (std::size_t a = 1; a < row.delta.size(); ++a)
    if (row.delta[a] < row.delta[best]) best = a;  // strict: lowest position wins ties

  if (config.positive_delta_policy == PositiveDeltaPolicy::stop_cycle && row.delta[best] >= 0.0)
    return {state, std::nullopt};

  PruneStep step;
  step.v_star = v_star;
  step.position = row.positions[best];
  step.k_star = static_cast<SampleId>(step.position);
  step.delta_loss = row.delta[best];
  step.residual_before = row.r_vstar;
  Removal removal = remove_training_point(state, step.position);
  step.residual_after = removal.state.residuals[v_star];
  step.refactorizations = removal.refactorized ? 1 : 0;
  return {std::move(removal.state), step};
}

struct CycleBudget {
  std::size_t k = 0;
  bool promoted = false;  // floor(p * n) was 0 and has been raised to 1
};

// K = floor(p * n_current), promoted to 1 when the floor underflows.
inline CycleBudget cycle_budget(std::size_t n_current, double p) {
  CycleBudget b;
  b.k = static_cast<std::size_t>(std::floor(p * static_cast<double>(n_current)));
  if (b.k == 0) {
    b.k = 1;
    b.promoted = true;
  }
  return b;
}

// Smallest retained count allowed by P_max: ceil((1 - P_max) * N).
inline std::size_t minimum_retained(std::size_t n_original, double total_prune_fraction) {
  const double keep = (1.0 - total_prune_fraction) * static_cast<double>(n_original);
  return static_cast<std::size_t>(std::ceil(keep - 1e-9));
}

// Per-cycle K, additionally capped so the run never prunes past P_max.
inline CycleBudget cycle_budget(std::size_t n_current, std::size_t n_original, const PruneConfig& config) {
  CycleBudget b = cycle_budget(n_current, config.prune_fraction_per_cycle);
  const std::size_t floor_n = minimum_retained(n_original, config.total_prune_fraction);
  const std::size_t room = n_current > floor_n ? n_current - floor_n : 0;
  b.k = std::min(b.k, room);
  return b;
}

struct CycleResult {
  RepresenterState state;
  PruneTrace trace;
  bool stopped_early = false;
};

inline CycleResult run_inner_cycle(const RepresenterState& state, const PruneConfig& config, std::size_t k) {
  CycleResult out{state, {}, false};
  for (std::size_t i = 0; i < k; ++i) {
    StepResult r = prune_one(out.state, config);
    if (!r.step) {
      out.stopped_early = true;
      break;
    }
    out.state = std::move(r.state);
    out.trace.push_back(*r.step);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outer loop.

struct CycleSummary {
  std::size_t cycle = 0;
  std::size_t retained_before = 0;
  std::size_t k_requested = 0;
  bool k_promoted = false;
  std::size_t pruned = 0;
  bool stopped_early = false;
  double lambda = 0.0;
  bool lambda_fallback = false;
  double lambda_raw = 0.0;
  // ||[w_nn; b_nn] - w*|| / ||w*|| for the freshly trained head.
  double head_discrepancy = 0.0;
  double val_mse_before = 0.0;  // ridge head, start of cycle
  double val_mse_after = 0.0;   // ridge head, end of cycle (same features)
  std::size_t refactorizations = 0;
  std::size_t extractor_epochs = 0;
  double extractor_val_mse = 0.0;
};

struct ParisResult {
  GroupedDataset pruned;  // surviving training rows
  std::vector<SampleId> pruned_indices;  // in removal order
  PruneTrace trace;
  std::vector<CycleSummary> cycles;
  std::size_t n_original = 0;
  bool stalled = false;  // a cycle removed nothing before the budget was met

  double retained_fraction() const {
    return n_original == 0 ? 0.0 : static_cast<double>(pruned.size()) / static_cast<double>(n_original);
  }
  // Per-cycle removal counts; the random-pruning control replays these.
  std::vector<std::size_t> budget_trajectory() const {
    std::vector<std::size_t> t;
    for (const auto& c : cycles) t.push_back(c.pruned);
    return t;
  }
};

class ParisAborted : public Error {
 public:
  ParisAborted(const std::string& what, ParisResult partial)
      : Error("pruning aborted: " + what), partial_(std::move(partial)) {}
  const ParisResult& partial() const { return partial_; }

 private:
  ParisResult partial_;
};

// Produces the cycle's feature extractor from the current retained set. The
// previous cycle's model is passed for fine-tuning (null on the first cycle).
using ExtractorFactory = std::function<features::TrainedMlp(const GroupedDataset& current, const GroupedDataset& val,
                                                            std::size_t cycle, const features::Mlp* previous)>;

struct MlpExtractorFactory {
  features::MlpConfig config;
  bool fine_tune = false;

  features::TrainedMlp operator()(const GroupedDataset& current, const GroupedDataset& val, std::size_t cycle,
                                  const features::Mlp* previous) const {
    features::MlpConfig c = config;
    c.seed = config.seed + 7919 * cycle;  // fresh seed per cycle
    return features::train_mlp(current, val, c, fine_tune ? previous : nullptr);
  }
};

// Chooses lambda for a cycle from the trained head (or the fixed value).
inline representer::LambdaEstimate choose_lambda(const PruneConfig& config, const DenseMatrix& phi_train,
                                                 std::span<const double> y, const features::Mlp& model) {
  if (!config.lambda.estimate) return {config.lambda.fixed_value, false, config.lambda.fixed_value};
  std::vector<std::size_t> hidden_cols(phi_train.cols() - 1);
  for (std::size_t j = 0; j < hidden_cols.size(); ++j) hidden_cols[j] = j;
  return representer::estimate_lambda(phi_train.select_cols(hidden_cols), y, model.w_nn(), model.b_nn());
}

// Runs the outer loop on (already standardized) train/val sets. Stops when the
// retained count reaches ceil((1 - P_max) N) or when a cycle removes nothing.
inline ParisResult run_paris(const GroupedDataset& train, const GroupedDataset& val, const PruneConfig& config,
                             const ExtractorFactory& make_extractor) {
  config.validate();
  if (train.size() < 2) throw InvalidArgument("run_paris: need at least two training points");
  if (val.size() == 0) throw InvalidArgument("run_paris: empty validation set");
  {
    std::set<SampleId> tr(train.original_indices.begin(), train.original_indices.end());
    for (SampleId v : val.original_indices)
      if (tr.contains(v)) throw InvalidArgument("run_paris: train and validation sets overlap");
  }

  ParisResult result;
  result.n_original = train.size();
  result.pruned = train;
  const std::size_t floor_n = minimum_retained(train.size(), config.total_prune_fraction);
  std::optional<features::Mlp> previous;

  for (std::size_t cycle = 0; result.pruned.size() > floor_n; ++cycle) {
    const GroupedDataset& current = result.pruned;
    CycleSummary summary;
    summary.cycle = cycle;
    summary.retained_before = current.size();
    const CycleBudget budget = cycle_budget(current.size(), train.size(), config);
    summary.k_requested = budget.k;
    summary.k_promoted = budget.promoted;

    std::vector<std::size_t> removed_positions;
    try {
      features::TrainedMlp trained = make_extractor(current, val, cycle, previous ? &*previous : nullptr);
      summary.extractor_epochs = trained.epochs_run;
      summary.extractor_val_mse = trained.best_val_mse;
      DenseMatrix phi = trained.model.extract_features(current.inputs);
      DenseMatrix phi_val = trained.model.extract_features(val.inputs);

      const auto lam = choose_lambda(config, phi, current.targets, trained.model);
      summary.lambda = lam.value;
      summary.lambda_fallback = lam.fallback_used;
      summary.lambda_raw = lam.raw_value;

      RepresenterState state =
          representer::build_state(std::move(phi), std::move(phi_val), current.targets, val.targets, lam.value);
      {
        Vector head = trained.model.w_nn();
        head.push_back(trained.model.b_nn());
        double num = 0.0;
        for (std::size_t d = 0; d < head.size(); ++d) num += (head[d] - state.w_star[d]) * (head[d] - state.w_star[d]);
        const double den = linalg::norm2(state.w_star);
        summary.head_discrepancy = den > 0.0 ? std::sqrt(num) / den : std::sqrt(num);
      }
      summary.val_mse_before = linalg::dot(state.residuals, state.residuals) / static_cast<double>(state.n_val());

      CycleResult cr = run_inner_cycle(state, config, budget.k);
      summary.val_mse_after = linalg::dot(cr.state.residuals, cr.state.residuals) / static_cast<double>(cr.state.n_val());
      summary.stopped_early = cr.stopped_early;
      for (auto& step : cr.trace) {
        step.cycle = cycle;
        step.k_star = current.original_indices[step.position];
        summary.refactorizations += step.refactorizations;
        removed_positions.push_back(step.position);
        result.pruned_indices.push_back(step.k_star);
        result.trace.push_back(step);
      }
      previous = std::move(trained.model);
    } catch (const Error& e) {
      result.cycles.push_back(summary);
      throw ParisAborted(e.what(), std::move(result));
    }

    summary.pruned = removed_positions.size();
    result.cycles.push_back(summary);
    std::sort(removed_positions.begin(), removed_positions.end());
    std::vector<std::size_t> keep;
    for (std::size_t p = 0, r = 0; p < current.size(); ++p) {
      if (r < removed_positions.size() && removed_positions[r] == p) {
        ++r;
        continue;
      }
      keep.push_back(p);
    }
    result.pruned = current.subset(keep);
    if (removed_positions.empty()) {
      result.stalled = true;
      break;
    }
  }
  return result;
}

// Random-pruning control: removes trajectory[c] uniformly chosen survivors in
// cycle c, reproducing a PARIS run's budget without looking at the data.
inline GroupedDataset random_prune(const GroupedDataset& train, std::span<const std::size_t> trajectory,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> alive(train.size());
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;
  for (std::size_t count : trajectory) {
    if (count > alive.size()) throw InvalidArgument("random_prune: trajectory exceeds dataset size");
    for (std::size_t c = 0; c < count; ++c) {
      std::uniform_int_distribution<std::size_t> pick(0, alive.size() - 1);
      alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(pick(rng)));
    }
  }
  return train.subset(alive);
}

}  // namespace paris::pruning
