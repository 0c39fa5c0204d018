#pragma once

// Ridge head on fixed features and its representer decomposition.
//
// With features Phi (N x D, bias already absorbed as a column of ones) the
// ridge head is w* = (Phi^T Phi + lambda I)^{-1} Phi^T y. The dual
// coefficients alpha = (Phi Phi^T + lambda I)^{-1} y satisfy Phi^T alpha = w*,
// so every validation prediction splits into per-training-point terms
// S[i, j] = alpha_j * <phi_val_i, phi_j>. Given w*, alpha follows without any
// solve from the ridge optimality condition lambda * alpha = y - Phi w*.

#include <cmath>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "paris/error.hpp"
#include "paris/linalg.hpp"

namespace paris::representer {

using linalg::CholeskyFactor;
using linalg::DenseMatrix;
using linalg::Vector;

inline constexpr double kLambdaFloor = 1e-5;

struct RidgeFit {
  CholeskyFactor chol;  // of Phi^T Phi + lambda I
  Vector w_star;
};

inline void require_positive_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw InvalidArgument("ridge regularization must be positive and finite");
}

inline RidgeFit fit_ridge_primal(const DenseMatrix& phi, std::span<const double> y, double lambda) {
  require_positive_lambda(lambda);
  if (phi.rows() == 0 || phi.cols() == 0) throw InvalidArgument("fit_ridge_primal: empty features");
  if (y.size() != phi.rows()) throw DimensionMismatch("fit_ridge_primal: y.len != rows(phi)");
  RidgeFit fit{linalg::cholesky_factorize(linalg::gram(phi, lambda)), {}};
  fit.w_star = linalg::solve_with_factor(fit.chol, linalg::multiply_transposed(phi, y));
  return fit;
}

// alpha = (y - Phi w) / lambda, the dual coefficients of the ridge solution w.
inline Vector dual_from_primal(const DenseMatrix& phi, std::span<const double> y,
                               std::span<const double> w_star, double lambda) {
  require_positive_lambda(lambda);
  Vector alpha = linalg::multiply(phi, w_star);
  if (alpha.size() != y.size()) throw DimensionMismatch("dual_from_primal: y.len != rows(phi)");
  for (std::size_t i = 0; i < alpha.size(); ++i) alpha[i] = (y[i] - alpha[i]) / lambda;
  return alpha;
}

// alpha from the N x N dual system via CG; throws NotConverged on failure.
inline Vector dual_alpha_cg(const DenseMatrix& phi, std::span<const double> y, double lambda,
                            double tol = 1e-8, std::size_t max_iter = 0) {
  require_positive_lambda(lambda);
  if (y.size() != phi.rows()) throw DimensionMismatch("dual_alpha_cg: y.len != rows(phi)");
  if (max_iter == 0) max_iter = 10 * phi.rows();
  auto apply = [&](std::span<const double> v) {
    Vector out = linalg::multiply(phi, linalg::multiply_transposed(phi, v));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += lambda * v[i];
    return out;
  };
  auto res = linalg::conjugate_gradient_solve(apply, y, tol, max_iter);
  if (!res.converged) throw linalg::NotConverged(res.relative_residual, res.iterations);
  return std::move(res.x);
}

// alpha from a dense factorization of Phi Phi^T + lambda I; O(N^3), only for
// small N or N << D.
inline Vector dual_alpha_direct(const DenseMatrix& phi, std::span<const double> y, double lambda) {
  require_positive_lambda(lambda);
  if (y.size() != phi.rows()) throw DimensionMismatch("dual_alpha_direct: y.len != rows(phi)");
  return linalg::solve_with_factor(linalg::cholesky_factorize(linalg::outer_gram(phi, lambda)), y);
}

// T = Phi_val Phi^T; independent of lambda and alpha.
inline DenseMatrix build_t_cache(const DenseMatrix& phi_val, const DenseMatrix& phi_train) {
  return linalg::multiply_abt(phi_val, phi_train);
}

// S[:, j] = alpha_j * T[:, j]
inline DenseMatrix build_influence_matrix(const DenseMatrix& t_cache, std::span<const double> alpha) {
  if (alpha.size() != t_cache.cols())
    throw DimensionMismatch("build_influence_matrix: alpha.len != cols(T)");
  DenseMatrix s(t_cache.rows(), t_cache.cols());
  for (std::size_t j = 0; j < t_cache.cols(); ++j) {
    auto tj = t_cache.col(j);
    auto sj = s.col(j);
    for (std::size_t i = 0; i < tj.size(); ++i) sj[i] = alpha[j] * tj[i];
  }
  return s;
}

inline Vector predict(const DenseMatrix& phi_query, std::span<const double> w_star) {
  return linalg::multiply(phi_query, w_star);
}

struct LambdaEstimate {
  double value = kLambdaFloor;
  bool fallback_used = true;
  double raw_value = 0.0;
};

// Closed-form effective ridge parameter implied by trained last-layer weights:
// if w_nn solved (Phi^T Phi + lambda I) w = Phi^T (y - b_nn) exactly, projecting
// the normal equations onto w_nn recovers lambda. Degenerate inputs fall back
// to the floor.
inline LambdaEstimate estimate_lambda(const DenseMatrix& phi, std::span<const double> y,
                                      std::span<const double> w_nn, double b_nn) {
  if (w_nn.size() != phi.cols()) throw DimensionMismatch("estimate_lambda: w_nn.len != cols(phi)");
  if (y.size() != phi.rows()) throw DimensionMismatch("estimate_lambda: y.len != rows(phi)");
  LambdaEstimate est;
  const double wnorm2 = linalg::dot(w_nn, w_nn);
  if (!(wnorm2 >= 1e-12) || !std::isfinite(wnorm2)) return est;

  Vector yc(y.begin(), y.end());
  for (double& v : yc) v -= b_nn;
  // w^T (b - A w) = (Phi w)^T y_c - ||Phi w||^2, avoiding the D x D Gram.
  const Vector phi_w = linalg::multiply(phi, w_nn);
  const double numer = linalg::dot(phi_w, yc) - linalg::dot(phi_w, phi_w);
  est.raw_value = numer / wnorm2;
  if (std::isfinite(est.raw_value) && est.raw_value > 0.0) {
    est.value = std::max(est.raw_value, kLambdaFloor);
    est.fallback_used = est.raw_value < kLambdaFloor;
  }
  return est;
}

// Representer quantities for one pruning cycle.
//
// The cycle-level arrays (features, targets, T) are fixed when the cycle starts
// and shared between successive states; positions index into them. `active`
// lists the surviving positions in ascending order. Invariants:
//   chol factors  Phi_active^T Phi_active + lambda I
//   rhs        =  Phi_active^T y_active
//   w_star     =  A^{-1} rhs
//   alpha[p]   =  (y[p] - phi_p^T w_star) / lambda for active p, 0 otherwise
//   residuals  =  y_val - Phi_val w_star  (= y_val - S 1)
struct RepresenterState {
  std::shared_ptr<const DenseMatrix> phi_train;
  std::shared_ptr<const DenseMatrix> phi_val;
  std::shared_ptr<const Vector> y_train;
  std::shared_ptr<const Vector> y_val;
  std::shared_ptr<const DenseMatrix> t_cache;
  double lambda = kLambdaFloor;

  std::vector<std::size_t> active;
  CholeskyFactor chol;
  Vector rhs;
  Vector w_star;
  Vector alpha;
  Vector residuals;

  std::size_t n_total() const { return phi_train->rows(); }
  std::size_t n_active() const { return active.size(); }
  std::size_t n_val() const { return phi_val->rows(); }
  std::size_t feature_dim() const { return phi_train->cols(); }

  double influence(std::size_t val_row, std::size_t position) const {
    return alpha[position] * (*t_cache)(val_row, position);
  }

  // Row v of S over the active positions, in `active` order.
  Vector influence_row(std::size_t val_row) const {
    Vector out(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) out[a] = influence(val_row, active[a]);
    return out;
  }

  // S restricted to active columns (N_val x N_active).
  DenseMatrix influence_matrix() const {
    const Vector a = active_alpha();
    return build_influence_matrix(t_cache->select_cols(active), a);
  }

  Vector active_alpha() const {
    Vector out(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) out[a] = alpha[active[a]];
    return out;
  }

  Vector validation_predictions() const { return predict(*phi_val, w_star); }
};

// Refreshes alpha and residuals from w_star.
inline void refresh_dual(RepresenterState& s) {
  const DenseMatrix& phi = *s.phi_train;
  const Vector& y = *s.y_train;
  s.alpha.assign(s.n_total(), 0.0);
  for (std::size_t p : s.active) {
    double fit = 0.0;
    for (std::size_t d = 0; d < phi.cols(); ++d) fit += phi(p, d) * s.w_star[d];
    s.alpha[p] = (y[p] - fit) / s.lambda;
  }
  s.residuals = predict(*s.phi_val, s.w_star);
  for (std::size_t i = 0; i < s.residuals.size(); ++i) s.residuals[i] = (*s.y_val)[i] - s.residuals[i];
}

enum class AlphaRoute { primal, dual_cg };

// Builds the full state for a cycle: Gram factor, w*, alpha, T and residuals.
inline RepresenterState build_state(DenseMatrix phi_train, DenseMatrix phi_val, Vector y_train,
                                    Vector y_val, double lambda,
                                    AlphaRoute route = AlphaRoute::primal) {
  require_positive_lambda(lambda);
  if (phi_train.cols() != phi_val.cols())
    throw DimensionMismatch("build_state: train/val feature dimensions differ");
  if (phi_train.rows() != y_train.size() || phi_val.rows() != y_val.size())
    throw DimensionMismatch("build_state: target length mismatch");
  if (!phi_train.all_finite() || !phi_val.all_finite())
    throw linalg::NonFiniteValue("build_state: non-finite features");

  RepresenterState s;
  s.lambda = lambda;
  s.t_cache = std::make_shared<const DenseMatrix>(build_t_cache(phi_val, phi_train));
  s.phi_train = std::make_shared<const DenseMatrix>(std::move(phi_train));
  s.phi_val = std::make_shared<const DenseMatrix>(std::move(phi_val));
  s.y_train = std::make_shared<const Vector>(std::move(y_train));
  s.y_val = std::make_shared<const Vector>(std::move(y_val));
  s.active.resize(s.n_total());
  for (std::size_t p = 0; p < s.active.size(); ++p) s.active[p] = p;

  auto fit = fit_ridge_primal(*s.phi_train, *s.y_train, lambda);
  s.chol = std::move(fit.chol);
  s.w_star = std::move(fit.w_star);
  s.rhs = linalg::multiply_transposed(*s.phi_train, *s.y_train);
  refresh_dual(s);

  if (route == AlphaRoute::dual_cg) {
    s.alpha = dual_alpha_cg(*s.phi_train, *s.y_train, lambda);
  }
  return s;
}

// Alpha of the current state (primal route; see build_state for the CG route).
inline Vector compute_alpha(const RepresenterState& s) { return s.active_alpha(); }

}  // namespace paris::representer
