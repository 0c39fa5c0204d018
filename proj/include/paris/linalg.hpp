#pragma once

// Dense linear-algebra kernels used by the pruning engine: a column-major
// matrix type, Cholesky factorization with rank-one downdating, triangular
// solves and a matrix-free conjugate-gradient solver. Everything runs in
// double precision and is deterministic (fixed loop order, no threading).

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "paris/error.hpp"

namespace paris::linalg {

using Vector = std::vector<double>;

class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(std::size_t column, double pivot)
      : Error("matrix is not positive definite (pivot " + std::to_string(pivot) + " at column " +
              std::to_string(column) + ")"),
        column_(column),
        pivot_(pivot) {}
  std::size_t column() const { return column_; }
  double pivot() const { return pivot_; }

 private:
  std::size_t column_;
  double pivot_;
};

class DowndateBreaksPD : public Error {
 public:
  explicit DowndateBreaksPD(std::size_t column)
      : Error("rank-one downdate loses positive definiteness at column " + std::to_string(column)),
        column_(column) {}
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

class NotSymmetric : public Error {
 public:
  using Error::Error;
};

class NonFiniteValue : public Error {
 public:
  using Error::Error;
};

class NotConverged : public Error {
 public:
  NotConverged(double residual, std::size_t iterations)
      : Error("conjugate gradient did not converge: relative residual " + std::to_string(residual) +
              " after " + std::to_string(iterations) + " iterations"),
        residual_(residual),
        iterations_(iterations) {}
  double residual() const { return residual_; }
  std::size_t iterations() const { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

// Column-major dense matrix. Element (i, j) lives at data[i + j * rows].
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  // Row-wise literal, convenient for small fixed matrices.
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    DenseMatrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw DimensionMismatch("ragged row literal");
      std::size_t j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) {
    assert(i < rows_ && j < cols_);
    return data_[i + j * rows_];
  }
  double operator()(std::size_t i, std::size_t j) const {
    assert(i < rows_ && j < cols_);
    return data_[i + j * rows_];
  }

  std::span<double> col(std::size_t j) { return {data_.data() + j * rows_, rows_}; }
  std::span<const double> col(std::size_t j) const { return {data_.data() + j * rows_, rows_}; }

  Vector row(std::size_t i) const {
    Vector out(cols_);
    for (std::size_t j = 0; j < cols_; ++j) out[j] = (*this)(i, j);
    return out;
  }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  DenseMatrix transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t i = 0; i < rows_; ++i) t(j, i) = (*this)(i, j);
    return t;
  }

  // Keeps the listed rows, in the given order.
  DenseMatrix select_rows(std::span<const std::size_t> rows) const {
    DenseMatrix out(rows.size(), cols_);
    for (std::size_t j = 0; j < cols_; ++j)
      for (std::size_t r = 0; r < rows.size(); ++r) out(r, j) = (*this)(rows[r], j);
    return out;
  }

  // Keeps the listed columns, in the given order.
  DenseMatrix select_cols(std::span<const std::size_t> cols) const {
    DenseMatrix out(rows_, cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
      auto src = col(cols[c]);
      std::copy(src.begin(), src.end(), out.col(c).begin());
    }
    return out;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Lower-triangular factor L with L L^T = A.
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  explicit CholeskyFactor(DenseMatrix lower) : lower_(std::move(lower)) {
    if (lower_.rows() != lower_.cols()) throw DimensionMismatch("Cholesky factor must be square");
  }

  std::size_t dim() const { return lower_.rows(); }
  const DenseMatrix& lower() const { return lower_; }

  // L L^T, mainly for verification.
  DenseMatrix reconstruct() const {
    const std::size_t n = dim();
    DenseMatrix a(n, n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = j; i < n; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k <= j; ++k) s += lower_(i, k) * lower_(j, k);
        a(i, j) = s;
        a(j, i) = s;
      }
    return a;
  }

 private:
  DenseMatrix lower_;
};

// ---------------------------------------------------------------------------
// Small vector helpers.

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double max_abs(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

inline double frobenius_norm(const DenseMatrix& a) { return norm2(a.data()); }

// ||a - b||_F / ||b||_F, falling back to absolute when b is zero.
inline double relative_frobenius_error(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("relative_frobenius_error: shape mismatch");
  double num = 0.0;
  auto da = a.data();
  auto db = b.data();
  for (std::size_t i = 0; i < da.size(); ++i) num += (da[i] - db[i]) * (da[i] - db[i]);
  const double den = frobenius_norm(b);
  return den > 0.0 ? std::sqrt(num) / den : std::sqrt(num);
}

// ---------------------------------------------------------------------------
// Products.

// y = A x
inline Vector multiply(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw DimensionMismatch("multiply: A.cols != x.len");
  Vector y(a.rows(), 0.0);
  for (std::size_t j = 0; j < a.cols(); ++j) {
    const double xj = x[j];
    auto cj = a.col(j);
    for (std::size_t i = 0; i < a.rows(); ++i) y[i] += cj[i] * xj;
  }
  return y;
}

// y = A^T x
inline Vector multiply_transposed(const DenseMatrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw DimensionMismatch("multiply_transposed: A.rows != x.len");
  Vector y(a.cols());
  for (std::size_t j = 0; j < a.cols(); ++j) y[j] = dot(a.col(j), x);
  return y;
}

// C = A B
inline DenseMatrix multiply(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("multiply: inner dimensions differ");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    auto cj = c.col(j);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double bkj = b(k, j);
      auto ak = a.col(k);
      for (std::size_t i = 0; i < a.rows(); ++i) cj[i] += ak[i] * bkj;
    }
  }
  return c;
}

// C = A B^T, the shape used for kernel blocks Phi_val Phi^T.
inline DenseMatrix multiply_abt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw DimensionMismatch("multiply_abt: feature dimensions differ");
  DenseMatrix c(a.rows(), b.rows());
  for (std::size_t k = 0; k < a.cols(); ++k) {
    auto ak = a.col(k);
    auto bk = b.col(k);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double bjk = bk[j];
      auto cj = c.col(j);
      for (std::size_t i = 0; i < a.rows(); ++i) cj[i] += ak[i] * bjk;
    }
  }
  return c;
}

// A^T A + shift I
inline DenseMatrix gram(const DenseMatrix& a, double shift = 0.0) {
  const std::size_t d = a.cols();
  DenseMatrix g(d, d);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t i = j; i < d; ++i) {
      const double s = dot(a.col(i), a.col(j));
      g(i, j) = s;
      g(j, i) = s;
    }
  for (std::size_t i = 0; i < d; ++i) g(i, i) += shift;
  return g;
}

// A A^T + shift I
inline DenseMatrix outer_gram(const DenseMatrix& a, double shift = 0.0) {
  DenseMatrix g = multiply_abt(a, a);
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) += shift;
  return g;
}

// ---------------------------------------------------------------------------
// Cholesky.

inline constexpr double kSymmetryTolerance = 1e-10;

// Factors a symmetric positive-definite matrix. The input is symmetrized as
// (A + A^T) / 2 after checking that its asymmetry is below 1e-10 relative to
// its largest entry.
inline CholeskyFactor cholesky_factorize(const DenseMatrix& a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw DimensionMismatch("cholesky_factorize: matrix must be square");
  if (!a.all_finite()) throw NonFiniteValue("cholesky_factorize: non-finite entry");

  const double scale = std::max(1.0, max_abs(a.data()));
  DenseMatrix l(n, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = j; i < n; ++i) {
      if (std::abs(a(i, j) - a(j, i)) > kSymmetryTolerance * scale)
        throw NotSymmetric("cholesky_factorize: asymmetry at (" + std::to_string(i) + ", " +
                           std::to_string(j) + ")");
      l(i, j) = 0.5 * (a(i, j) + a(j, i));
    }

  // Left-looking column algorithm on the lower triangle.
  for (std::size_t j = 0; j < n; ++j) {
    auto lj = l.col(j);
    for (std::size_t k = 0; k < j; ++k) {
      const double ljk = l(j, k);
      if (ljk == 0.0) continue;
      auto lk = l.col(k);
      for (std::size_t i = j; i < n; ++i) lj[i] -= lk[i] * ljk;
    }
    const double pivot = lj[j];
    if (!(pivot > 0.0) || !std::isfinite(pivot)) throw NotPositiveDefinite(j, pivot);
    const double root = std::sqrt(pivot);
    lj[j] = root;
    for (std::size_t i = j + 1; i < n; ++i) lj[i] /= root;
  }
  return CholeskyFactor(std::move(l));
}

// Pivots that shrink below this fraction of their previous value are treated as
// a loss of definiteness; the factor would be numerically meaningless.
inline constexpr double kDowndatePivotFloor = 1e-14;

// Returns the factor of L L^T - v v^T using hyperbolic rotations, O(dim^2).
inline CholeskyFactor cholesky_downdate(const CholeskyFactor& factor, std::span<const double> v) {
  const std::size_t n = factor.dim();
  if (v.size() != n) throw DimensionMismatch("cholesky_downdate: v.len != dim");
  DenseMatrix l = factor.lower();
  Vector x(v.begin(), v.end());
  for (std::size_t k = 0; k < n; ++k) {
    const double lkk = l(k, k);
    const double r2 = (lkk - x[k]) * (lkk + x[k]);
    if (!(r2 > kDowndatePivotFloor * lkk * lkk) || !std::isfinite(r2)) throw DowndateBreaksPD(k);
    const double r = std::sqrt(r2);
    const double c = r / lkk;
    const double s = x[k] / lkk;
    l(k, k) = r;
    auto lk = l.col(k);
    for (std::size_t i = k + 1; i < n; ++i) {
      lk[i] = (lk[i] - s * x[i]) / c;
      x[i] = c * x[i] - s * lk[i];
    }
  }
  return CholeskyFactor(std::move(l));
}

// Solves L y = b in place.
inline void forward_substitute(const DenseMatrix& l, std::span<double> b) {
  const std::size_t n = l.rows();
  for (std::size_t j = 0; j < n; ++j) {
    b[j] /= l(j, j);
    const double bj = b[j];
    auto lj = l.col(j);
    for (std::size_t i = j + 1; i < n; ++i) b[i] -= lj[i] * bj;
  }
}

// Solves L^T x = b in place.
inline void back_substitute_transposed(const DenseMatrix& l, std::span<double> b) {
  const std::size_t n = l.rows();
  for (std::size_t jj = n; jj-- > 0;) {
    auto lj = l.col(jj);
    double s = b[jj];
    for (std::size_t i = jj + 1; i < n; ++i) s -= lj[i] * b[i];
    b[jj] = s / l(jj, jj);
  }
}

// x = (L L^T)^{-1} b via two triangular solves.
inline Vector solve_with_factor(const CholeskyFactor& factor, std::span<const double> b) {
  if (b.size() != factor.dim()) throw DimensionMismatch("solve_with_factor: b.len != dim");
  Vector x(b.begin(), b.end());
  forward_substitute(factor.lower(), x);
  back_substitute_transposed(factor.lower(), x);
  return x;
}

// ---------------------------------------------------------------------------
// Conjugate gradient.

struct CgResult {
  Vector x;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

// Matrix-free CG for SPD operators. `apply_a(x)` must return A x. Starts from
// zero; stops when ||r|| / ||b|| <= tol. On failure the best iterate seen is
// returned with converged = false.
template <class ApplyA>
CgResult conjugate_gradient_solve(ApplyA&& apply_a, std::span<const double> b, double tol,
                                  std::size_t max_iter) {
  if (!(tol > 0.0)) throw InvalidArgument("conjugate_gradient_solve: tol must be positive");
  const std::size_t n = b.size();
  CgResult out;
  out.x.assign(n, 0.0);
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    out.converged = true;
    return out;
  }

  Vector r(b.begin(), b.end());
  Vector p = r;
  double rr = dot(r, r);
  Vector best = out.x;
  double best_res = 1.0;
  Vector x = out.x;

  for (std::size_t it = 1; it <= max_iter; ++it) {
    const Vector ap = apply_a(std::span<const double>(p));
    if (ap.size() != n) throw DimensionMismatch("conjugate_gradient_solve: operator output length");
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;  // operator not SPD along p, or breakdown
    const double step = rr / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += step * p[i];
      r[i] -= step * ap[i];
    }
    const double rr_new = dot(r, r);
    const double res = std::sqrt(rr_new) / bnorm;
    out.iterations = it;
    if (res < best_res) {
      best_res = res;
      best = x;
    }
    if (res <= tol) {
      out.x = std::move(x);
      out.relative_residual = res;
      out.converged = true;
      return out;
    }
    const double beta = rr_new / rr;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
    rr = rr_new;
  }
  out.x = std::move(best);
  out.relative_residual = best_res;
  out.converged = false;
  return out;
}

}  // namespace paris::linalg
