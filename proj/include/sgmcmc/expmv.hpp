#pragma once

#include "sgmcmc/numerics.hpp"

#include <cstddef>

namespace sgmcmc {

// Matrix-free form of the scaled minibatch covariance
//
//   Sigma_tilde = coeff * G * G^T,
//
// where column i of G is the centered per-datum gradient g(theta; x_i) - g_bar.
// The dense matrix is never formed on the sampling path; apply() costs two
// d x n matrix-vector products.
class CovarianceOperator {
 public:
  CovarianceOperator() = default;

  // `centered_grads` must have columns summing to zero (relative 1e-10) and
  // `coeff` must be <= 0 and finite.
  CovarianceOperator(Matrix centered_grads, double coeff);

  // Centers `grads` column-wise before building the operator.
  static CovarianceOperator from_gradients(const Matrix& grads, double coeff);
  static CovarianceOperator zero(std::size_t dim);

  Vector apply(const Vector& v) const;

  std::size_t dim() const { return dim_; }
  std::size_t batch() const { return static_cast<std::size_t>(grads_.cols()); }
  double coeff() const { return coeff_; }
  double trace_tilde() const { return trace_tilde_; }
  const Matrix& centered_grads() const { return grads_; }
  bool is_zero() const { return coeff_ == 0.0 || grads_.cols() == 0 || trace_tilde_ == 0.0; }

  // coeff * G G^T. Test oracles and the moving-average baseline only.
  SymMatrix dense() const;
  // G G^T / (n - 1): the empirical covariance V of the centered columns.
  // Zero when n < 2.
  SymMatrix empirical_covariance() const;

 private:
  Matrix grads_;
  double coeff_ = 0.0;
  double trace_tilde_ = 0.0;
  std::size_t dim_ = 0;
};

inline Vector cov_apply(const CovarianceOperator& op, const Vector& v) { return op.apply(v); }

struct ExpmvPlan {
  double shift = 0.0;  // trace(Sigma_tilde) / d
  int scale = 1;       // s
  int degree = 30;     // m
  double t = 0.0;
};

inline constexpr int kTaylorDegree = 30;
// Degree-30 truncation threshold on |t| * rho / s.
inline constexpr double kTaylorTheta = 3.5;
inline constexpr double kTaylorTermTolerance = 1e-16;

ExpmvPlan expmv_plan(const CovarianceOperator& op, double t);

// exp(t * Sigma_tilde) * v by shifting with the mean eigenvalue, scaling by s
// and applying a truncated Taylor polynomial s times. Throws
// NumericalFailure if the accumulation overflows.
Vector expmv_apply(const ExpmvPlan& plan, const CovarianceOperator& op, const Vector& v);

// Same as expmv_apply with the trace shift switched off; used to check that
// the shift only changes cost, not the result.
Vector expmv_apply_unshifted(const ExpmvPlan& plan, const CovarianceOperator& op,
                             const Vector& v);

inline Vector expmv(const CovarianceOperator& op, double t, const Vector& v) {
  return expmv_apply(expmv_plan(op, t), op, v);
}

}  // namespace sgmcmc
