#include "sgmcmc/expmv.hpp"

#include "sgmcmc/error.hpp"

#include <algorithm>
#include <cmath>

namespace sgmcmc {

CovarianceOperator::CovarianceOperator(Matrix centered_grads, double coeff)
    : grads_(std::move(centered_grads)),
      coeff_(coeff),
      dim_(static_cast<std::size_t>(grads_.rows())) {
  if (!std::isfinite(coeff_) || coeff_ > 0.0) {
    throw InvalidInput("CovarianceOperator: coeff must be finite and <= 0");
  }
  if (!grads_.allFinite()) {
    throw InvalidInput("CovarianceOperator: gradients contain non-finite entries");
  }
  if (grads_.cols() > 0) {
    const double max_col = grads_.colwise().norm().maxCoeff();
    const double drift = grads_.rowwise().sum().norm();
    if (drift > 1e-10 * max_col) {
      throw InvalidInput("CovarianceOperator: gradient columns are not centered");
    }
  }
  trace_tilde_ = coeff_ * grads_.squaredNorm();
}

CovarianceOperator CovarianceOperator::from_gradients(const Matrix& grads, double coeff) {
  Matrix centered = grads.colwise() - grads.rowwise().mean();
  return CovarianceOperator(std::move(centered), coeff);
}

CovarianceOperator CovarianceOperator::zero(std::size_t dim) {
  return CovarianceOperator(Matrix::Zero(static_cast<Eigen::Index>(dim), 0), 0.0);
}

Vector CovarianceOperator::apply(const Vector& v) const {
  if (static_cast<std::size_t>(v.size()) != dim_) {
    throw InvalidInput("cov_apply: vector length does not match operator dimension");
  }
  if (grads_.cols() == 0 || coeff_ == 0.0) return Vector::Zero(v.size());
  const Vector inner = grads_.transpose() * v;
  return coeff_ * (grads_ * inner);
}

SymMatrix CovarianceOperator::dense() const {
  return SymMatrix(coeff_ * (grads_ * grads_.transpose()));
}

SymMatrix CovarianceOperator::empirical_covariance() const {
  if (grads_.cols() < 2) return SymMatrix::zero(dim_);
  return SymMatrix(grads_ * grads_.transpose() / static_cast<double>(grads_.cols() - 1));
}

ExpmvPlan expmv_plan(const CovarianceOperator& op, double t) {
  if (!std::isfinite(t)) throw InvalidInput("expmv_plan: t must be finite");
  if (!std::isfinite(op.trace_tilde())) {
    throw InvalidInput("expmv_plan: operator trace is not finite");
  }
  ExpmvPlan plan;
  plan.t = t;
  plan.degree = kTaylorDegree;
  plan.shift = op.dim() > 0 ? op.trace_tilde() / static_cast<double>(op.dim()) : 0.0;
  // Eigenvalues of Sigma_tilde lie in [trace, 0], so the shifted operator's
  // spectral radius is bounded by |trace| + |shift|.
  const double rho = std::abs(op.trace_tilde()) + std::abs(plan.shift);
  const double stages = std::ceil(std::abs(t) * rho / kTaylorTheta);
  if (!std::isfinite(stages) || stages > 1e9) {
    throw NumericalFailure("expmv_plan: scaling parameter out of range");
  }
  plan.scale = std::max(1, static_cast<int>(stages));
  return plan;
}

namespace {

Vector taylor_stages(const ExpmvPlan& plan, const CovarianceOperator& op, const Vector& v,
                     double shift) {
  if (static_cast<std::size_t>(v.size()) != op.dim()) {
    throw InvalidInput("expmv_apply: vector length does not match operator dimension");
  }
  if (plan.t == 0.0) return v;

  const double step = plan.t / plan.scale;
  const double stage_factor = std::exp(step * shift);
  Vector b = v;
  Vector term(v.size());
  for (int stage = 0; stage < plan.scale; ++stage) {
    Vector f = b;
    term = b;
    for (int j = 1; j <= plan.degree; ++j) {
      Vector next = op.apply(term);
      if (shift != 0.0) next -= shift * term;
      term = (step / j) * next;
      f += term;
      if (term.norm() <= kTaylorTermTolerance * f.norm()) break;
    }
    b = stage_factor * f;
    if (!b.allFinite()) {
      throw NumericalFailure("expmv_apply: non-finite value during accumulation");
    }
  }
  return b;
}

}  // namespace

Vector expmv_apply(const ExpmvPlan& plan, const CovarianceOperator& op, const Vector& v) {
  return taylor_stages(plan, op, v, plan.shift);
}

Vector expmv_apply_unshifted(const ExpmvPlan& plan, const CovarianceOperator& op,
                             const Vector& v) {
  return taylor_stages(plan, op, v, 0.0);
}

}  // namespace sgmcmc
