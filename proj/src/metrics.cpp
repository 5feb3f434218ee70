#include "sgmcmc/metrics.hpp"

#include "sgmcmc/error.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace sgmcmc {

namespace {

double w2_from_sqrt(const GaussianSummary& a, const GaussianSummary& b, const SymMatrix& b_sqrt) {
  if (a.mean.size() != b.mean.size() || a.cov.dim() != b.cov.dim() ||
      static_cast<std::size_t>(a.mean.size()) != a.cov.dim()) {
    throw InvalidInput("w2_gaussian: dimension mismatch");
  }
  // tr(S_a + S_b - 2 (S_b^1/2 S_a S_b^1/2)^1/2) = min_U |S_a^1/2 - S_b^1/2 U|_F^2
  // over orthogonal U; the minimiser is the polar factor of S_a^1/2 S_b^1/2.
  // Summing squares avoids the cancellation in the trace form when a ~ b.
  const Matrix a_sqrt = psd_sqrt(a.cov).matrix();
  const Eigen::JacobiSVD<Matrix> svd(a_sqrt * b_sqrt.matrix(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix u = svd.matrixV() * svd.matrixU().transpose();
  const double trace_term = std::max(0.0, (a_sqrt - b_sqrt.matrix() * u).squaredNorm());
  return std::sqrt((a.mean - b.mean).squaredNorm() + trace_term);
}

}  // namespace

double w2_gaussian(const GaussianSummary& a, const GaussianSummary& b) {
  return w2_from_sqrt(a, b, psd_sqrt(b.cov));
}

W2Reference::W2Reference(GaussianSummary target)
    : target_(std::move(target)), cov_sqrt_(psd_sqrt(target_.cov)) {}

double W2Reference::distance(const GaussianSummary& other) const {
  return w2_from_sqrt(other, target_, cov_sqrt_);
}

RunningMoments::RunningMoments(std::size_t dim)
    : mean_(Vector::Zero(static_cast<Eigen::Index>(dim))),
      scatter_(Matrix::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))) {}

void RunningMoments::update(const Vector& x) {
  if (count_ == 0 && mean_.size() == 0) *this = RunningMoments(static_cast<std::size_t>(x.size()));
  if (x.size() != mean_.size()) throw InvalidInput("update_moments: dimension mismatch");
  ++count_;
  const Vector delta = x - mean_;
  mean_ += delta / static_cast<double>(count_);
  // (x - mean_old)(x - mean_new)^T = ((n-1)/n) delta delta^T
  const double w = static_cast<double>(count_ - 1) / static_cast<double>(count_);
  scatter_.noalias() += w * delta * delta.transpose();
}

void RunningMoments::merge(const RunningMoments& other) {
  if (other.count_ == 0) return;
  if (count_ == 0) {
    *this = other;
    return;
  }
  if (other.mean_.size() != mean_.size()) throw InvalidInput("RunningMoments::merge: dimension mismatch");
  const double na = static_cast<double>(count_);
  const double nb = static_cast<double>(other.count_);
  const double n = na + nb;
  const Vector delta = other.mean_ - mean_;
  mean_ += delta * (nb / n);
  scatter_ += other.scatter_ + (na * nb / n) * delta * delta.transpose();
  count_ += other.count_;
}

std::optional<SymMatrix> RunningMoments::covariance() const {
  if (count_ < 2) return std::nullopt;
  return SymMatrix(scatter_ / static_cast<double>(count_ - 1));
}

std::optional<GaussianSummary> RunningMoments::summary() const {
  auto cov = covariance();
  if (!cov) return std::nullopt;
  return GaussianSummary{mean_, std::move(*cov)};
}

double softplus(double z) {
  if (z > 35.0) return z + std::exp(-z);
  if (z < -35.0) return std::exp(z);
  return std::log1p(std::exp(z));
}

namespace {

void check_test_set(const Vector& theta, const Dataset& test) {
  if (static_cast<std::size_t>(theta.size()) != test.dim()) {
    throw InvalidInput("parameter length does not match test feature dimension");
  }
  if (static_cast<std::size_t>(test.labels.size()) != test.size()) {
    throw InvalidInput("test labels and features disagree in count");
  }
}

double sum_neg_log_sigmoid(const Vector& theta, const Dataset& test) {
  check_test_set(theta, test);
  const Vector raw = test.features.transpose() * theta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < raw.size(); ++i) total += softplus(-test.labels(i) * raw(i));
  return total;
}

}  // namespace

double test_log_likelihood(const Vector& theta, const Dataset& test) {
  return -sum_neg_log_sigmoid(theta, test);
}

double log_loss(const Vector& theta, const Dataset& test) {
  if (test.empty()) throw InvalidInput("log_loss: empty test set");
  return sum_neg_log_sigmoid(theta, test) / static_cast<double>(test.size());
}

double posterior_expected_log_loss(std::span<const Vector> samples, const Dataset& test) {
  if (samples.empty()) throw InvalidInput("posterior_expected_log_loss: no samples");
  ExpectedLogLoss acc(test);
  for (const auto& theta : samples) acc.add(theta);
  return *acc.value();
}

void ExpectedLogLoss::add(const Vector& theta) {
  ++count_;
  if (poisoned_) return;
  if (!theta.allFinite()) {
    poisoned_ = true;
    return;
  }
  sum_ += log_loss(theta, *test_);
}

std::optional<double> ExpectedLogLoss::value() const {
  if (count_ == 0) return std::nullopt;
  if (poisoned_) return std::numeric_limits<double>::quiet_NaN();
  return sum_ / static_cast<double>(count_);
}

void ThermostatDiagnostics::add(const Vector& momentum, double xi) {
  const double k = inv_mass_.size() == 0 ? momentum.squaredNorm()
                                         : momentum.cwiseProduct(momentum).dot(inv_mass_);
  add_kinetic(k, xi);
}

void ThermostatDiagnostics::add_kinetic(double kinetic, double xi) {
  ++count_;
  const double n = static_cast<double>(count_);
  kinetic_mean_ += (kinetic - kinetic_mean_) / n;
  const double delta = xi - xi_mean_;
  xi_mean_ += delta / n;
  xi_m2_ += delta * (xi - xi_mean_);
}

ThermostatSummary ThermostatDiagnostics::summary() const {
  ThermostatSummary s;
  s.mean_kinetic = kinetic_mean_;
  s.mean_xi = xi_mean_;
  s.var_xi = count_ > 1 ? xi_m2_ / static_cast<double>(count_ - 1) : 0.0;
  return s;
}

}  // namespace sgmcmc
