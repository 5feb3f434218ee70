#pragma once

#include "sgmcmc/dataset.hpp"
#include "sgmcmc/numerics.hpp"

#include <cstddef>
#include <optional>
#include <span>

namespace sgmcmc {

struct GaussianSummary {
  Vector mean;
  SymMatrix cov;
};

// Closed-form 2-Wasserstein distance between two Gaussians:
//
//   W2^2 = |m_a - m_b|^2 + tr(S_a + S_b - 2 (S_b^1/2 S_a S_b^1/2)^1/2)
//
// The trace term is evaluated as a sum of squares through the polar factor of
// S_a^1/2 S_b^1/2, which keeps it non-negative.
double w2_gaussian(const GaussianSummary& a, const GaussianSummary& b);

// Fixed reference distribution with its covariance square root cached, for
// repeated distances against one target.
class W2Reference {
 public:
  explicit W2Reference(GaussianSummary target);
  double distance(const GaussianSummary& other) const;
  const GaussianSummary& target() const { return target_; }

 private:
  GaussianSummary target_;
  SymMatrix cov_sqrt_;
};

// Single-pass (Welford) mean and scatter accumulator.
class RunningMoments {
 public:
  RunningMoments() = default;
  explicit RunningMoments(std::size_t dim);

  void update(const Vector& x);
  // Pairwise merge (Chan et al.); associative up to rounding.
  void merge(const RunningMoments& other);

  std::size_t count() const { return count_; }
  std::size_t dim() const { return static_cast<std::size_t>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const Matrix& scatter() const { return scatter_; }
  // Unbiased covariance; nullopt while count < 2.
  std::optional<SymMatrix> covariance() const;
  std::optional<GaussianSummary> summary() const;

 private:
  std::size_t count_ = 0;
  Vector mean_;
  Matrix scatter_;
};

inline void update_moments(RunningMoments& rm, const Vector& x) { rm.update(x); }

// log(1 + exp(z)) without overflow; branches at |z| = 35.
double softplus(double z);

// sum_i log sigma(y_i theta^T x_i).
double test_log_likelihood(const Vector& theta, const Dataset& test);

// (1/|T|) sum_i log(1 + exp(-y_i theta^T x_i)).
double log_loss(const Vector& theta, const Dataset& test);

// Mean of log_loss over the samples; NaN if any sample is non-finite.
// Throws InvalidInput on an empty sequence.
double posterior_expected_log_loss(std::span<const Vector> samples, const Dataset& test);

// Streaming form of posterior_expected_log_loss.
class ExpectedLogLoss {
 public:
  explicit ExpectedLogLoss(const Dataset& test) : test_(&test) {}
  void add(const Vector& theta);
  std::size_t count() const { return count_; }
  // NaN once a non-finite sample has been seen; nullopt while empty.
  std::optional<double> value() const;

 private:
  const Dataset* test_;
  std::size_t count_ = 0;
  double sum_ = 0.0;
  bool poisoned_ = false;
};

struct ThermostatSummary {
  double mean_kinetic = 0.0;  // mean of p^T M^-1 p
  double mean_xi = 0.0;
  double var_xi = 0.0;        // unbiased
};

class ThermostatDiagnostics {
 public:
  ThermostatDiagnostics() = default;
  explicit ThermostatDiagnostics(Vector inv_mass) : inv_mass_(std::move(inv_mass)) {}

  void add(const Vector& momentum, double xi);
  void add_kinetic(double kinetic, double xi);
  std::size_t count() const { return count_; }
  ThermostatSummary summary() const;

 private:
  Vector inv_mass_;
  std::size_t count_ = 0;
  double kinetic_mean_ = 0.0;
  double xi_mean_ = 0.0;
  double xi_m2_ = 0.0;
};

}  // namespace sgmcmc
