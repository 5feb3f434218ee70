#pragma once

#include "sgmcmc/dataset.hpp"
#include "sgmcmc/expmv.hpp"
#include "sgmcmc/metrics.hpp"
#include "sgmcmc/numerics.hpp"
#include "sgmcmc/rng.hpp"
#include "sgmcmc/sampler_config.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sgmcmc {

enum class ModelKind { gaussian_toy, linear_regression, logistic_regression };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

// Target posterior. Regression models use a N(0, prior_variance * I) prior.
// The Gaussian toy is U = theta^T theta / 2 with, optionally, synthetic force
// noise of known covariance in place of minibatch subsampling.
struct ModelSpec {
  ModelKind kind = ModelKind::gaussian_toy;
  double prior_variance = 10.0;
  std::size_t dim = 0;
  std::optional<SymMatrix> toy_noise_cov;
  Matrix toy_noise_factor;  // symmetric square root of toy_noise_cov

  static ModelSpec gaussian_toy(std::size_t dim, std::optional<SymMatrix> noise_cov = {});
  static ModelSpec linear_regression(std::size_t dim, double prior_variance);
  static ModelSpec logistic_regression(std::size_t dim, double prior_variance);

  bool uses_data() const { return kind != ModelKind::gaussian_toy; }
  void validate() const;
};

struct MinibatchForce {
  Vector force;                      // F_tilde(theta)
  CovarianceOperator cov_op;         // -(h/2) beta Sigma, matrix-free
  std::vector<std::size_t> indices;  // sampled data indices (empty for the toy)
  double variance_scale = 0.0;       // Sigma = variance_scale * V; N^2/n for minibatches
};

// U(theta), up to an additive constant.
double potential(const ModelSpec& model, const Dataset& data, const Vector& theta);

// -grad U over the full dataset: sum_i grad log pi(x_i | theta) + grad log pi(theta).
Vector clean_force(const ModelSpec& model, const Dataset& data, const Vector& theta);

// Column j is grad log pi(x_{indices[j]} | theta).
Matrix per_datum_gradients(const ModelSpec& model, const Dataset& data, const Vector& theta,
                           std::span<const std::size_t> indices);

// n indices drawn uniformly with replacement.
std::vector<std::size_t> draw_minibatch(const Dataset& data, std::size_t n, Rng& rng);

// (N/n) sum_j g(theta; x_{r_j}) + grad log pi(theta), with the covariance
// operator built from the centered per-datum gradients. The prior gradient is
// deterministic and stays out of the covariance. `rng` is only consumed by the
// Gaussian toy's injected noise.
MinibatchForce noisy_force_and_cov(const ModelSpec& model, const Dataset& data,
                                   const Vector& theta, std::span<const std::size_t> indices,
                                   const SamplerConfig& cfg, Rng& rng);

// N(m, S) with S = (X X^T + I / lambda)^-1 and m = S X y^T.
GaussianSummary linreg_true_posterior(const Dataset& data, double prior_variance);

struct SyntheticRegression {
  Dataset data;
  Vector theta_true;
};

// x_i ~ N(0, I), y_i = theta_true^T x_i + N(0, 1), theta_true ~ N(0, I).
SyntheticRegression synth_linreg(std::size_t n, std::size_t dim, Rng& rng);
SyntheticRegression synth_linreg(std::size_t n, const Vector& theta_true, Rng& rng);

}  // namespace sgmcmc
