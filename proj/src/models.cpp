#include "sgmcmc/models.hpp"

#include "sgmcmc/error.hpp"

#include <atomic>
#include <cmath>
#include <iostream>

namespace sgmcmc {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gaussian_toy: return "gaussian_toy";
    case ModelKind::linear_regression: return "linear_regression";
    case ModelKind::logistic_regression: return "logistic_regression";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "gaussian_toy") return ModelKind::gaussian_toy;
  if (name == "linear_regression") return ModelKind::linear_regression;
  if (name == "logistic_regression") return ModelKind::logistic_regression;
  throw InvalidInput("unknown model kind '" + std::string(name) + "'");
}

void Dataset::validate(bool binary_labels) const {
  if (static_cast<std::size_t>(labels.size()) != size()) {
    throw InvalidInput("dataset has " + std::to_string(size()) + " feature columns but " +
                       std::to_string(labels.size()) + " labels");
  }
  if (!features.allFinite() || !labels.allFinite()) {
    throw InvalidInput("dataset contains non-finite entries");
  }
  if (binary_labels) {
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
      if (labels(i) != 1.0 && labels(i) != -1.0) {
        throw InvalidInput("label " + std::to_string(labels(i)) + " at index " +
                           std::to_string(i) + " is not -1 or +1");
      }
    }
  }
}

ModelSpec ModelSpec::gaussian_toy(std::size_t dim, std::optional<SymMatrix> noise_cov) {
  ModelSpec spec;
  spec.kind = ModelKind::gaussian_toy;
  spec.dim = dim;
  if (noise_cov) {
    if (noise_cov->dim() != dim) {
      throw InvalidInput("gaussian_toy: noise covariance dimension mismatch");
    }
    spec.toy_noise_factor = psd_sqrt(*noise_cov).matrix();
    spec.toy_noise_cov = std::move(noise_cov);
  }
  return spec;
}

ModelSpec ModelSpec::linear_regression(std::size_t dim, double prior_variance) {
  ModelSpec spec;
  spec.kind = ModelKind::linear_regression;
  spec.dim = dim;
  spec.prior_variance = prior_variance;
  spec.validate();
  return spec;
}

ModelSpec ModelSpec::logistic_regression(std::size_t dim, double prior_variance) {
  ModelSpec spec = linear_regression(dim, prior_variance);
  spec.kind = ModelKind::logistic_regression;
  return spec;
}

void ModelSpec::validate() const {
  if (dim < 1) throw InvalidInput("model dimension must be at least 1");
  if (!(prior_variance > 0.0) || !std::isfinite(prior_variance)) {
    throw InvalidInput("prior variance must be positive and finite");
  }
  if (toy_noise_cov && kind != ModelKind::gaussian_toy) {
    throw InvalidInput("toy noise covariance only applies to gaussian_toy");
  }
}

namespace {

void check_theta(const ModelSpec& model, const Vector& theta) {
  if (static_cast<std::size_t>(theta.size()) != model.dim) {
    throw InvalidInput("theta has length " + std::to_string(theta.size()) +
                       ", model expects " + std::to_string(model.dim));
  }
}

void check_data(const ModelSpec& model, const Dataset& data) {
  if (!model.uses_data()) return;
  if (data.dim() != model.dim) {
    throw InvalidInput("dataset dimension " + std::to_string(data.dim()) +
                       " does not match model dimension " + std::to_string(model.dim));
  }
  if (static_cast<std::size_t>(data.labels.size()) != data.size()) {
    throw InvalidInput("dataset labels and features disagree in count");
  }
}

// Scalar weight w_i with grad log pi(x_i | theta) = w_i x_i.
Vector gradient_weights(const ModelSpec& model, const Vector& margins_raw, const Vector& labels) {
  if (model.kind == ModelKind::linear_regression) {
    return labels - margins_raw;
  }
  // y sigma(-y theta^T x)
  Vector w(labels.size());
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double m = labels(i) * margins_raw(i);
    w(i) = labels(i) / (1.0 + std::exp(m));
  }
  return w;
}

Vector prior_force(const ModelSpec& model, const Vector& theta) {
  return -theta / model.prior_variance;
}

void warn_single_sample_batch() {
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::cerr << "warning: minibatch of size 1 has no empirical covariance; "
                 "using a zero covariance operator\n";
  }
}

}  // namespace

double potential(const ModelSpec& model, const Dataset& data, const Vector& theta) {
  check_theta(model, theta);
  if (model.kind == ModelKind::gaussian_toy) return 0.5 * theta.squaredNorm();
  check_data(model, data);
  const Vector raw = data.features.transpose() * theta;
  double likelihood = 0.0;
  if (model.kind == ModelKind::linear_regression) {
    likelihood = 0.5 * (data.labels - raw).squaredNorm();
  } else {
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
      likelihood += softplus(-data.labels(i) * raw(i));
    }
  }
  return likelihood + 0.5 * theta.squaredNorm() / model.prior_variance;
}

Vector clean_force(const ModelSpec& model, const Dataset& data, const Vector& theta) {
  check_theta(model, theta);
  if (model.kind == ModelKind::gaussian_toy) return -theta;
  check_data(model, data);
  const Vector raw = data.features.transpose() * theta;
  const Vector w = gradient_weights(model, raw, data.labels);
  return data.features * w + prior_force(model, theta);
}

Matrix per_datum_gradients(const ModelSpec& model, const Dataset& data, const Vector& theta,
                           std::span<const std::size_t> indices) {
  check_theta(model, theta);
  check_data(model, data);
  if (!model.uses_data()) {
    throw InvalidInput("per_datum_gradients: gaussian_toy has no data terms");
  }
  const auto n = static_cast<Eigen::Index>(indices.size());
  Matrix xb(data.features.rows(), n);
  Vector yb(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t idx = indices[static_cast<std::size_t>(j)];
    if (idx >= data.size()) throw InvalidInput("minibatch index out of range");
    xb.col(j) = data.features.col(static_cast<Eigen::Index>(idx));
    yb(j) = data.labels(static_cast<Eigen::Index>(idx));
  }
  const Vector w = gradient_weights(model, xb.transpose() * theta, yb);
  return xb * w.asDiagonal();
}

std::vector<std::size_t> draw_minibatch(const Dataset& data, std::size_t n, Rng& rng) {
  if (n == 0) throw InvalidInput("draw_minibatch: batch size must be at least 1");
  if (data.empty()) throw InvalidInput("draw_minibatch: dataset is empty");
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<std::size_t> out(n);
  for (auto& idx : out) idx = pick(rng);
  return out;
}

MinibatchForce noisy_force_and_cov(const ModelSpec& model, const Dataset& data,
                                   const Vector& theta, std::span<const std::size_t> indices,
                                   const SamplerConfig& cfg, Rng& rng) {
  const double half_h_beta = 0.5 * cfg.h * cfg.beta;
  MinibatchForce out;

  if (model.kind == ModelKind::gaussian_toy) {
    check_theta(model, theta);
    out.force = -theta;
    if (!model.toy_noise_cov) {
      out.cov_op = CovarianceOperator::zero(model.dim);
      return out;
    }
    const Matrix& s = model.toy_noise_factor;
    out.force += s * standard_normal(rng, s.cols());
    // G = [S, -S] is centered and G G^T = 2 Sigma.
    Matrix g(s.rows(), 2 * s.cols());
    g << s, -s;
    out.cov_op = CovarianceOperator(std::move(g), -half_h_beta * 0.5);
    out.variance_scale = 0.5 * static_cast<double>(2 * s.cols() - 1);
    return out;
  }

  const std::size_t n = indices.size();
  if (n == 0) throw InvalidInput("noisy_force_and_cov: empty minibatch");
  const Matrix grads = per_datum_gradients(model, data, theta, indices);
  if (!grads.allFinite()) {
    throw NumericalFailure("noisy_force_and_cov: non-finite per-datum gradient");
  }
  const double big_n = static_cast<double>(data.size());
  const double small_n = static_cast<double>(n);

  out.force = (big_n / small_n) * grads.rowwise().sum() + prior_force(model, theta);
  out.indices.assign(indices.begin(), indices.end());
  out.variance_scale = big_n * big_n / small_n;
  if (n == 1) {
    warn_single_sample_batch();
    out.cov_op = CovarianceOperator::zero(model.dim);
    return out;
  }
  const double coeff = -half_h_beta * big_n * big_n / (small_n * (small_n - 1.0));
  out.cov_op = CovarianceOperator::from_gradients(grads, coeff);
  if (!std::isfinite(out.cov_op.trace_tilde())) {
    throw NumericalFailure("noisy_force_and_cov: covariance trace overflowed");
  }
  return out;
}

GaussianSummary linreg_true_posterior(const Dataset& data, double prior_variance) {
  if (!(prior_variance > 0.0)) throw InvalidInput("prior variance must be positive");
  if (static_cast<std::size_t>(data.labels.size()) != data.size()) {
    throw InvalidInput("dataset labels and features disagree in count");
  }
  const auto d = data.features.rows();
  if (d < 1) throw InvalidInput("linreg_true_posterior: dataset has no features");
  Matrix precision = data.features * data.features.transpose();
  precision.diagonal().array() += 1.0 / prior_variance;
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw NumericalFailure("linreg_true_posterior: posterior precision is not positive definite");
  }
  Matrix cov = llt.solve(Matrix::Identity(d, d));
  Vector mean = llt.solve(data.features * data.labels);
  if (!cov.allFinite() || !mean.allFinite()) {
    throw NumericalFailure("linreg_true_posterior: singular system");
  }
  return GaussianSummary{std::move(mean), SymMatrix(cov)};
}

SyntheticRegression synth_linreg(std::size_t n, std::size_t dim, Rng& rng) {
  if (dim < 1) throw InvalidInput("synth_linreg: dimension must be at least 1");
  Vector theta_true = standard_normal(rng, static_cast<Eigen::Index>(dim));
  return synth_linreg(n, theta_true, rng);
}

SyntheticRegression synth_linreg(std::size_t n, const Vector& theta_true, Rng& rng) {
  if (n < 1) throw InvalidInput("synth_linreg: need at least one data point");
  if (theta_true.size() < 1) throw InvalidInput("synth_linreg: dimension must be at least 1");
  const auto d = theta_true.size();
  const auto count = static_cast<Eigen::Index>(n);
  SyntheticRegression out;
  out.theta_true = theta_true;
  out.data.features.resize(d, count);
  out.data.labels.resize(count);
  std::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < count; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) out.data.features(k, i) = normal(rng);
    out.data.labels(i) = theta_true.dot(out.data.features.col(i)) + normal(rng);
  }
  return out;
}

}  // namespace sgmcmc
