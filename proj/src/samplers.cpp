#include "sgmcmc/samplers.hpp"

#include "sgmcmc/error.hpp"
#include "sgmcmc/expmv.hpp"

#include <cmath>
#include <string>

namespace sgmcmc {

SamplerConfig SamplerConfig::defaults(std::size_t dim) {
  SamplerConfig cfg;
  cfg.beta = 1.0;
  cfg.thermal_mass = static_cast<double>(dim);
  cfg.mass_diag = Vector::Ones(static_cast<Eigen::Index>(dim));
  return cfg;
}

void SamplerConfig::validate(std::size_t dim) const {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (!positive(h)) throw InvalidInput("stepsize h must be positive");
  if (!positive(beta)) throw InvalidInput("beta must be positive");
  if (!(std::isfinite(friction) && friction >= 0.0)) {
    throw InvalidInput("friction A must be non-negative");
  }
  if (!positive(thermal_mass)) throw InvalidInput("thermal mass must be positive");
  if (static_cast<std::size_t>(mass_diag.size()) != dim) {
    throw InvalidInput("mass diagonal has length " + std::to_string(mass_diag.size()) +
                       ", expected " + std::to_string(dim));
  }
  if (!(mass_diag.array() > 0.0).all() || !mass_diag.allFinite()) {
    throw InvalidInput("mass diagonal entries must be positive");
  }
  if (batch < 1) throw InvalidInput("batch size must be at least 1");
  if (!(std::isfinite(passes) && passes >= 0.0)) throw InvalidInput("passes must be >= 0");
  if (!(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0)) {
    throw InvalidInput("burn-in fraction must lie in [0, 1)");
  }
}

bool ParameterState::finite() const {
  return theta.allFinite() && momentum.allFinite() && std::isfinite(xi);
}

ModelForceSource::ModelForceSource(const ModelSpec& model, const Dataset& data,
                                   const SamplerConfig& cfg)
    : model_(&model), data_(&data), cfg_(cfg) {
  model.validate();
  if (model.uses_data()) {
    if (data.empty()) throw InvalidInput("model requires a non-empty dataset");
    if (data.dim() != model.dim) throw InvalidInput("dataset and model dimensions differ");
  }
}

double ModelForceSource::steps_per_pass() const {
  if (!model_->uses_data()) return 1.0;
  return static_cast<double>(data_->size()) / static_cast<double>(cfg_.batch);
}

MinibatchForce ModelForceSource::evaluate(const Vector& theta, Rng& rng) {
  ++evaluations_;
  if (!model_->uses_data()) {
    return noisy_force_and_cov(*model_, *data_, theta, {}, cfg_, rng);
  }
  const auto indices = draw_minibatch(*data_, cfg_.batch, rng);
  return noisy_force_and_cov(*model_, *data_, theta, indices, cfg_, rng);
}

void moving_average_update(MovingAverageEstimator& est, const SymMatrix& v) {
  if (est.step_count == 0) {
    est.step_count = 1;
    est.i_hat = v;
    return;
  }
  if (v.dim() != est.i_hat.dim()) {
    throw InvalidInput("moving_average_update: dimension mismatch");
  }
  ++est.step_count;
  const double kappa = 1.0 / static_cast<double>(est.step_count);
  est.i_hat = SymMatrix((1.0 - kappa) * est.i_hat.matrix() + kappa * v.matrix());
}

namespace {

Vector noise_term(const SamplerConfig& cfg, Rng& rng, double variance) {
  return std::sqrt(variance) * cfg.mass_diag.cwiseSqrt().cwiseProduct(
                                   standard_normal(rng, cfg.mass_diag.size()));
}

double kinetic(const Vector& p, const SamplerConfig& cfg) {
  return p.cwiseProduct(p).cwiseQuotient(cfg.mass_diag).sum();
}

double target_kinetic(const Vector& p, const SamplerConfig& cfg) {
  return static_cast<double>(p.size()) / cfg.beta;
}

}  // namespace

Vector ou_half_step(const Vector& p, double xi, const SamplerConfig& cfg, Rng& rng) {
  const double a_kt = cfg.friction / cfg.beta;
  if (std::abs(xi) > kXiEpsilon) {
    const double decay = std::exp(-0.5 * xi * cfg.h);
    const double variance = a_kt * -std::expm1(-xi * cfg.h) / xi;
    return decay * p + noise_term(cfg, rng, variance);
  }
  return p + noise_term(cfg, rng, cfg.h * a_kt);
}

double thermostat_half_step(double xi, const Vector& p, const SamplerConfig& cfg) {
  return xi + 0.5 * cfg.h / cfg.thermal_mass * (kinetic(p, cfg) - target_kinetic(p, cfg));
}

void mccadl_step(ParameterState& s, MinibatchForce& cached_force, ForceSource& source,
                 const SamplerConfig& cfg, Rng& rng) {
  const double half_h = 0.5 * cfg.h;
  s.momentum += half_h * cached_force.force;                               // B
  s.theta += half_h * s.momentum.cwiseQuotient(cfg.mass_diag);             // A
  s.momentum = ou_half_step(s.momentum, s.xi, cfg, rng);                   // O
  s.xi = thermostat_half_step(s.xi, s.momentum, cfg);                      // D
  s.momentum = expmv(cached_force.cov_op, cfg.h, s.momentum);              // C
  s.xi = thermostat_half_step(s.xi, s.momentum, cfg);                      // D
  s.momentum = ou_half_step(s.momentum, s.xi, cfg, rng);                   // O
  s.theta += half_h * s.momentum.cwiseQuotient(cfg.mass_diag);             // A
  cached_force = source.evaluate(s.theta, rng);
  s.momentum += half_h * cached_force.force;                               // B
}

void ccadl_step(ParameterState& s, MovingAverageEstimator& est, ForceSource& source,
                const SamplerConfig& cfg, Rng& rng) {
  const MinibatchForce f = source.evaluate(s.theta, rng);
  moving_average_update(est, f.cov_op.empirical_covariance());
  const Vector sigma_p = f.variance_scale * (est.i_hat.matrix() * s.momentum);
  const double h = cfg.h;
  s.momentum += h * f.force - h * (0.5 * h * cfg.beta) * sigma_p - h * s.xi * s.momentum +
                noise_term(cfg, rng, 2.0 * cfg.friction / cfg.beta * h);
  s.theta += h * s.momentum.cwiseQuotient(cfg.mass_diag);
  s.xi += h / cfg.thermal_mass * (kinetic(s.momentum, cfg) - target_kinetic(s.momentum, cfg));
}

void sgnht_step(ParameterState& s, ForceSource& source, const SamplerConfig& cfg, Rng& rng) {
  const MinibatchForce f = source.evaluate(s.theta, rng);
  const double h = cfg.h;
  s.momentum += h * f.force - h * s.xi * s.momentum +
                noise_term(cfg, rng, 2.0 * cfg.friction / cfg.beta * h);
  s.theta += h * s.momentum.cwiseQuotient(cfg.mass_diag);
  s.xi += h / cfg.thermal_mass * (kinetic(s.momentum, cfg) - target_kinetic(s.momentum, cfg));
}

void sghmc_step(ParameterState& s, ForceSource& source, const SamplerConfig& cfg, Rng& rng) {
  const MinibatchForce f = source.evaluate(s.theta, rng);
  const double h = cfg.h;
  s.momentum += h * f.force - h * cfg.friction * s.momentum.cwiseQuotient(cfg.mass_diag) +
                noise_term(cfg, rng, 2.0 * cfg.friction / cfg.beta * h);
  s.theta += h * s.momentum.cwiseQuotient(cfg.mass_diag);
}

std::string_view to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::sghmc: return "sghmc";
    case SamplerKind::sgnht: return "sgnht";
    case SamplerKind::ccadl: return "ccadl";
    case SamplerKind::mccadl: return "mccadl";
  }
  return "unknown";
}

SamplerKind parse_sampler_kind(std::string_view name) {
  if (name == "sghmc") return SamplerKind::sghmc;
  if (name == "sgnht") return SamplerKind::sgnht;
  if (name == "ccadl") return SamplerKind::ccadl;
  if (name == "mccadl") return SamplerKind::mccadl;
  throw InvalidInput("unknown sampler '" + std::string(name) + "'");
}

ParameterState initial_state(std::size_t dim, const SamplerConfig& cfg, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(dim);
  ParameterState s;
  s.theta = Vector::Zero(d);
  s.momentum = noise_term(cfg, rng, 1.0 / cfg.beta);
  s.xi = cfg.friction;
  return s;
}

std::size_t total_steps(const SamplerConfig& cfg, double steps_per_pass) {
  return static_cast<std::size_t>(std::llround(cfg.passes * steps_per_pass));
}

ChainReport run_chain(SamplerKind kind, ForceSource& source, const SamplerConfig& cfg,
                      ChainObserver& observer, std::uint64_t stream) {
  cfg.validate(source.dim());
  Rng rng = make_rng(cfg.seed, stream);
  const double per_pass = source.steps_per_pass();

  ChainReport report;
  report.total_steps = total_steps(cfg, per_pass);
  if (report.total_steps == 0) return report;
  const auto burn_in = static_cast<std::size_t>(
      std::floor(cfg.burn_in_fraction * static_cast<double>(report.total_steps)));

  ParameterState state = initial_state(source.dim(), cfg, rng);
  MinibatchForce cached;
  MovingAverageEstimator estimator;
  if (kind == SamplerKind::mccadl) cached = source.evaluate(state.theta, rng);

  for (std::size_t k = 1; k <= report.total_steps; ++k) {
    const StepInfo info{k, static_cast<double>(k) / per_pass, k > burn_in};
    bool ok = true;
    try {
      switch (kind) {
        case SamplerKind::mccadl: mccadl_step(state, cached, source, cfg, rng); break;
        case SamplerKind::ccadl: ccadl_step(state, estimator, source, cfg, rng); break;
        case SamplerKind::sgnht: sgnht_step(state, source, cfg, rng); break;
        case SamplerKind::sghmc: sghmc_step(state, source, cfg, rng); break;
      }
      ok = state.finite();
    } catch (const NumericalFailure&) {
      ok = false;
    }
    report.steps_run = k;
    if (!ok) {
      report.diverged_at = k;
      observer.on_diverged(info);
      break;
    }
    if (info.post_burn_in) ++report.samples;
    observer.on_step(info, state);
  }
  return report;
}

}  // namespace sgmcmc
