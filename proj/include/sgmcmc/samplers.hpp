#pragma once

#include "sgmcmc/dataset.hpp"
#include "sgmcmc/models.hpp"
#include "sgmcmc/numerics.hpp"
#include "sgmcmc/rng.hpp"
#include "sgmcmc/sampler_config.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace sgmcmc {

struct ParameterState {
  Vector theta;
  Vector momentum;
  double xi = 0.0;

  bool finite() const;
};

// Supplies noisy forces to the integrators. Implementations draw their own
// minibatch from `rng`.
class ForceSource {
 public:
  virtual ~ForceSource() = default;
  virtual std::size_t dim() const = 0;
  // N / n for minibatched data; 1 for targets without a dataset.
  virtual double steps_per_pass() const = 0;
  virtual MinibatchForce evaluate(const Vector& theta, Rng& rng) = 0;
};

// Minibatch forces for a model over a dataset, drawn with replacement.
class ModelForceSource final : public ForceSource {
 public:
  ModelForceSource(const ModelSpec& model, const Dataset& data, const SamplerConfig& cfg);

  std::size_t dim() const override { return model_->dim; }
  double steps_per_pass() const override;
  MinibatchForce evaluate(const Vector& theta, Rng& rng) override;

  std::size_t evaluations() const { return evaluations_; }

 private:
  const ModelSpec* model_;
  const Dataset* data_;
  SamplerConfig cfg_;
  std::size_t evaluations_ = 0;
};

// Cumulative mean of the empirical gradient covariances, kappa_t = 1/t.
struct MovingAverageEstimator {
  SymMatrix i_hat;
  std::size_t step_count = 0;
};

void moving_average_update(MovingAverageEstimator& est, const SymMatrix& v);

// |xi| at or below this uses the xi -> 0 limit of the OU step.
inline constexpr double kXiEpsilon = 1e-12;

// Exact Ornstein-Uhlenbeck flow over h/2 with friction xi and noise
// sqrt(2 A / beta) M^1/2 dW.
Vector ou_half_step(const Vector& p, double xi, const SamplerConfig& cfg, Rng& rng);

// D flow over h/2: xi += (h/2) mu^-1 (p^T M^-1 p - N_d / beta).
double thermostat_half_step(double xi, const Vector& p, const SamplerConfig& cfg);

// One BAODCDOAB step. `cached_force` must be the force at state.theta; on
// return it holds the force at the new position for reuse by the next step,
// so each step costs one force evaluation.
void mccadl_step(ParameterState& state, MinibatchForce& cached_force, ForceSource& source,
                 const SamplerConfig& cfg, Rng& rng);

// Original CCAdL: Euler-type update with the moving-average covariance.
//   p     <- p + h F - h (h/2) beta Sigma p - h xi p + sqrt(2 A h / beta) M^1/2 z
//   theta <- theta + h M^-1 p
//   xi    <- xi + h mu^-1 (p^T M^-1 p - N_d / beta)
// with Sigma = variance_scale * I_hat.
void ccadl_step(ParameterState& state, MovingAverageEstimator& est, ForceSource& source,
                const SamplerConfig& cfg, Rng& rng);

// SGNHT, Euler-type with the same p -> theta -> xi ordering.
void sgnht_step(ParameterState& state, ForceSource& source, const SamplerConfig& cfg, Rng& rng);

// SGHMC with constant friction A; xi is not used.
void sghmc_step(ParameterState& state, ForceSource& source, const SamplerConfig& cfg, Rng& rng);

enum class SamplerKind { sghmc, sgnht, ccadl, mccadl };

std::string_view to_string(SamplerKind kind);
SamplerKind parse_sampler_kind(std::string_view name);

// theta = 0, p ~ N(0, M / beta), xi = A.
ParameterState initial_state(std::size_t dim, const SamplerConfig& cfg, Rng& rng);

struct StepInfo {
  std::size_t step = 0;  // 1-based
  double pass = 0.0;     // step / steps_per_pass
  bool post_burn_in = false;
};

class ChainObserver {
 public:
  virtual ~ChainObserver() = default;
  virtual void on_step(const StepInfo& info, const ParameterState& state) = 0;
  virtual void on_diverged(const StepInfo& /*info*/) {}
};

struct ChainReport {
  std::size_t total_steps = 0;
  std::size_t steps_run = 0;
  std::size_t samples = 0;  // post-burn-in steps handed to the observer
  std::optional<std::size_t> diverged_at;
};

std::size_t total_steps(const SamplerConfig& cfg, double steps_per_pass);

// Runs passes * steps_per_pass steps from initial_state. The rng is
// make_rng(cfg.seed, stream). Stops at the first non-finite state.
ChainReport run_chain(SamplerKind kind, ForceSource& source, const SamplerConfig& cfg,
                      ChainObserver& observer, std::uint64_t stream = 0);

}  // namespace sgmcmc
