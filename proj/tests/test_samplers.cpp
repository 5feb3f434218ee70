#include "sgmcmc/error.hpp"
#include "sgmcmc/metrics.hpp"
#include "sgmcmc/samplers.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace sgmcmc;
using namespace sgmcmc::testing;

namespace {

// Returns the same force and covariance operator at every call.
class FrozenSource final : public ForceSource {
 public:
  FrozenSource(Vector force, CovarianceOperator op, double steps_per_pass = 1.0)
      : force_(std::move(force)), op_(std::move(op)), per_pass_(steps_per_pass) {}

  std::size_t dim() const override { return static_cast<std::size_t>(force_.size()); }
  double steps_per_pass() const override { return per_pass_; }
  MinibatchForce evaluate(const Vector& /*theta*/, Rng& /*rng*/) override {
    ++calls;
    MinibatchForce f;
    f.force = force_;
    f.cov_op = op_;
    f.variance_scale = 1.0;
    return f;
  }

  std::size_t calls = 0;

 private:
  Vector force_;
  CovarianceOperator op_;
  double per_pass_;
};

// Wraps another source; counts calls and can start returning NaN forces.
class CountingSource final : public ForceSource {
 public:
  explicit CountingSource(ForceSource& inner) : inner_(inner) {}
  std::size_t dim() const override { return inner_.dim(); }
  double steps_per_pass() const override { return inner_.steps_per_pass(); }
  MinibatchForce evaluate(const Vector& theta, Rng& rng) override {
    ++calls;
    MinibatchForce f = inner_.evaluate(theta, rng);
    if (poison_after && calls > *poison_after) f.force(0) = std::numeric_limits<double>::quiet_NaN();
    last = f;
    return f;
  }

  std::size_t calls = 0;
  std::optional<std::size_t> poison_after;
  MinibatchForce last;

 private:
  ForceSource& inner_;
};

class Recorder final : public ChainObserver {
 public:
  void on_step(const StepInfo& info, const ParameterState& s) override {
    steps.push_back(info);
    thetas.push_back(s.theta);
  }
  void on_diverged(const StepInfo& info) override { diverged = info; }

  std::vector<StepInfo> steps;
  std::vector<Vector> thetas;
  std::optional<StepInfo> diverged;
};

class MomentObserver final : public ChainObserver {
 public:
  explicit MomentObserver(const SamplerConfig& cfg) : thermo(cfg.mass_diag.cwiseInverse()) {}
  void on_step(const StepInfo& info, const ParameterState& s) override {
    if (!info.post_burn_in) return;
    theta_sq += s.theta.squaredNorm();
    thermo.add(s.momentum, s.xi);
    ++n;
  }
  double mean_theta_sq() const { return theta_sq / static_cast<double>(n); }

  double theta_sq = 0.0;
  std::size_t n = 0;
  ThermostatDiagnostics thermo;
};

SamplerConfig toy_config(std::size_t dim, double h, double friction) {
  SamplerConfig cfg = SamplerConfig::defaults(dim);
  cfg.h = h;
  cfg.friction = friction;
  cfg.batch = 1;
  return cfg;
}

ParameterState state(Vector theta, Vector p, double xi) { return {std::move(theta), std::move(p), xi}; }

}  // namespace

TEST(OuHalfStep, NoFrictionNoNoiseIsIdentity) {
  SamplerConfig cfg = toy_config(3, 0.1, 0.0);
  Rng rng = make_rng(1);
  const Vector p = random_vector(rng, 3);
  EXPECT_EQ(ou_half_step(p, 0.0, cfg, rng), p);
}

TEST(OuHalfStep, DeterministicDecay) {
  SamplerConfig cfg = toy_config(2, 0.1, 0.0);
  Rng rng = make_rng(2);
  Vector p(2);
  p << 1.0, -3.0;
  const Vector out = ou_half_step(p, 2.0, cfg, rng);
  EXPECT_NEAR(out(0), std::exp(-0.1), 1e-15);
  EXPECT_NEAR(out(1), -3.0 * std::exp(-0.1), 1e-15);
}

TEST(OuHalfStep, TinyXiUsesLimitVariance) {
  SamplerConfig cfg = toy_config(1, 0.2, 1.5);
  cfg.beta = 2.0;
  Rng rng = make_rng(3);
  const int reps = 200000;
  double sum_sq = 0.0;
  for (int r = 0; r < reps; ++r) {
    const double x = ou_half_step(Vector::Zero(1), 1e-15, cfg, rng)(0);
    sum_sq += x * x;
  }
  const double expected = cfg.h * cfg.friction / cfg.beta;
  EXPECT_NEAR(sum_sq / reps, expected, 4 * expected * std::sqrt(2.0 / reps));
}

TEST(OuHalfStep, ExactOrnsteinUhlenbeckVariance) {
  SamplerConfig cfg = toy_config(1, 0.3, 2.0);
  Vector mass(1);
  mass << 4.0;
  cfg.mass_diag = mass;
  const double xi = 0.7;
  Rng rng = make_rng(4);
  const int reps = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < reps; ++r) {
    const double x = ou_half_step(Vector::Ones(1), xi, cfg, rng)(0);
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / reps;
  const double var = sum_sq / reps - mean * mean;
  const double expected = 4.0 * cfg.friction / cfg.beta * (1 - std::exp(-xi * cfg.h)) / xi;
  EXPECT_NEAR(mean, std::exp(-xi * cfg.h / 2), 4 * std::sqrt(expected / reps));
  EXPECT_NEAR(var, expected, 4 * expected * std::sqrt(2.0 / reps));
}

TEST(ThermostatHalfStep, Formula) {
  SamplerConfig cfg = toy_config(2, 0.1, 1.0);
  cfg.thermal_mass = 4.0;
  cfg.beta = 0.5;
  Vector mass(2);
  mass << 2.0, 1.0;
  cfg.mass_diag = mass;
  Vector p(2);
  p << 2.0, 1.0;
  // p^T M^-1 p = 3, N_d / beta = 4.
  EXPECT_NEAR(thermostat_half_step(0.3, p, cfg), 0.3 + 0.05 / 4.0 * (3.0 - 4.0), 1e-15);
}

TEST(MccadlStep, HandTraceWithAllStochasticTermsZeroed) {
  SamplerConfig cfg = toy_config(3, 0.1, 0.0);
  cfg.thermal_mass = 2.0;
  Vector mass(3);
  mass << 1.0, 2.0, 4.0;
  cfg.mass_diag = mass;
  FrozenSource src(Vector::Zero(3), CovarianceOperator::zero(3));
  Rng rng = make_rng(5);
  Vector p0(3);
  p0 << 1.0, -2.0, 0.5;
  ParameterState s = state(Vector::Zero(3), p0, 0.0);
  MinibatchForce cached = src.evaluate(s.theta, rng);
  mccadl_step(s, cached, src, cfg, rng);

  // First O sees xi = 0; both D halves see p0; second O sees the updated xi.
  const double kinetic = p0.cwiseProduct(p0).cwiseQuotient(mass).sum();
  const double xi = cfg.h / cfg.thermal_mass * (kinetic - 3.0);
  const Vector p1 = std::exp(-xi * cfg.h / 2) * p0;
  EXPECT_NEAR(s.xi, xi, 1e-15);
  EXPECT_LE((s.momentum - p1).norm(), 1e-15);
  EXPECT_LE((s.theta - cfg.h / 2 * (p0 + p1).cwiseQuotient(mass)).norm(), 1e-15);
}

TEST(MccadlStep, ZeroCovarianceMatchesBaoddoab) {
  SamplerConfig cfg = toy_config(2, 0.05, 1.3);
  cfg.thermal_mass = 2.0;
  Vector f(2);
  f << 0.4, -1.1;
  FrozenSource src(f, CovarianceOperator::zero(2));
  Rng rng = make_rng(6);
  const ParameterState start = state(random_vector(rng, 2), random_vector(rng, 2), 0.8);

  Rng a = make_rng(7), b = make_rng(7);
  ParameterState s = start;
  MinibatchForce cached = src.evaluate(s.theta, a);
  mccadl_step(s, cached, src, cfg, a);

  ParameterState m = start;
  const double hh = cfg.h / 2;
  m.momentum += hh * f;
  m.theta += hh * m.momentum;
  m.momentum = ou_half_step(m.momentum, m.xi, cfg, b);
  m.xi = thermostat_half_step(m.xi, m.momentum, cfg);
  m.xi = thermostat_half_step(m.xi, m.momentum, cfg);
  m.momentum = ou_half_step(m.momentum, m.xi, cfg, b);
  m.theta += hh * m.momentum;
  m.momentum += hh * f;

  EXPECT_LE((s.theta - m.theta).norm(), 1e-14);
  EXPECT_LE((s.momentum - m.momentum).norm(), 1e-14);
  EXPECT_NEAR(s.xi, m.xi, 1e-14);
}

TEST(MccadlStep, CStepAppliesCovarianceExponentialOverH) {
  // With frozen zero force, A = 0 and xi = 0, only D and C touch the state;
  // D does not change p, so p_out = exp(h Sigma_tilde) p_in.
  Rng rng = make_rng(8);
  const Matrix g = random_matrix(rng, 3, 5);
  const auto op = CovarianceOperator::from_gradients(g, -0.7);
  SamplerConfig cfg = toy_config(3, 0.2, 0.0);
  cfg.thermal_mass = 1e12;  // freeze xi near 0
  FrozenSource src(Vector::Zero(3), op);
  const Vector p0 = random_vector(rng, 3);
  ParameterState s = state(Vector::Zero(3), p0, 0.0);
  MinibatchForce cached = src.evaluate(s.theta, rng);
  mccadl_step(s, cached, src, cfg, rng);
  EXPECT_LE(rel_err(s.momentum, dense_expmv(op.dense(), cfg.h, p0)), 1e-9);
}

TEST(MccadlStep, PalindromeReversesDeterministicSkeleton) {
  // Clean harmonic force, A = 0, zero covariance: the step is deterministic and
  // the flip (theta, p, xi) -> (theta, -p, -xi) maps it onto its inverse.
  const auto model = ModelSpec::gaussian_toy(4);
  const Dataset none;
  SamplerConfig cfg = toy_config(4, 0.15, 0.0);
  cfg.thermal_mass = 3.0;
  Vector mass(4);
  mass << 1.0, 0.5, 2.0, 3.0;
  cfg.mass_diag = mass;
  ModelForceSource src(model, none, cfg);
  Rng rng = make_rng(9);

  for (int trial = 0; trial < 10; ++trial) {
    const ParameterState start = state(random_vector(rng, 4), random_vector(rng, 4), 0.3 * trial - 1.0);
    ParameterState s = start;
    MinibatchForce cached = src.evaluate(s.theta, rng);
    mccadl_step(s, cached, src, cfg, rng);

    s.momentum = -s.momentum;
    s.xi = -s.xi;
    mccadl_step(s, cached, src, cfg, rng);

    EXPECT_LE((s.theta - start.theta).norm(), 1e-10);
    EXPECT_LE((s.momentum + start.momentum).norm(), 1e-10);
    EXPECT_NEAR(s.xi, -start.xi, 1e-10);
  }
}

TEST(MccadlStep, OneForceEvaluationPerIteration) {
  const auto model = ModelSpec::gaussian_toy(2, SymMatrix::identity(2));
  const Dataset none;
  SamplerConfig cfg = toy_config(2, 0.1, 1.0);
  cfg.passes = 250;
  ModelForceSource inner(model, none, cfg);
  CountingSource src(inner);
  Recorder rec;
  const ChainReport report = run_chain(SamplerKind::mccadl, src, cfg, rec);
  EXPECT_EQ(report.steps_run, 250u);
  EXPECT_EQ(src.calls, 251u);  // one initial force, then one per step
  EXPECT_EQ(inner.evaluations(), 251u);
}

TEST(MccadlStep, MeanKineticEnergyOnCleanToy) {
  const auto model = ModelSpec::gaussian_toy(5);
  const Dataset none;
  SamplerConfig cfg = toy_config(5, 0.05, 1.0);
  cfg.passes = 1e6;
  cfg.burn_in_fraction = 0.01;
  cfg.seed = 21;
  ModelForceSource src(model, none, cfg);
  MomentObserver obs(cfg);
  run_chain(SamplerKind::mccadl, src, cfg, obs);
  EXPECT_NEAR(obs.thermo.summary().mean_kinetic, 5.0, 0.02 * 5.0);
}

TEST(CcadlStep, FirstIterationUsesEmpiricalCovariance) {
  Rng rng = make_rng(10);
  Dataset data;
  data.features = random_matrix(rng, 3, 40);
  data.labels = random_vector(rng, 40);
  const auto model = ModelSpec::linear_regression(3, 10.0);
  SamplerConfig cfg = toy_config(3, 1e-3, 1.0);
  cfg.batch = 10;
  ModelForceSource inner(model, data, cfg);
  CountingSource src(inner);
  MovingAverageEstimator est;
  ParameterState s = state(Vector::Zero(3), random_vector(rng, 3), 1.0);
  ccadl_step(s, est, src, cfg, rng);
  EXPECT_EQ(est.step_count, 1u);
  EXPECT_EQ(est.i_hat.matrix(), src.last.cov_op.empirical_covariance().matrix());
}

TEST(CcadlStep, IsolatedFriction) {
  SamplerConfig cfg = toy_config(2, 0.1, 0.0);
  FrozenSource src(Vector::Zero(2), CovarianceOperator::zero(2));
  Rng rng = make_rng(11);
  MovingAverageEstimator est;
  Vector p0(2);
  p0 << 1.0, 2.0;
  ParameterState s = state(Vector::Zero(2), p0, 0.5);
  ccadl_step(s, est, src, cfg, rng);
  EXPECT_LE((s.momentum - (1 - 0.1 * 0.5) * p0).norm(), 1e-15);
}

TEST(CcadlStep, EulerUpdateWithCovarianceTerm) {
  // Frozen operator with known V; Sigma = variance_scale * I_hat = V here.
  Matrix g(1, 2);
  g << 1.0, -1.0;  // V = 2
  SamplerConfig cfg = toy_config(1, 0.1, 0.0);
  cfg.thermal_mass = 2.0;
  FrozenSource src(Vector::Constant(1, 0.5), CovarianceOperator(g, -1.0));
  Rng rng = make_rng(12);
  MovingAverageEstimator est;
  ParameterState s = state(Vector::Zero(1), Vector::Constant(1, 1.0), 0.2);
  ccadl_step(s, est, src, cfg, rng);
  const double p = 1.0 + 0.1 * 0.5 - 0.1 * 0.05 * 2.0 * 1.0 - 0.1 * 0.2 * 1.0;
  EXPECT_NEAR(s.momentum(0), p, 1e-15);
  EXPECT_NEAR(s.theta(0), 0.1 * p, 1e-15);
  EXPECT_NEAR(s.xi, 0.2 + 0.1 / 2.0 * (p * p - 1.0), 1e-15);
}

TEST(MovingAverage, FirstUpdateCopies) {
  Rng rng = make_rng(13);
  MovingAverageEstimator est;
  const SymMatrix v(random_matrix(rng, 4, 4));
  moving_average_update(est, v);
  EXPECT_EQ(est.i_hat.matrix(), v.matrix());
  EXPECT_EQ(est.step_count, 1u);
}

TEST(MovingAverage, TwoTermMean) {
  MovingAverageEstimator est;
  moving_average_update(est, SymMatrix::zero(1));
  moving_average_update(est, SymMatrix(Matrix::Constant(1, 1, 2.0)));
  EXPECT_DOUBLE_EQ(est.i_hat(0, 0), 1.0);
}

TEST(MovingAverage, EqualsArithmeticMean) {
  Rng rng = make_rng(14);
  MovingAverageEstimator est;
  Matrix sum = Matrix::Zero(5, 5);
  for (int t = 1; t <= 50; ++t) {
    const SymMatrix v(random_matrix(rng, 5, 5));
    sum += v.matrix();
    moving_average_update(est, v);
  }
  EXPECT_LE((est.i_hat.matrix() - sum / 50.0).norm(), 1e-12);
}

TEST(MovingAverage, DimensionMismatch) {
  MovingAverageEstimator est;
  moving_average_update(est, SymMatrix::identity(2));
  EXPECT_THROW(moving_average_update(est, SymMatrix::identity(3)), InvalidInput);
}

TEST(MovingAverage, IncrementsShrinkLikeOneOverT) {
  // Frozen theta: inputs are i.i.d. empirical covariances.
  Rng rng = make_rng(15);
  Dataset data;
  data.features = random_matrix(rng, 3, 200);
  data.labels = random_vector(rng, 200);
  const auto model = ModelSpec::linear_regression(3, 10.0);
  SamplerConfig cfg = toy_config(3, 1e-3, 1.0);
  const Vector theta = random_vector(rng, 3);
  MovingAverageEstimator est;
  double max_scaled = 0.0, max_spread = 0.0;
  Matrix prev;
  for (int t = 1; t <= 2000; ++t) {
    const auto idx = draw_minibatch(data, 20, rng);
    const SymMatrix v = noisy_force_and_cov(model, data, theta, idx, cfg, rng).cov_op.empirical_covariance();
    if (t > 1) max_spread = std::max(max_spread, (v.matrix() - est.i_hat.matrix()).norm());
    moving_average_update(est, v);
    if (t > 1) max_scaled = std::max(max_scaled, t * (est.i_hat.matrix() - prev).norm());
    prev = est.i_hat.matrix();
  }
  // t * |I_t - I_{t-1}| = |V_t - I_{t-1}| stays bounded.
  EXPECT_LE(max_scaled, max_spread * (1 + 1e-12));
  EXPECT_GT(max_spread, 0.0);
}

TEST(SgnhtStep, FreeFlight) {
  SamplerConfig cfg = toy_config(2, 0.1, 0.0);
  FrozenSource src(Vector::Zero(2), CovarianceOperator::zero(2));
  Rng rng = make_rng(16);
  Vector p0(2);
  p0 << 1.0, -1.0;
  ParameterState s = state(Vector::Zero(2), p0, 0.0);
  sgnht_step(s, src, cfg, rng);
  EXPECT_EQ(s.momentum, p0);
  EXPECT_LE((s.theta - 0.1 * p0).norm(), 1e-15);
}

TEST(SgnhtStep, ColdMomentumLowersXi) {
  SamplerConfig cfg = toy_config(3, 0.1, 0.0);
  cfg.thermal_mass = 2.0;
  cfg.beta = 4.0;
  FrozenSource src(Vector::Zero(3), CovarianceOperator::zero(3));
  Rng rng = make_rng(17);
  ParameterState s = state(Vector::Zero(3), Vector::Zero(3), 0.5);
  sgnht_step(s, src, cfg, rng);
  EXPECT_NEAR(s.xi, 0.5 - 0.1 / 2.0 * 3.0 / 4.0, 1e-15);
}

TEST(SgnhtStep, MeanXiMatchesFrictionOnToy) {
  const auto model = ModelSpec::gaussian_toy(4);
  const Dataset none;
  SamplerConfig cfg = toy_config(4, 0.01, 2.0);
  cfg.passes = 1e6;
  cfg.burn_in_fraction = 0.05;
  cfg.seed = 3;
  ModelForceSource src(model, none, cfg);
  MomentObserver obs(cfg);
  run_chain(SamplerKind::sgnht, src, cfg, obs);
  EXPECT_NEAR(obs.thermo.summary().mean_xi, 2.0, 0.05 * 2.0);
}

TEST(SghmcStep, FreeFlightWithoutFriction) {
  SamplerConfig cfg = toy_config(2, 0.1, 0.0);
  FrozenSource src(Vector::Zero(2), CovarianceOperator::zero(2));
  Rng rng = make_rng(18);
  Vector p0(2);
  p0 << 0.5, 2.0;
  ParameterState s = state(Vector::Zero(2), p0, 0.0);
  sghmc_step(s, src, cfg, rng);
  EXPECT_EQ(s.momentum, p0);
  EXPECT_LE((s.theta - 0.1 * p0).norm(), 1e-15);
}

TEST(SghmcStep, FrictionScalesMomentum) {
  SamplerConfig cfg = toy_config(2, 0.1, 3.0);
  FrozenSource src(Vector::Zero(2), CovarianceOperator::zero(2));
  Vector p0(2);
  p0 << 1.0, -2.0;
  Rng rng = make_rng(19);
  Rng copy = rng;
  ParameterState s = state(Vector::Zero(2), p0, 0.0);
  sghmc_step(s, src, cfg, rng);
  const Vector noise = std::sqrt(2.0 * cfg.friction * cfg.h / cfg.beta) * standard_normal(copy, 2);
  EXPECT_LE((s.momentum - ((1 - 0.1 * 3.0) * p0 + noise)).norm(), 1e-15);
}

TEST(SghmcStep, GibbsMarginalOnToy) {
  const auto model = ModelSpec::gaussian_toy(3);
  const Dataset none;
  SamplerConfig cfg = toy_config(3, 0.02, 1.0);
  cfg.passes = 1e6;
  cfg.burn_in_fraction = 0.05;
  cfg.seed = 5;
  ModelForceSource src(model, none, cfg);
  MomentObserver obs(cfg);
  run_chain(SamplerKind::sghmc, src, cfg, obs);
  EXPECT_NEAR(obs.mean_theta_sq() / 3.0, 1.0, 0.03);
}

TEST(InitialState, DrawsStationaryMomentum) {
  SamplerConfig cfg = toy_config(20000, 0.1, 2.5);
  cfg.beta = 4.0;
  cfg.mass_diag = Vector::Constant(20000, 9.0);
  Rng rng = make_rng(20);
  const ParameterState s = initial_state(20000, cfg, rng);
  EXPECT_EQ(s.theta, Vector::Zero(20000));
  EXPECT_EQ(s.xi, 2.5);
  const double var = s.momentum.squaredNorm() / 20000;
  EXPECT_NEAR(var, 9.0 / 4.0, 4 * 9.0 / 4.0 * std::sqrt(2.0 / 20000));
}

TEST(SamplerConfig, Validation) {
  SamplerConfig cfg = SamplerConfig::defaults(3);
  EXPECT_NO_THROW(cfg.validate(3));
  EXPECT_EQ(cfg.thermal_mass, 3.0);
  EXPECT_THROW(cfg.validate(4), InvalidInput);
  cfg.h = 0.0;
  EXPECT_THROW(cfg.validate(3), InvalidInput);
  cfg = SamplerConfig::defaults(3);
  cfg.burn_in_fraction = 1.0;
  EXPECT_THROW(cfg.validate(3), InvalidInput);
  cfg = SamplerConfig::defaults(3);
  cfg.friction = -1.0;
  EXPECT_THROW(cfg.validate(3), InvalidInput);
  cfg = SamplerConfig::defaults(3);
  cfg.mass_diag(1) = 0.0;
  EXPECT_THROW(cfg.validate(3), InvalidInput);
}

TEST(RunChain, ZeroPassesRunsNothing) {
  FrozenSource src(Vector::Zero(2), CovarianceOperator::zero(2));
  SamplerConfig cfg = toy_config(2, 0.1, 1.0);
  cfg.passes = 0;
  Recorder rec;
  const ChainReport r = run_chain(SamplerKind::mccadl, src, cfg, rec);
  EXPECT_EQ(r.samples, 0u);
  EXPECT_EQ(r.steps_run, 0u);
  EXPECT_FALSE(r.diverged_at);
  EXPECT_EQ(src.calls, 0u);
}

TEST(RunChain, IdenticalSeedsGiveIdenticalTraces) {
  Rng rng = make_rng(22);
  Dataset data;
  data.features = random_matrix(rng, 3, 100);
  data.labels = random_vector(rng, 100);
  const auto model = ModelSpec::linear_regression(3, 10.0);
  SamplerConfig cfg = toy_config(3, 1e-3, 1.0);
  cfg.batch = 10;
  cfg.passes = 5;
  cfg.seed = 77;
  for (auto kind : {SamplerKind::sghmc, SamplerKind::sgnht, SamplerKind::ccadl, SamplerKind::mccadl}) {
    ModelForceSource a(model, data, cfg), b(model, data, cfg);
    Recorder ra, rb;
    run_chain(kind, a, cfg, ra, 3);
    run_chain(kind, b, cfg, rb, 3);
    ASSERT_EQ(ra.thetas.size(), 50u);
    for (std::size_t k = 0; k < ra.thetas.size(); ++k) EXPECT_EQ(ra.thetas[k], rb.thetas[k]);
  }
}

TEST(RunChain, StreamsAreIndependent) {
  const auto model = ModelSpec::gaussian_toy(2);
  const Dataset none;
  SamplerConfig cfg = toy_config(2, 0.1, 1.0);
  cfg.passes = 10;
  ModelForceSource src(model, none, cfg);
  Recorder a, b;
  run_chain(SamplerKind::sgnht, src, cfg, a, 0);
  run_chain(SamplerKind::sgnht, src, cfg, b, 1);
  EXPECT_NE(a.thetas.back(), b.thetas.back());
}

TEST(RunChain, BurnInAndPassAccounting) {
  FrozenSource src(Vector::Zero(2), CovarianceOperator::zero(2), 4.0);
  SamplerConfig cfg = toy_config(2, 0.1, 1.0);
  cfg.passes = 2.5;
  cfg.burn_in_fraction = 0.2;
  Recorder rec;
  const ChainReport r = run_chain(SamplerKind::sghmc, src, cfg, rec);
  EXPECT_EQ(r.total_steps, 10u);
  EXPECT_EQ(r.samples, 8u);
  EXPECT_FALSE(rec.steps[1].post_burn_in);
  EXPECT_TRUE(rec.steps[2].post_burn_in);
  EXPECT_DOUBLE_EQ(rec.steps.back().pass, 2.5);
}

TEST(RunChain, NonFiniteStateMarksDivergence) {
  const auto model = ModelSpec::gaussian_toy(2);
  const Dataset none;
  SamplerConfig cfg = toy_config(2, 0.1, 1.0);
  cfg.passes = 100;
  for (auto kind : {SamplerKind::sghmc, SamplerKind::sgnht, SamplerKind::ccadl, SamplerKind::mccadl}) {
    ModelForceSource inner(model, none, cfg);
    CountingSource src(inner);
    src.poison_after = 30;
    Recorder rec;
    const ChainReport r = run_chain(kind, src, cfg, rec);
    ASSERT_TRUE(r.diverged_at) << to_string(kind);
    EXPECT_LE(*r.diverged_at, 31u);
    EXPECT_EQ(rec.steps.size() + 1, *r.diverged_at);
    ASSERT_TRUE(rec.diverged);
    EXPECT_EQ(rec.diverged->step, *r.diverged_at);
  }
}

TEST(RunChain, UnstableStepsizeDivergesInsteadOfThrowing) {
  const auto model = ModelSpec::gaussian_toy(2);
  const Dataset none;
  SamplerConfig cfg = toy_config(2, 3.0, 0.0);
  cfg.passes = 5000;
  ModelForceSource src(model, none, cfg);
  Recorder rec;
  const ChainReport r = run_chain(SamplerKind::sghmc, src, cfg, rec);
  EXPECT_TRUE(r.diverged_at);
}

TEST(SamplerKind, ParseRoundTrip) {
  for (auto kind : {SamplerKind::sghmc, SamplerKind::sgnht, SamplerKind::ccadl, SamplerKind::mccadl}) {
    EXPECT_EQ(parse_sampler_kind(to_string(kind)), kind);
  }
  EXPECT_THROW(parse_sampler_kind("sgld"), InvalidInput);
}
