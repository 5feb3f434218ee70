#include "sgmcmc/experiment.hpp"

#include "sgmcmc/error.hpp"
#include "sgmcmc/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

namespace sgmcmc {

using nlohmann::json;

namespace {

// Reads an object while tracking which keys were used, so typos surface as
// errors instead of silently falling back to defaults.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw InvalidInput(where_ + ": expected a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw InvalidInput(where_ + "." + key + ": " + e.what());
    }
  }

  template <typename T>
  T require(const std::string& key) {
    if (!j_.contains(key)) throw InvalidInput(where_ + ": missing required key '" + key + "'");
    T out{};
    get(key, out);
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw InvalidInput(where_ + ": unknown key '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> used_;
};

std::string_view to_string(DataKind kind) {
  switch (kind) {
    case DataKind::none: return "none";
    case DataKind::synthetic: return "synthetic";
    case DataKind::idx: return "idx";
    case DataKind::libsvm: return "libsvm";
  }
  return "none";
}

DataKind parse_data_kind(std::string_view name) {
  if (name == "none") return DataKind::none;
  if (name == "synthetic") return DataKind::synthetic;
  if (name == "idx") return DataKind::idx;
  if (name == "libsvm") return DataKind::libsvm;
  throw InvalidInput("unknown data source '" + std::string(name) + "'");
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw InvalidInput(where + ": expected an array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw InvalidInput(where + ": expected a square matrix");
    }
    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

json data_to_json(const DataSource& d) {
  json j;
  j["source"] = std::string(to_string(d.kind));
  switch (d.kind) {
    case DataKind::none: break;
    case DataKind::synthetic:
      j["n"] = d.synth_n;
      j["dim"] = d.synth_dim;
      j["seed"] = d.synth_seed;
      break;
    case DataKind::idx:
      j["train_images"] = d.train_images;
      j["train_labels"] = d.train_labels;
      if (!d.test_images.empty()) {
        j["test_images"] = d.test_images;
        j["test_labels"] = d.test_labels;
      }
      j["digits"] = d.digits;
      break;
    case DataKind::libsvm:
      j["train"] = d.train_path;
      if (!d.test_path.empty()) j["test"] = d.test_path;
      j["min_dim"] = d.min_dim;
      break;
  }
  return j;
}

DataSource data_from_json(const json& j) {
  ObjectReader r(j, "data");
  DataSource d;
  d.kind = parse_data_kind(r.require<std::string>("source"));
  switch (d.kind) {
    case DataKind::none: break;
    case DataKind::synthetic:
      r.get("n", d.synth_n);
      r.get("dim", d.synth_dim);
      r.get("seed", d.synth_seed);
      break;
    case DataKind::idx:
      d.train_images = r.require<std::string>("train_images");
      d.train_labels = r.require<std::string>("train_labels");
      r.get("test_images", d.test_images);
      r.get("test_labels", d.test_labels);
      r.get("digits", d.digits);
      if (d.test_images.empty() != d.test_labels.empty()) {
        throw InvalidInput("data: test_images and test_labels must be given together");
      }
      break;
    case DataKind::libsvm:
      d.train_path = r.require<std::string>("train");
      r.get("test", d.test_path);
      r.get("min_dim", d.min_dim);
      break;
  }
  r.finish();
  return d;
}

void check_config(const ExperimentConfig& c) {
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  if (c.samplers.empty()) throw InvalidInput("samplers: at least one sampler is required");
  if (c.stepsizes.empty()) throw InvalidInput("stepsizes: at least one stepsize is required");
  if (c.frictions.empty()) throw InvalidInput("frictions: at least one friction is required");
  for (double h : c.stepsizes) {
    if (!positive(h)) throw InvalidInput("stepsizes: entries must be positive");
  }
  for (double a : c.frictions) {
    if (!(std::isfinite(a) && a >= 0.0)) throw InvalidInput("frictions: entries must be >= 0");
  }
  auto unique = [](auto v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) == v.end();
  };
  if (!unique(c.samplers) || !unique(c.stepsizes) || !unique(c.frictions)) {
    throw InvalidInput("samplers, stepsizes and frictions must not contain duplicates");
  }
  if (!positive(c.checkpoint_every)) throw InvalidInput("checkpoint_every must be positive");
  if (!positive(c.mass)) throw InvalidInput("mass must be positive");
  if (!positive(c.beta)) throw InvalidInput("beta must be positive");
  if (!positive(c.prior_variance)) throw InvalidInput("prior_variance must be positive");
  if (c.thermal_mass && !positive(*c.thermal_mass)) throw InvalidInput("thermal_mass must be positive");
  if (c.batch < 1) throw InvalidInput("batch must be at least 1");
  if (!(std::isfinite(c.passes) && c.passes >= 0.0)) throw InvalidInput("passes must be >= 0");
  if (!(c.burn_in_fraction >= 0.0 && c.burn_in_fraction < 1.0)) {
    throw InvalidInput("burn_in_fraction must lie in [0, 1)");
  }
  if (c.output.empty()) throw InvalidInput("output must not be empty");
  if (c.model == ModelKind::gaussian_toy) {
    if (c.data.kind != DataKind::none) throw InvalidInput("gaussian_toy takes no dataset");
    if (c.toy_dim < 1) throw InvalidInput("toy.dim must be at least 1");
  } else if (c.data.kind == DataKind::none) {
    throw InvalidInput(std::string(to_string(c.model)) + " requires a dataset");
  }
  if (c.model == ModelKind::logistic_regression && c.data.kind == DataKind::synthetic) {
    throw InvalidInput("synthetic data is a regression set; use idx or libsvm for logistic_regression");
  }
  if (c.projection && c.projection->out_dim < 1) {
    throw InvalidInput("projection.out_dim must be at least 1");
  }
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json j;
  j["model"] = std::string(to_string(c.model));
  j["prior_variance"] = c.prior_variance;
  if (c.model == ModelKind::gaussian_toy) {
    json toy;
    toy["dim"] = c.toy_dim;
    if (c.toy_noise_cov) toy["noise_cov"] = matrix_to_json(*c.toy_noise_cov);
    j["toy"] = toy;
  }
  json samplers = json::array();
  for (auto s : c.samplers) samplers.push_back(std::string(to_string(s)));
  j["samplers"] = samplers;
  j["stepsizes"] = c.stepsizes;
  j["frictions"] = c.frictions;
  j["beta"] = c.beta;
  if (c.thermal_mass) j["thermal_mass"] = *c.thermal_mass;
  j["mass"] = c.mass;
  j["batch"] = c.batch;
  j["passes"] = c.passes;
  j["burn_in_fraction"] = c.burn_in_fraction;
  j["seed"] = c.seed;
  j["data"] = data_to_json(c.data);
  if (c.projection) j["projection"] = {{"out_dim", c.projection->out_dim}, {"seed", c.projection->seed}};
  j["checkpoint_every"] = c.checkpoint_every;
  j["output"] = c.output;
  j["jobs"] = c.jobs;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ObjectReader r(j, "config");
  ExperimentConfig c;
  c.model = parse_model_kind(r.require<std::string>("model"));
  r.get("prior_variance", c.prior_variance);
  if (r.has("toy")) {
    ObjectReader toy(r.at("toy"), "toy");
    toy.get("dim", c.toy_dim);
    if (toy.has("noise_cov")) c.toy_noise_cov = matrix_from_json(toy.at("noise_cov"), "toy.noise_cov");
    toy.finish();
  }
  if (r.has("samplers")) {
    c.samplers.clear();
    for (const auto& s : r.at("samplers")) c.samplers.push_back(parse_sampler_kind(s.get<std::string>()));
  }
  r.get("stepsizes", c.stepsizes);
  r.get("frictions", c.frictions);
  r.get("beta", c.beta);
  if (r.has("thermal_mass")) c.thermal_mass = r.require<double>("thermal_mass");
  r.get("mass", c.mass);
  r.get("batch", c.batch);
  r.get("passes", c.passes);
  r.get("burn_in_fraction", c.burn_in_fraction);
  r.get("seed", c.seed);
  if (r.has("data")) c.data = data_from_json(r.at("data"));
  if (r.has("projection")) {
    ObjectReader p(r.at("projection"), "projection");
    Projection proj;
    p.get("out_dim", proj.out_dim);
    p.get("seed", proj.seed);
    p.finish();
    c.projection = proj;
  }
  r.get("checkpoint_every", c.checkpoint_every);
  r.get("output", c.output);
  r.get("jobs", c.jobs);
  r.finish();
  check_config(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

std::filesystem::path resolve_data_path(const std::string& path, const std::filesystem::path& base) {
  const std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  if (const char* root = std::getenv("SGMCMC_DATA_DIR"); root && *root) {
    return std::filesystem::path(root) / p;
  }
  return base / p;
}

SamplerConfig sampler_config(const PreparedExperiment& exp, double h, double friction) {
  const ExperimentConfig& c = exp.config;
  SamplerConfig s = SamplerConfig::defaults(exp.model.dim);
  s.h = h;
  s.friction = friction;
  s.beta = c.beta;
  s.thermal_mass = c.thermal_mass.value_or(static_cast<double>(exp.model.dim));
  s.mass_diag *= c.mass;
  s.batch = c.batch;
  s.seed = c.seed;
  s.passes = c.passes;
  s.burn_in_fraction = c.burn_in_fraction;
  return s;
}

PreparedExperiment prepare_experiment(const ExperimentConfig& cfg, const std::filesystem::path& base) {
  check_config(cfg);
  PreparedExperiment exp;
  exp.config = cfg;
  const DataSource& d = cfg.data;

  switch (d.kind) {
    case DataKind::none: break;
    case DataKind::synthetic: {
      if (d.synth_n < 1 || d.synth_dim < 1) throw InvalidInput("synthetic data needs n, dim >= 1");
      Rng rng = make_rng(d.synth_seed, 0);
      auto synth = synth_linreg(d.synth_n, d.synth_dim, rng);
      exp.train = std::move(synth.data);
      exp.theta_true = std::move(synth.theta_true);
      break;
    }
    case DataKind::idx: {
      const IdxOptions opts{d.digits};
      exp.train = load_idx(resolve_data_path(d.train_images, base),
                           resolve_data_path(d.train_labels, base), opts);
      if (!d.test_images.empty()) {
        exp.test = load_idx(resolve_data_path(d.test_images, base),
                            resolve_data_path(d.test_labels, base), opts);
      }
      break;
    }
    case DataKind::libsvm: {
      exp.train = load_libsvm(resolve_data_path(d.train_path, base), d.min_dim);
      if (!d.test_path.empty()) {
        // The test file may use fewer indices than the training file.
        exp.test = load_libsvm(resolve_data_path(d.test_path, base),
                               std::max(d.min_dim, exp.train.dim()));
        if (exp.test->dim() > exp.train.dim()) {
          exp.train.features.conservativeResize(static_cast<Eigen::Index>(exp.test->dim()), Eigen::NoChange);
          exp.train.features.bottomRows(static_cast<Eigen::Index>(exp.test->dim() - exp.train.dim()))
              .setZero();
        }
      }
      break;
    }
  }

  if (cfg.projection) {
    if (d.kind == DataKind::none) throw InvalidInput("projection requires a dataset");
    const Matrix r = projection_matrix(cfg.projection->out_dim, exp.train.dim(), cfg.projection->seed);
    exp.train = project(exp.train, r);
    if (exp.test) exp.test = project(*exp.test, r);
  }

  const bool binary = cfg.model == ModelKind::logistic_regression;
  if (cfg.model != ModelKind::gaussian_toy) {
    if (exp.train.empty()) throw InvalidInput("training set is empty");
    exp.train.validate(binary);
    if (exp.test) exp.test->validate(binary);
  }

  switch (cfg.model) {
    case ModelKind::gaussian_toy: {
      std::optional<SymMatrix> noise;
      if (cfg.toy_noise_cov) noise = SymMatrix(*cfg.toy_noise_cov);
      exp.model = ModelSpec::gaussian_toy(cfg.toy_dim, noise);
      const auto n = static_cast<Eigen::Index>(cfg.toy_dim);
      exp.reference = GaussianSummary{Vector::Zero(n), SymMatrix(Matrix::Identity(n, n) / cfg.beta)};
      break;
    }
    case ModelKind::linear_regression: {
      exp.model = ModelSpec::linear_regression(exp.train.dim(), cfg.prior_variance);
      GaussianSummary post = linreg_true_posterior(exp.train, cfg.prior_variance);
      exp.reference = GaussianSummary{post.mean, SymMatrix(post.cov.matrix() / cfg.beta)};
      break;
    }
    case ModelKind::logistic_regression:
      exp.model = ModelSpec::logistic_regression(exp.train.dim(), cfg.prior_variance);
      if (!exp.test) exp.test = exp.train;
      break;
  }
  exp.model.validate();

  for (double h : cfg.stepsizes) {
    for (double a : cfg.frictions) sampler_config(exp, h, a).validate(exp.model.dim);
  }
  return exp;
}

std::string format_real(double x) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

std::string format_row(const MetricsRecord& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
  return format_real(r.pass) + "," + opt(r.w2) + "," + opt(r.test_ll) + "," + opt(r.log_loss) + "," +
         opt(r.mean_kinetic) + "," + opt(r.mean_xi) + "," + (r.diverged ? "1" : "0");
}

std::vector<CellSpec> experiment_grid(const ExperimentConfig& cfg) {
  std::vector<CellSpec> cells;
  for (auto s : cfg.samplers) {
    for (double h : cfg.stepsizes) {
      for (double a : cfg.frictions) cells.push_back({s, h, a, cells.size()});
    }
  }
  return cells;
}

std::string cell_file_name(const CellSpec& cell) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s_h%g_A%g.csv", std::string(to_string(cell.sampler)).c_str(),
                cell.h, cell.friction);
  return buf;
}

namespace {

std::vector<double> checkpoints(double passes, double every) {
  std::vector<double> out;
  for (std::size_t k = 1;; ++k) {
    const double cp = static_cast<double>(k) * every;
    if (cp > passes * (1.0 + 1e-12)) break;
    out.push_back(cp);
  }
  if (passes > 0.0 && (out.empty() || out.back() < passes * (1.0 - 1e-12))) out.push_back(passes);
  return out;
}

class CellObserver final : public ChainObserver {
 public:
  CellObserver(const PreparedExperiment& exp, const SamplerConfig& cfg,
               std::optional<W2Reference>& reference)
      : exp_(exp),
        reference_(reference),
        logistic_(exp.model.kind == ModelKind::logistic_regression),
        checkpoints_(checkpoints(cfg.passes, exp.config.checkpoint_every)),
        moments_(exp.model.dim),
        thermostat_(cfg.mass_diag.cwiseInverse()) {
    if (logistic_) ell_.emplace(*exp.test);
  }

  void on_step(const StepInfo& info, const ParameterState& s) override {
    if (info.post_burn_in) {
      moments_.update(s.theta);
      if (ell_) ell_->add(s.theta);
      thermostat_.add(s.momentum, s.xi);
    }
    while (next_ < checkpoints_.size() && info.pass >= checkpoints_[next_] * (1.0 - 1e-12)) {
      emit(checkpoints_[next_++]);
    }
  }

  void on_diverged(const StepInfo& /*info*/) override {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    while (next_ < checkpoints_.size()) {
      MetricsRecord r;
      r.pass = checkpoints_[next_++];
      if (reference_) r.w2 = nan;
      if (logistic_) r.test_ll = r.log_loss = nan;
      r.mean_kinetic = r.mean_xi = nan;
      r.diverged = true;
      rows.push_back(r);
    }
  }

  // Rows for checkpoints the step count rounded past.
  void flush() {
    while (next_ < checkpoints_.size()) emit(checkpoints_[next_++]);
  }

  std::vector<MetricsRecord> rows;

 private:
  void emit(double pass) {
    MetricsRecord r;
    r.pass = pass;
    if (reference_ && moments_.count() >= 2) r.w2 = reference_->distance(*moments_.summary());
    if (logistic_ && moments_.count() >= 1) {
      r.test_ll = test_log_likelihood(moments_.mean(), *exp_.test);
      r.log_loss = ell_->value();
    }
    if (thermostat_.count() >= 1) {
      const auto t = thermostat_.summary();
      r.mean_kinetic = t.mean_kinetic;
      r.mean_xi = t.mean_xi;
    }
    rows.push_back(r);
  }

  const PreparedExperiment& exp_;
  std::optional<W2Reference>& reference_;
  bool logistic_;
  std::vector<double> checkpoints_;
  std::size_t next_ = 0;
  RunningMoments moments_;
  std::optional<ExpectedLogLoss> ell_;
  ThermostatDiagnostics thermostat_;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string cell_csv(const CellResult& r) {
  std::string text = std::string(kCsvHeader) + "\n";
  for (const auto& row : r.rows) text += format_row(row) + "\n";
  return text;
}

}  // namespace

CellResult run_cell(const PreparedExperiment& exp, const CellSpec& cell) {
  const SamplerConfig cfg = sampler_config(exp, cell.h, cell.friction);
  std::optional<W2Reference> reference;
  if (exp.reference) reference.emplace(*exp.reference);
  ModelForceSource source(exp.model, exp.train, cfg);
  CellObserver observer(exp, cfg, reference);
  CellResult result{cell, {}, run_chain(cell.sampler, source, cfg, observer, cell.index)};
  if (!result.report.diverged_at) observer.flush();
  result.rows = std::move(observer.rows);
  return result;
}

int run_experiment(const PreparedExperiment& exp, std::ostream& log) {
  const ExperimentConfig& cfg = exp.config;
  const std::filesystem::path out_dir(cfg.output);
  try {
    std::filesystem::create_directories(out_dir);
  } catch (const std::filesystem::filesystem_error& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }

  const auto cells = experiment_grid(cfg);
  std::vector<std::optional<CellResult>> results(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  std::size_t jobs = cfg.jobs ? cfg.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, cells.size());

  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        CellResult r = run_cell(exp, cells[i]);
        write_text(out_dir / cell_file_name(cells[i]), cell_csv(r));
        {
          std::lock_guard lock(log_mutex);
          log << cell_file_name(cells[i]) << ": " << r.report.steps_run << " steps";
          if (r.report.diverged_at) log << ", diverged at step " << *r.report.diverged_at;
          log << "\n";
        }
        results[i] = std::move(r);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  int status = 0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      log << "error: " << cell_file_name(cells[i]) << ": " << e.what() << "\n";
    }
    status = 1;
  }
  if (status != 0) return status;

  std::string summary = "sampler,h,A,pass,w2,log_loss,diverged,diverged_step\n";
  for (const auto& r : results) {
    const MetricsRecord last = r->rows.empty() ? MetricsRecord{} : r->rows.back();
    auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
    summary += std::string(to_string(r->cell.sampler)) + "," + format_real(r->cell.h) + "," +
               format_real(r->cell.friction) + "," + format_real(last.pass) + "," + opt(last.w2) + "," +
               opt(last.log_loss) + "," + (r->report.diverged_at ? "1" : "0") + "," +
               (r->report.diverged_at ? std::to_string(*r->report.diverged_at) : std::string()) + "\n";
  }

  json meta;
  meta["config"] = to_json(cfg);
  meta["model_dim"] = exp.model.dim;
  meta["train_size"] = exp.train.size();
  if (exp.test) meta["test_size"] = exp.test->size();
  if (exp.theta_true) {
    meta["theta_true"] = std::vector<double>(exp.theta_true->data(),
                                             exp.theta_true->data() + exp.theta_true->size());
  }
  try {
    write_text(out_dir / "summary.csv", summary);
    write_text(out_dir / "run.json", meta.dump(2) + "\n");
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace sgmcmc
