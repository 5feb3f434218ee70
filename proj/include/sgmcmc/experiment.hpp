#pragma once

#include "sgmcmc/dataset.hpp"
#include "sgmcmc/metrics.hpp"
#include "sgmcmc/models.hpp"
#include "sgmcmc/samplers.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sgmcmc {

enum class DataKind { none, synthetic, idx, libsvm };

struct DataSource {
  DataKind kind = DataKind::none;

  // synthetic linear regression
  std::size_t synth_n = 10000;
  std::size_t synth_dim = 100;
  std::uint64_t synth_seed = 1;

  // idx: train pair required, test pair optional
  std::string train_images, train_labels;
  std::string test_images, test_labels;
  std::array<int, 2> digits{7, 9};

  // libsvm
  std::string train_path;
  std::string test_path;
  std::size_t min_dim = 0;
};

struct Projection {
  std::size_t out_dim = 100;
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::linear_regression;
  double prior_variance = 10.0;
  std::size_t toy_dim = 10;
  std::optional<Matrix> toy_noise_cov;

  std::vector<SamplerKind> samplers{SamplerKind::mccadl};
  std::vector<double> stepsizes{1e-3};
  std::vector<double> frictions{1.0};

  double beta = 1.0;
  std::optional<double> thermal_mass;  // defaults to the parameter dimension
  double mass = 1.0;                   // M = mass * I
  std::size_t batch = 500;
  double passes = 1.0;
  double burn_in_fraction = 0.2;
  std::uint64_t seed = 0;

  DataSource data;
  std::optional<Projection> projection;
  double checkpoint_every = 1.0;
  std::string output = "out";
  std::size_t jobs = 0;  // 0: all available cores
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Throws InvalidInput on unknown keys, wrong types or out-of-range values.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

// Relative data paths are resolved against $SGMCMC_DATA_DIR when it is set,
// otherwise against `base` (normally the config file's directory).
std::filesystem::path resolve_data_path(const std::string& path, const std::filesystem::path& base);

struct PreparedExperiment {
  ExperimentConfig config;
  ModelSpec model;
  Dataset train;
  std::optional<Dataset> test;
  std::optional<GaussianSummary> reference;  // W2 target
  std::optional<Vector> theta_true;
};

// Loads and checks everything a run needs, before any chain starts.
PreparedExperiment prepare_experiment(const ExperimentConfig& cfg,
                                      const std::filesystem::path& base = ".");

struct MetricsRecord {
  double pass = 0.0;
  std::optional<double> w2;
  std::optional<double> test_ll;
  std::optional<double> log_loss;
  std::optional<double> mean_kinetic;
  std::optional<double> mean_xi;
  bool diverged = false;
};

inline constexpr const char* kCsvHeader = "pass,w2,test_ll,log_loss,mean_kinetic,mean_xi,diverged";

std::string format_real(double x);
std::string format_row(const MetricsRecord& r);

struct CellSpec {
  SamplerKind sampler;
  double h;
  double friction;
  std::size_t index;  // position in the grid; also the rng stream
};

struct CellResult {
  CellSpec cell;
  std::vector<MetricsRecord> rows;
  ChainReport report;
};

std::vector<CellSpec> experiment_grid(const ExperimentConfig& cfg);
SamplerConfig sampler_config(const PreparedExperiment& exp, double h, double friction);
std::string cell_file_name(const CellSpec& cell);

// Runs one chain and collects a metrics row every checkpoint_every passes.
CellResult run_cell(const PreparedExperiment& exp, const CellSpec& cell);

// Runs every cell on a bounded worker pool and writes one CSV per cell,
// summary.csv and run.json into cfg.output. Returns 0 unless I/O fails.
int run_experiment(const PreparedExperiment& exp, std::ostream& log);

}  // namespace sgmcmc
