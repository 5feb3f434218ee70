#include "sgmcmc/error.hpp"
#include "sgmcmc/experiment.hpp"
#include "sgmcmc/io.hpp"
#include "sgmcmc/models.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace sgmcmc;

int cmd_run(const std::string& config_path, const std::optional<std::string>& out,
            const std::optional<std::size_t>& jobs, const std::optional<std::uint64_t>& seed) {
  ExperimentConfig cfg = load_config(config_path);
  if (out) cfg.output = *out;
  if (jobs) cfg.jobs = *jobs;
  if (seed) cfg.seed = *seed;
  const auto base = std::filesystem::path(config_path).parent_path();
  const PreparedExperiment exp = prepare_experiment(cfg, base.empty() ? "." : base);
  std::cerr << "model " << to_string(cfg.model) << ", dim " << exp.model.dim << ", "
            << exp.train.size() << " training rows, " << experiment_grid(cfg).size() << " cells\n";
  return run_experiment(exp, std::cerr);
}

int cmd_validate(const std::string& config_path) {
  const ExperimentConfig cfg = load_config(config_path);
  const auto base = std::filesystem::path(config_path).parent_path();
  const PreparedExperiment exp = prepare_experiment(cfg, base.empty() ? "." : base);
  std::cout << "ok: model " << to_string(cfg.model) << ", dim " << exp.model.dim << ", "
            << exp.train.size() << " training rows";
  if (exp.test) std::cout << ", " << exp.test->size() << " test rows";
  std::cout << ", " << experiment_grid(cfg).size() << " cells\n";
  return 0;
}

int cmd_gen_synth(std::size_t n, std::size_t dim, std::uint64_t seed, const std::string& out) {
  Rng rng = make_rng(seed, 0);
  const auto synth = synth_linreg(n, dim, rng);
  write_libsvm(out, synth.data);
  nlohmann::json meta;
  meta["n"] = n;
  meta["dim"] = dim;
  meta["seed"] = seed;
  meta["theta_true"] = std::vector<double>(synth.theta_true.data(),
                                           synth.theta_true.data() + synth.theta_true.size());
  std::ofstream m(out + ".meta.json");
  m << meta.dump(2) << "\n";
  if (!m) throw std::runtime_error("cannot write " + out + ".meta.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic-gradient MCMC thermostats and benchmark harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "Run every (sampler, h, A) cell of an experiment");
  run->add_option("--config", config_path, "Experiment JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out, "Output directory (overrides config)");
  run->add_option("--jobs", jobs, "Worker threads (overrides config)");
  run->add_option("--seed", seed, "Base seed (overrides config)");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a config and load its data");
  validate->add_option("--config", validate_path, "Experiment JSON")->required()->check(CLI::ExistingFile);

  std::size_t n = 0, dim = 0;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic linear-regression set in LIBSVM format");
  gen->add_option("--n", n, "Rows")->required();
  gen->add_option("--dim", dim, "Features")->required();
  gen->add_option("--seed", synth_seed, "Seed")->required();
  gen->add_option("--out", synth_out, "Output path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(config_path, out, jobs, seed);
    if (*validate) return cmd_validate(validate_path);
    if (*gen) return cmd_gen_synth(n, dim, synth_seed, synth_out);
  } catch (const sgmcmc::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const sgmcmc::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
