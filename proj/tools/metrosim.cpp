// metrosim command line: run, validate and list the reproduction experiments.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "metrosim/harness.hpp"

namespace {

constexpr int exit_validation = 2;
constexpr int exit_divergence = 3;
constexpr int exit_check_failed = 4;

metrosim::ExperimentConfig load(const std::string& path) {
  auto config = metrosim::load_config(path);
  metrosim::resolve_seed(config, std::getenv("METROSIM_SEED"));
  return config;
}

void report_problems(const metrosim::ConfigError& e) {
  std::cerr << "invalid configuration:\n";
  for (const auto& p : e.problems()) std::cerr << "  " << p << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metrosim: quantum-bus metrology experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run an experiment config and write CSV files plus manifest.json");
  std::string run_path, output;
  unsigned jobs = 0;
  bool check = false;
  run->add_option("config", run_path, "experiment config file")->required();
  run->add_option("--jobs,-j", jobs, "worker threads (default: logical cores)");
  run->add_flag("--check", check, "exit with 4 if an acceptance threshold fails");
  run->add_option("--output,-o", output, "output directory, overriding [output] directory");

  auto* validate = app.add_subcommand("validate", "check a config file without running it");
  std::string validate_path;
  validate->add_option("config", validate_path, "experiment config file")->required();

  auto* list = app.add_subcommand("list-experiments", "print the available experiments");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& e : metrosim::experiment_catalog()) std::cout << e.name << "\t" << e.description << "\n";
    return 0;
  }

  try {
    if (validate->parsed()) {
      const auto config = load(validate_path);
      if (const auto problems = metrosim::validate_config(config); !problems.empty()) {
        throw metrosim::ConfigError(problems);
      }
      std::cout << "ok: " << metrosim::experiment_name(config.experiment) << "\n";
      return 0;
    }

    auto config = load(run_path);
    const bool from_env = std::getenv("METROSIM_SEED") != nullptr;
    if (!output.empty()) config.output_directory = output;
    const auto manifest = metrosim::run_experiment(config, {jobs}, from_env ? "environment" : "config");
    for (const auto& f : manifest.files) std::cout << f.sha256 << "  " << f.name << "\n";
    for (const auto& c : manifest.checks)
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << "\n";
    std::cout << "manifest: " << (config.output_directory / "manifest.json").string() << "\n";
    if (manifest.status == metrosim::RunStatus::diverged) {
      std::cerr << "error: " << manifest.error << "\n";
      return exit_divergence;
    }
    if (check && !manifest.all_checks_passed()) return exit_check_failed;
    return 0;
  } catch (const metrosim::ConfigError& e) {
    report_problems(e);
    return exit_validation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
