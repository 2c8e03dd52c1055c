#pragma once

// Config-driven experiment runner behind the metrosim command line tool.
//
// Config files are INI text: `[section]` headers, `key = value` lines and
// whole-line comments starting with '#' or ';'. Lists are comma separated.
//
//   [experiment]  name = fig2a | fig2b | figS1 | toy_scaling | fluctuation_cases | qpe_bounds
//   [model]       n_atoms, x, kappa_over_g, gt, gt_max, grid_steps, gamma_over_g, deltas, correlation
//   [sampling]    n_trajectories, m_repetitions, seed
//   [output]      directory
//
// Keys that are left out take per-experiment defaults; the seed has no default.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace metrosim {

enum class ExperimentKind { fig2a, fig2b, figS1, toy_scaling, fluctuation_cases, qpe_bounds };

struct ExperimentInfo {
  ExperimentKind kind;
  const char* name;
  const char* description;
};

std::span<const ExperimentInfo> experiment_catalog();
std::optional<ExperimentKind> experiment_from_name(std::string_view name);
const char* experiment_name(ExperimentKind kind);

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::fig2b;
  std::vector<int> n_atoms;
  double x = 0.0;
  double kappa_over_g = 5.0;
  double gt = 0.0;              // evaluation time in 1/g
  double gt_max = 0.0;          // fig2a grid end
  std::size_t grid_steps = 0;   // fig2a grid steps
  double gamma_over_g = 0.0;    // spontaneous emission, qpe_bounds only
  std::vector<double> deltas;   // figS1
  double correlation = 1e-4;    // fluctuation_cases: c in C = c * pattern
  std::size_t n_trajectories = 0;
  int m_repetitions = 1;
  std::optional<std::uint64_t> seed;
  std::filesystem::path output_directory;

  /// Key/value pairs after defaults were applied, in file order of the grammar.
  std::vector<std::pair<std::string, std::string>> echo() const;
};

/// Invalid configuration; problems() lists every offending field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Parses config text and fills defaults for the chosen experiment. Throws
/// ConfigError for syntax errors, unknown keys and unparsable values.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies METROSIM_SEED (pass the raw variable, or nullptr if unset). Setting
/// both the config seed and the variable is an error, as is setting neither.
void resolve_seed(ExperimentConfig& config, const char* env_seed);

/// Every problem with the config; empty when it can be run.
std::vector<std::string> validate_config(const ExperimentConfig& config);

/// Shortest representation that reads back to the same double ('.' decimal).
std::string format_double(double v);

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// Header comment line shared by every CSV.
inline constexpr std::string_view csv_units_line = "# times in 1/g, rates in g, alpha in gamma*|G1-G2|^2/g^2";

struct RunOptions {
  unsigned jobs = 0;  // 0 = logical cores
};

struct CheckResult {
  std::string name;
  bool passed;
  std::string detail;
};

struct OutputFile {
  std::string name;
  std::string sha256;
  std::size_t bytes;
};

enum class RunStatus { ok, diverged };

struct RunManifest {
  ExperimentConfig config;
  std::string seed_source;
  std::vector<OutputFile> files;
  std::vector<CheckResult> checks;
  std::map<std::string, std::map<std::string, double>> fits;  // figS1: per N, A B C and stderrs
  double runtime_seconds = 0.0;
  RunStatus status = RunStatus::ok;
  std::string error;

  bool all_checks_passed() const;
  std::string to_json() const;
};

inline constexpr std::string_view artifact_version = "1.0.0";

/// Runs the experiment, writes its CSV files and manifest.json into the output
/// directory and returns the manifest. Numerical divergence is recorded in the
/// manifest (status diverged) instead of being thrown. Throws ConfigError if
/// validate_config fails and std::runtime_error if the directory is unusable.
RunManifest run_experiment(const ExperimentConfig& config, const RunOptions& options = {},
                           const std::string& seed_source = "config");

}  // namespace metrosim
