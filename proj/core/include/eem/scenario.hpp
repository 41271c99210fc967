#pragma once

// Scenario configs and the runner behind the `eemsim` CLI.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eem/control.hpp"
#include "eem/errors.hpp"
#include "eem/models.hpp"

namespace eem {

enum class ScenarioKind {
  free_run,
  standard_kf,
  standard_kf_suboptimal,
  determinate_kf,
  steer_to_clock,
  sync_simple_average,
  sync_best_short,
  sync_best_long,
  balanced,
};

const std::vector<std::string>& scenario_kind_names();
std::string to_string(ScenarioKind kind);
std::optional<ScenarioKind> parse_scenario_kind(const std::string& name);
/// One-line description used by `list-scenarios`.
std::string describe(ScenarioKind kind);

struct ModelSpec {
  double tau = 1.0;
  std::vector<double> sigma1;
  std::vector<double> sigma2;
  MatrixXd V;  // star measurement unless given explicitly
  MatrixXd R;
};

struct ControllerSpec {
  std::optional<VectorXd> q;  // resolved weight; kind default when unset
  std::optional<MatrixXd> F_o;
  std::optional<Eigen::RowVector2d> K_bo;
  std::size_t m = 200;
  std::size_t phase = 0;
  bool stationary = true;
};

struct ScenarioConfig {
  std::string name;
  ScenarioKind kind = ScenarioKind::free_run;
  std::size_t horizon = 100000;
  std::uint64_t seed = 1;
  ModelSpec model;
  ControllerSpec controller;
  std::size_t allan_per_decade = 30;
  std::size_t increment_steps = 10000;
  std::vector<std::string> outputs;
  std::string source;  // normalized JSON echo of the input document
};

/// Aggregated validation failure. what() lists every violated invariant.
class ConfigError : public InvalidArgument {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const noexcept { return errors_; }

 private:
  std::vector<std::string> errors_;
};

/// Parses a JSON document, applies defaults and checks every invariant
/// (noise parameters, V and R, weight normalization, spectral conditions of
/// the controller gains). Throws ConfigError listing all violations.
ScenarioConfig validate_config(const std::string& text);

ScenarioConfig load_config(const std::filesystem::path& path);

EnsembleModel build_model(const ScenarioConfig& cfg);

/// Ensemble weight and controller settings the kind implies.
ControllerConfig resolve_controller(const ScenarioConfig& cfg, const EnsembleModel& model);

struct Artifact {
  std::string path;  // relative to the scenario output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> horizon;
  unsigned allan_threads = 1;
};

struct RunResult {
  std::string name;
  std::filesystem::path directory;
  std::vector<Artifact> artifacts;
  bool partial = false;
  std::string error;
  int exit_code = 0;  // 0 ok, 3 numerical failure
};

/// Runs one scenario into `out_dir / cfg.name` and writes manifest.json there.
/// Numerical failures are caught, reported with exit code 3 and flagged partial.
RunResult run_scenario(const ScenarioConfig& cfg, const std::filesystem::path& out_dir,
                       const RunOptions& options = {});

/// Hex SHA-256 of a file's content.
std::string sha256_file(const std::filesystem::path& path);

std::string library_version();

}  // namespace eem
