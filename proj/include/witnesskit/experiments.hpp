#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "witnesskit/optimize.hpp"

namespace witnesskit::cli {

/// Invalid or inconsistent run configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kVersion = "0.1.0";

const std::vector<std::string>& experiment_names();

/// Effective configuration of one run. Zero or empty fields take the
/// experiment's defaults in `load_config`.
struct RunConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string out = ".";
  int jobs = 1;
  bool optimize = false;
  std::vector<int> ks;

  int d = 0;
  int count = 0;
  int rank = 0;
  std::string measure = "haar";
  std::string state = "random";
  bool require_faithful = false;
  std::vector<NoiseModel> noise_models;

  std::vector<double> q1_grid;

  int n_qubits = 4;
  double coupling_j = 1.0;
  double gamma = 0.5;
  double field_h = 0.5;
  std::vector<double> weights;
  int excited_index = 1;

  std::string preset = "maxent-vs-product";
  int grid_size = 61;
  std::optional<CVector> psi1;
  std::optional<CVector> psi2;

  OptimizerConfig optimizer;
};

/// Validates a JSON config (unknown keys are rejected) and fills defaults.
RunConfig load_config(const std::string& experiment, const nlohmann::json& j);
RunConfig load_config_file(const std::string& experiment, const std::string& path);
/// Re-derives defaults after command-line overrides; throws ConfigError.
void finalize_config(RunConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);

/// Per-state thresholds as reported in the tables.
struct ThresholdReport {
  std::string state_id;
  int d = 0;
  NoiseModel noise_model = NoiseModel::depolarizing;
  double p_sep_inf = 0.0;
  double p_u2_sup = 0.0;
  std::map<int, double> tuple_thresholds;  // keyed by k
  int restarts = 0;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;

  /// Every tuple threshold is at most p_sep_inf + tol.
  bool consistent(double tol = 1e-6) const;
};

/// Tabular result of one experiment.
struct ExperimentResult {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> failed_ids;
  std::vector<std::string> warnings;
  nlohmann::json summary = nlohmann::json::object();  // written as <experiment>.summary.json when non-empty
  nlohmann::json timing = nlohmann::json::object();   // manifest only
};

ExperimentResult cmd_pure_thresholds(const RunConfig& cfg);
ExperimentResult cmd_table1(const RunConfig& cfg);
ExperimentResult cmd_ghz(const RunConfig& cfg);
ExperimentResult cmd_xy(const RunConfig& cfg);
ExperimentResult cmd_random_scan(const RunConfig& cfg);
ExperimentResult cmd_envelope(const RunConfig& cfg);

/// Runs the experiment, writes CSV, summary and manifest under cfg.out and
/// returns the process exit code (0 ok, 3 solver failures).
int run_experiment(const RunConfig& cfg, const std::vector<std::string>& argv, std::ostream& log);

/// "%.9g"; empty for NaN.
std::string format_number(double v);
/// RFC 4180 field quoting.
std::string csv_field(const std::string& s);
void write_csv(std::ostream& os, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

/// Seed for item `index` of a run with base seed `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Runs fn(0..n-1) on up to `jobs` threads; exceptions are rethrown in index order.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

}  // namespace witnesskit::cli
