#pragma once

#include "fastabs/estimator.hpp"
#include "fastabs/state_machine.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace fastabs {

// ---- presets ---------------------------------------------------------------

/// "2beam" {60,120}, "3beam" {60,90,120}, "4beam" {45,75,105,135},
/// "9grid" 30:15:150, "es481" 481 angles on [30,150] (all degrees, N = 4).
Codebook codebook_preset(const std::string& name, const ArraySpec& array = {});
std::vector<std::string> codebook_preset_names();

/// "handset2": the two-module handset layout.
ModuleLayout layout_preset(const std::string& name);

// ---- scripted scenarios ----------------------------------------------------

struct ScenarioStage {
  std::string label;
  std::vector<double> attenuation_db;  // per module
  /// Applied in order: "power_report", "bs_sweep" (every tx beam) or "blockage_change".
  std::vector<std::string> events;
};

/// Per-tx-beam channels in the frame of module 0, plus a stage script.
struct Scenario {
  std::vector<TransmitBeamChannel> channels;
  std::vector<ScenarioStage> stages;
  SwitchDecision initial;
  double noise_variance = 0.01;
  int num_subcarriers = 300;
  std::string measurement_codebook = "4beam";
  std::string selection_codebook = "9grid";

  void validate(int num_modules) const;
};

/// Five-stage script: module 0 serving; module 0 partly covered (stage II);
/// BS offers a stronger beam (III); module 1 blocked by 20 dB (IV); released (V).
Scenario default_five_stage_scenario();

// ---- experiments -----------------------------------------------------------

struct ExperimentConfig {
  std::string experiment = "fig6";
  int trials = 1000;
  std::uint64_t base_seed = 1;
  std::vector<double> snr_db;        // empty: experiment default
  std::vector<int> num_subcarriers;  // empty: experiment default
  std::string codebook;              // empty: experiment default set
  std::string layout = "handset2";
  std::optional<ModuleLayout> layout_override;
  EstimatorConfig estimator;
  std::optional<Scenario> scenario;  // required for "custom"
  int threads = 0;                   // 0: hardware concurrency

  void validate() const;
};

std::vector<std::string> experiment_ids();

struct ResultRow {
  bool summary = false;
  long trial = 0;
  std::vector<std::string> params;
  std::string metric;
  double value = 0.0;
};

struct ResultTable {
  std::string experiment;
  std::vector<std::string> param_names;
  std::vector<ResultRow> rows;

  std::string header() const;
  void write_csv(std::ostream& out) const;
  std::string to_csv() const;

  /// First summary row matching `metric` and every given (param, value) filter.
  std::optional<double> summary(const std::string& metric,
                                const std::vector<std::pair<std::string, std::string>>& filters = {}) const;
  /// Per-trial values matching `metric` and the filters, in row order.
  std::vector<double> values(const std::string& metric,
                             const std::vector<std::pair<std::string, std::string>>& filters = {}) const;
};

/// Resolved campaign settings (defaults filled in), as written to the sidecar.
ExperimentConfig resolve_config(const ExperimentConfig& config);

ResultTable run_experiment(const ExperimentConfig& config);

/// Empirical CDF F(x) = #{v <= x} / n at each grid point.
std::vector<std::pair<double, double>> compute_cdf(std::vector<double> values, const std::vector<double>& grid);

/// 10 log10(mc_mse / crlb).
double compare_to_crlb(double mc_mse, double crlb);

/// Writes `<prefix>.csv` and `<prefix>.json`.
void write_outputs(const ResultTable& table, const ExperimentConfig& config, const std::string& prefix);

// ---- checks shared by the CLI --check flag and the acceptance binary --------

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<CheckResult> check_experiment(const ResultTable& table);

/// Runs `fn(i)` for i in [0, count) on `threads` workers (0: hardware).
void parallel_for(int count, int threads, const std::function<void(int)>& fn);

}  // namespace fastabs
