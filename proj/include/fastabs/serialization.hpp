#pragma once

#include "fastabs/harness.hpp"

#include <string>

namespace fastabs {

// JSON documents. Angles are in degrees and delays in nanoseconds on disk.
//
// Scenario:
//   {"noise_variance": 0.01, "num_subcarriers": 300,
//    "measurement_codebook": "4beam", "selection_codebook": "9grid",
//    "initial": {"s": 0, "m": 7, "p": 0},
//    "channels": [{"s": 0, "paths": [{"gain_abs": 1, "gain_phase_deg": 0,
//                                     "aoa_deg": 130, "toa_ns": 40}]}],
//    "stages": [{"label": "II", "attenuation_db": [10, 0], "events": ["power_report"]}]}
//
// Layout:
//   {"modules": [{"x_m": 0.06, "y_m": 0.07, "rotation_offset_deg": 0}, ...]}
//
// Experiment config: the ExperimentConfig fields, with "layout" either a
// preset name or an inline layout object and "scenario" an inline scenario
// or a file path.

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string scenario_to_json(const Scenario& scenario);

ModuleLayout parse_layout(const std::string& text);
ModuleLayout load_layout(const std::string& path);
std::string layout_to_json(const ModuleLayout& layout);

/// Fields absent from the document keep the values already in `base`.
ExperimentConfig parse_experiment_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_experiment_config(const std::string& path, ExperimentConfig base = {});
std::string experiment_config_to_json(const ExperimentConfig& config);

/// Resolved config, column set and row counts for the output sidecar.
std::string sidecar_json(const ResultTable& table, const ExperimentConfig& resolved);

}  // namespace fastabs
