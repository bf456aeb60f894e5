#include "fastabs/serialization.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fastabs {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json parse(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string(what) + ": " + e.what());
  }
}

json scenario_json(const Scenario& sc) {
  json j;
  j["noise_variance"] = sc.noise_variance;
  j["num_subcarriers"] = sc.num_subcarriers;
  j["measurement_codebook"] = sc.measurement_codebook;
  j["selection_codebook"] = sc.selection_codebook;
  j["initial"] = {{"s", sc.initial.tx_beam}, {"m", sc.initial.beam}, {"p", sc.initial.module}};
  j["channels"] = json::array();
  for (const auto& ch : sc.channels) {
    json paths = json::array();
    for (const auto& p : ch.paths)
      paths.push_back({{"gain_abs", std::abs(p.gain)},
                       {"gain_phase_deg", rad2deg(std::arg(p.gain))},
                       {"aoa_deg", rad2deg(p.aoa)},
                       {"toa_ns", p.toa * 1e9}});
    j["channels"].push_back({{"s", ch.tx_beam}, {"paths", paths}});
  }
  j["stages"] = json::array();
  for (const auto& st : sc.stages)
    j["stages"].push_back({{"label", st.label}, {"attenuation_db", st.attenuation_db}, {"events", st.events}});
  return j;
}

Scenario scenario_from(const json& j) {
  Scenario sc;
  try {
    sc.noise_variance = j.value("noise_variance", sc.noise_variance);
    sc.num_subcarriers = j.value("num_subcarriers", sc.num_subcarriers);
    sc.measurement_codebook = j.value("measurement_codebook", sc.measurement_codebook);
    sc.selection_codebook = j.value("selection_codebook", sc.selection_codebook);
    if (j.contains("initial")) {
      const auto& in = j.at("initial");
      sc.initial = {in.value("s", 0), in.value("m", 0), in.value("p", 0), 0.0};
    }
    for (const auto& c : j.at("channels")) {
      TransmitBeamChannel ch;
      ch.tx_beam = c.at("s").get<int>();
      for (const auto& p : c.at("paths"))
        ch.paths.push_back({std::polar(p.at("gain_abs").get<double>(), deg2rad(p.value("gain_phase_deg", 0.0))),
                            deg2rad(p.at("aoa_deg").get<double>()), p.value("toa_ns", 0.0) * 1e-9});
      ch.canonicalize();
      sc.channels.push_back(std::move(ch));
    }
    std::sort(sc.channels.begin(), sc.channels.end(),
              [](const auto& a, const auto& b) { return a.tx_beam < b.tx_beam; });
    if (j.contains("stages"))
      for (const auto& st : j.at("stages"))
        sc.stages.push_back({st.value("label", std::string()), st.at("attenuation_db").get<std::vector<double>>(),
                             st.value("events", std::vector<std::string>{})});
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
  return sc;
}

json layout_json(const ModuleLayout& layout) {
  json mods = json::array();
  for (const auto& m : layout.modules())
    mods.push_back({{"x_m", m.x}, {"y_m", m.y}, {"rotation_offset_deg", rad2deg(m.rotation_offset)}});
  return {{"modules", mods}};
}

ModuleLayout layout_from(const json& j) {
  try {
    std::vector<ModulePlacement> mods;
    for (const auto& m : j.at("modules"))
      mods.push_back({m.at("x_m").get<double>(), m.at("y_m").get<double>(),
                      deg2rad(m.value("rotation_offset_deg", 0.0))});
    return ModuleLayout(std::move(mods));
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("layout: ") + e.what());
  }
}

json estimator_json(const EstimatorConfig& e) {
  return {{"max_paths", e.max_paths},         {"newton_steps", e.newton_steps},
          {"cyclic_rounds", e.cyclic_rounds}, {"final_rounds", e.final_rounds},
          {"final_tolerance", e.final_tolerance}, {"kappa", e.kappa},
          {"relative_floor", e.relative_floor}};
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = c.experiment;
  j["trials"] = c.trials;
  j["seed"] = c.base_seed;
  j["snr_db"] = c.snr_db;
  j["ns"] = c.num_subcarriers;
  j["codebook"] = c.codebook;
  if (c.layout_override)
    j["layout"] = layout_json(*c.layout_override);
  else
    j["layout"] = c.layout;
  j["estimator"] = estimator_json(c.estimator);
  if (c.scenario) j["scenario"] = scenario_json(*c.scenario);
  j["threads"] = c.threads;
  return j;
}

}  // namespace

Scenario parse_scenario(const std::string& text) { return scenario_from(parse(text, "scenario")); }
Scenario load_scenario(const std::string& path) { return parse_scenario(read_file(path)); }
std::string scenario_to_json(const Scenario& scenario) { return scenario_json(scenario).dump(2); }

ModuleLayout parse_layout(const std::string& text) { return layout_from(parse(text, "layout")); }
ModuleLayout load_layout(const std::string& path) { return parse_layout(read_file(path)); }
std::string layout_to_json(const ModuleLayout& layout) { return layout_json(layout).dump(2); }

ExperimentConfig parse_experiment_config(const std::string& text, ExperimentConfig base) {
  const json j = parse(text, "config");
  try {
    base.experiment = j.value("experiment", base.experiment);
    base.trials = j.value("trials", base.trials);
    base.base_seed = j.value("seed", base.base_seed);
    base.snr_db = j.value("snr_db", base.snr_db);
    base.num_subcarriers = j.value("ns", base.num_subcarriers);
    base.codebook = j.value("codebook", base.codebook);
    base.threads = j.value("threads", base.threads);
    if (j.contains("layout")) {
      if (j["layout"].is_string()) {
        base.layout = j["layout"].get<std::string>();
        base.layout_override.reset();
      } else {
        base.layout_override = layout_from(j["layout"]);
      }
    }
    if (j.contains("estimator")) {
      const auto& e = j["estimator"];
      auto& est = base.estimator;
      est.max_paths = e.value("max_paths", est.max_paths);
      est.newton_steps = e.value("newton_steps", est.newton_steps);
      est.cyclic_rounds = e.value("cyclic_rounds", est.cyclic_rounds);
      est.final_rounds = e.value("final_rounds", est.final_rounds);
      est.final_tolerance = e.value("final_tolerance", est.final_tolerance);
      est.kappa = e.value("kappa", est.kappa);
      est.relative_floor = e.value("relative_floor", est.relative_floor);
    }
    if (j.contains("scenario")) {
      if (j["scenario"].is_string())
        base.scenario = load_scenario(j["scenario"].get<std::string>());
      else
        base.scenario = scenario_from(j["scenario"]);
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return base;
}

ExperimentConfig load_experiment_config(const std::string& path, ExperimentConfig base) {
  return parse_experiment_config(read_file(path), std::move(base));
}

std::string experiment_config_to_json(const ExperimentConfig& config) { return config_json(config).dump(2); }

std::string sidecar_json(const ResultTable& table, const ExperimentConfig& resolved) {
  json j;
  j["config"] = config_json(resolved);
  json cols = json::array({"kind", "trial"});
  for (const auto& p : table.param_names) cols.push_back(p);
  cols.push_back("metric");
  cols.push_back("value");
  j["columns"] = cols;
  std::size_t summaries = 0;
  for (const auto& r : table.rows) summaries += r.summary ? 1 : 0;
  j["rows"] = {{"trial", table.rows.size() - summaries}, {"summary", summaries}};
  return j.dump(2);
}

}  // namespace fastabs
