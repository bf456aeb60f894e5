#include "fastabs/harness.hpp"
#include "fastabs/serialization.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace {

struct Options {
  std::string config_file;
  std::string scenario_file;
  std::string layout;
  std::string out = "results";
  std::vector<double> snr;
  std::vector<int> ns;
  std::string codebook;
  int trials = -1;
  long long seed = -1;
  int threads = -1;
  bool check = false;
};

fastabs::ExperimentConfig build_config(const std::string& id, const Options& o) {
  fastabs::ExperimentConfig c;
  if (!o.config_file.empty()) c = fastabs::load_experiment_config(o.config_file, c);
  c.experiment = id;
  if (o.trials >= 0) c.trials = o.trials;
  if (o.seed >= 0) c.base_seed = static_cast<std::uint64_t>(o.seed);
  if (!o.snr.empty()) c.snr_db = o.snr;
  if (!o.ns.empty()) c.num_subcarriers = o.ns;
  if (!o.codebook.empty()) c.codebook = o.codebook;
  if (o.threads >= 0) c.threads = o.threads;
  if (!o.layout.empty()) {
    if (std::filesystem::exists(o.layout)) {
      c.layout_override = fastabs::load_layout(o.layout);
    } else {
      c.layout = o.layout;
      c.layout_override.reset();
    }
  }
  if (!o.scenario_file.empty()) c.scenario = fastabs::load_scenario(o.scenario_file);
  return c;
}

int run(const std::string& id, const Options& o) {
  const auto config = build_config(id, o);
  const auto table = fastabs::run_experiment(config);
  const auto parent = std::filesystem::path(o.out);
  std::filesystem::create_directories(parent);
  const std::string prefix = (parent / id).string();
  fastabs::write_outputs(table, config, prefix);
  std::cout << "wrote " << prefix << ".csv (" << table.rows.size() << " rows)\n";
  for (const auto& r : table.rows)
    if (r.summary && r.params.size() == table.param_names.size()) {
      std::cout << "  " << r.metric;
      for (std::size_t i = 0; i < r.params.size(); ++i)
        if (!r.params[i].empty()) std::cout << " " << table.param_names[i] << "=" << r.params[i];
      std::cout << " : " << r.value << "\n";
    }
  if (!o.check) return 0;
  bool ok = true;
  for (const auto& c : fastabs::check_experiment(table)) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.detail << ")\n";
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beam switching experiments for multi-module handsets"};
  app.require_subcommand(1);
  Options o;
  int status = 0;
  for (const auto& id : fastabs::experiment_ids()) {
    auto* sub = app.add_subcommand(id, "run the " + id + " campaign");
    sub->add_option("--config", o.config_file, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--trials", o.trials, "Monte Carlo trials");
    sub->add_option("--seed", o.seed, "base seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--snr", o.snr, "SNR values in dB");
    sub->add_option("--ns", o.ns, "subcarrier counts");
    sub->add_option("--codebook", o.codebook, "codebook preset");
    sub->add_option("--layout", o.layout, "layout preset or JSON file");
    sub->add_option("--scenario", o.scenario_file, "scenario JSON file")->check(CLI::ExistingFile);
    sub->add_option("--threads", o.threads, "worker threads (0: all cores)");
    sub->add_flag("--check", o.check, "exit nonzero if a result check fails");
    sub->callback([&, id] { status = run(id, o); });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return status;
}
