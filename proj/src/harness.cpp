#include "fastabs/harness.hpp"
#include "fastabs/serialization.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace fastabs {

namespace {

std::vector<double> degrees(std::initializer_list<double> values) {
  std::vector<double> out;
  for (double v : values) out.push_back(deg2rad(v));
  return out;
}

}  // namespace

Codebook codebook_preset(const std::string& name, const ArraySpec& array) {
  if (name == "2beam") return make_dft_codebook(array, degrees({60, 120}));
  if (name == "3beam") return make_dft_codebook(array, degrees({60, 90, 120}));
  if (name == "4beam") return make_dft_codebook(array, degrees({45, 75, 105, 135}));
  if (name == "9grid") {
    std::vector<double> c;
    for (int i = 0; i < 9; ++i) c.push_back(deg2rad(30.0 + 15.0 * i));
    return make_dft_codebook(array, c);
  }
  if (name == "es481") {
    const RVector c = RVector::LinSpaced(481, deg2rad(30.0), deg2rad(150.0));
    return make_dft_codebook(array, {c.data(), static_cast<std::size_t>(c.size())});
  }
  throw std::invalid_argument("unknown codebook preset '" + name + "'");
}

std::vector<std::string> codebook_preset_names() { return {"2beam", "3beam", "4beam", "9grid", "es481"}; }

ModuleLayout layout_preset(const std::string& name) {
  if (name == "handset2") return two_module_handset_layout();
  throw std::invalid_argument("unknown layout preset '" + name + "'");
}

void Scenario::validate(int num_modules) const {
  if (channels.empty()) throw std::invalid_argument("Scenario: at least one transmit-beam channel required");
  for (std::size_t s = 0; s < channels.size(); ++s) {
    channels[s].validate();
    if (channels[s].tx_beam != static_cast<int>(s))
      throw std::invalid_argument("Scenario: channels must be listed by tx beam 0..S-1");
  }
  if (!(noise_variance > 0.0)) throw std::invalid_argument("Scenario: noise variance must be positive");
  if (num_subcarriers < 2) throw std::invalid_argument("Scenario: need at least two subcarriers");
  if (initial.tx_beam < 0 || initial.tx_beam >= static_cast<int>(channels.size()) || initial.module < 0 ||
      initial.module >= num_modules || initial.beam < 0)
    throw std::invalid_argument("Scenario: initial selection out of range");
  for (const auto& st : stages) {
    if (static_cast<int>(st.attenuation_db.size()) != num_modules)
      throw std::invalid_argument("Scenario: stage '" + st.label + "' needs one attenuation per module");
    for (double a : st.attenuation_db)
      if (!(a >= 0.0)) throw std::invalid_argument("Scenario: attenuation must be >= 0 dB");
    for (const auto& e : st.events)
      if (e != "power_report" && e != "bs_sweep" && e != "blockage_change")
        throw std::invalid_argument("Scenario: unknown event '" + e + "'");
  }
}

Scenario default_five_stage_scenario() {
  Scenario sc;
  // Paths are given at module 0. Tx beam 1 is 6 dB stronger than tx beam 0.
  TransmitBeamChannel s0;
  s0.tx_beam = 0;
  s0.paths = {{std::polar(1.0, 0.3), deg2rad(130.0), 12.0 / kSpeedOfLight},
              {std::polar(0.3, 1.9), deg2rad(70.0), 31.0 / kSpeedOfLight}};
  TransmitBeamChannel s1;
  s1.tx_beam = 1;
  s1.paths = {{std::polar(2.0, -0.7), deg2rad(125.0), 11.0 / kSpeedOfLight},
              {std::polar(0.5, 2.4), deg2rad(80.0), 25.0 / kSpeedOfLight}};
  sc.channels = {s0, s1};
  sc.initial = {0, 7, 0, 0.0};
  sc.stages = {
      {"I", {0.0, 0.0}, {}},
      {"II", {10.0, 0.0}, {"power_report"}},
      {"III", {10.0, 0.0}, {"bs_sweep"}},
      {"IV", {10.0, 20.0}, {"blockage_change"}},
      {"V", {10.0, 0.0}, {"blockage_change"}},
  };
  return sc;
}

std::vector<std::string> experiment_ids() {
  return {"fig4", "fig5", "fig6", "fig6a", "fig6b", "fig6c", "fig7", "fig8", "fig10", "custom"};
}

void ExperimentConfig::validate() const {
  const auto ids = experiment_ids();
  if (std::find(ids.begin(), ids.end(), experiment) == ids.end())
    throw std::invalid_argument("unknown experiment id '" + experiment + "'");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  for (int n : num_subcarriers)
    if (n < 2) throw std::invalid_argument("N_s must be >= 2");
  if (!codebook.empty()) codebook_preset(codebook);
  if (!layout_override) layout_preset(layout);
  if (threads < 0) throw std::invalid_argument("threads must be >= 0");
  estimator.validate();
  if (experiment == "custom" && !scenario) throw std::invalid_argument("custom experiment needs a scenario file");
}

std::string ResultTable::header() const {
  std::string h = "kind,trial";
  for (const auto& p : param_names) h += "," + p;
  return h + ",metric,value";
}

void ResultTable::write_csv(std::ostream& out) const {
  out << header() << '\n';
  char num[40];
  for (const auto& r : rows) {
    out << (r.summary ? "summary" : "trial") << ',' << r.trial;
    for (const auto& p : r.params) out << ',' << p;
    std::snprintf(num, sizeof num, "%.17g", r.value);
    out << ',' << r.metric << ',' << num << '\n';
  }
}

std::string ResultTable::to_csv() const {
  std::ostringstream s;
  write_csv(s);
  return s.str();
}

namespace {

bool matches(const ResultTable& t, const ResultRow& r, const std::vector<std::pair<std::string, std::string>>& f) {
  for (const auto& [name, value] : f) {
    const auto it = std::find(t.param_names.begin(), t.param_names.end(), name);
    if (it == t.param_names.end()) return false;
    if (r.params[static_cast<std::size_t>(it - t.param_names.begin())] != value) return false;
  }
  return true;
}

}  // namespace

std::optional<double> ResultTable::summary(const std::string& metric,
                                           const std::vector<std::pair<std::string, std::string>>& filters) const {
  for (const auto& r : rows)
    if (r.summary && r.metric == metric && matches(*this, r, filters)) return r.value;
  return std::nullopt;
}

std::vector<double> ResultTable::values(const std::string& metric,
                                        const std::vector<std::pair<std::string, std::string>>& filters) const {
  std::vector<double> out;
  for (const auto& r : rows)
    if (!r.summary && r.metric == metric && matches(*this, r, filters)) out.push_back(r.value);
  return out;
}

std::vector<std::pair<double, double>> compute_cdf(std::vector<double> values, const std::vector<double>& grid) {
  if (values.empty()) throw std::invalid_argument("compute_cdf: empty input");
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> out;
  out.reserve(grid.size());
  const double n = static_cast<double>(values.size());
  for (double x : grid) {
    const auto count = std::upper_bound(values.begin(), values.end(), x) - values.begin();
    out.emplace_back(x, static_cast<double>(count) / n);
  }
  return out;
}

double compare_to_crlb(double mc_mse, double crlb) {
  if (!(mc_mse > 0.0) || !(crlb > 0.0)) throw std::invalid_argument("compare_to_crlb: inputs must be positive");
  return 10.0 * std::log10(mc_mse / crlb);
}

void write_outputs(const ResultTable& table, const ExperimentConfig& config, const std::string& prefix) {
  std::ofstream csv(prefix + ".csv");
  if (!csv) throw std::runtime_error("cannot write " + prefix + ".csv");
  table.write_csv(csv);
  std::ofstream side(prefix + ".json");
  if (!side) throw std::runtime_error("cannot write " + prefix + ".json");
  side << sidecar_json(table, resolve_config(config)) << '\n';
  if (!csv || !side) throw std::runtime_error("failed writing outputs at " + prefix);
}

void parallel_for(int count, int threads, const std::function<void(int)>& fn) {
  if (count <= 0) return;
  int workers = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = std::min(workers, count);
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count && !failed; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---- checks -------------------------------------------------------------------

namespace {

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
  char buf[200];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

CheckResult missing(const std::string& name) { return {name, false, "required summary rows missing"}; }

std::vector<CheckResult> check_fig4(const ResultTable& t) {
  const auto orth = t.summary("mean_error_65_115", {{"codebook", "60/90/120"}});
  const auto wide = t.summary("mean_error_65_115", {{"codebook", "50/90/130"}});
  const auto pert = t.summary("mean_error_65_115", {{"codebook", "58/90/122"}});
  const auto rnd = t.summary("mean_error_65_115", {{"codebook", "random"}});
  if (!orth || !wide || !pert || !rnd) return {missing("fig4 ordering")};
  return {
      {"fig4 orthogonal < wide < random", *orth < *wide && *wide < *rnd,
       fmt("mean Error: orthogonal %.5g, wide %.5g, random %.5g", *orth, *wide, *rnd)},
      {"fig4 perturbed within 10%", std::abs(*pert - *orth) <= 0.1 * *orth,
       fmt("perturbed %.5g vs orthogonal %.5g (%.2f%%)", *pert, *orth, 100.0 * (*pert - *orth) / *orth)},
  };
}

std::vector<CheckResult> check_fig5(const ResultTable& t) {
  std::vector<CheckResult> out;
  bool ordered = true, found = false;
  std::string detail;
  for (const auto& r : t.rows) {
    if (!r.summary || r.metric != "median_crlb_theta_rad2" || r.params[0] != "4beam") continue;
    const auto three = t.summary("median_crlb_theta_rad2", {{"codebook", "3beam"}, {"ns", r.params[1]},
                                                           {"snr_db", r.params[2]}});
    const auto two = t.summary("median_crlb_theta_rad2", {{"codebook", "2beam"}, {"ns", r.params[1]},
                                                         {"snr_db", r.params[2]}});
    if (!three || !two) continue;
    found = true;
    if (!(r.value < *three && *three < *two)) {
      ordered = false;
      detail = "N_s " + r.params[1] + ", SNR " + r.params[2] + " out of order";
    }
  }
  if (!found) return {missing("fig5 ordering")};
  out.push_back({"fig5 CRLB 4beam < 3beam < 2beam", ordered, ordered ? "all cells ordered" : detail});
  return out;
}

std::vector<CheckResult> check_fig6(const ResultTable& t) {
  std::vector<CheckResult> out;
  const auto nomp_dom = t.summary("rmse_dom_deg", {{"case", "I"}, {"codebook", "4beam"}, {"estimator", "NOMP"}});
  const auto nomp_sec = t.summary("rmse_second_deg", {{"case", "I"}, {"codebook", "4beam"}, {"estimator", "NOMP"}});
  const auto omp_sec = t.summary("rmse_second_deg", {{"case", "I"}, {"codebook", "4beam"}, {"estimator", "OMP"}});
  if (nomp_dom && nomp_sec && omp_sec) {
    out.push_back({"fig6a NOMP dominant RMSE < 0.25 deg", *nomp_dom < 0.25,
                   fmt("NOMP dominant-path RMSE %.4f deg", *nomp_dom)});
    out.push_back({"fig6b OMP second-path RMSE > 5x NOMP", *omp_sec > 5.0 * *nomp_sec,
                   fmt("OMP %.4f deg vs NOMP %.4f deg (ratio %.2f)", *omp_sec, *nomp_sec, *omp_sec / *nomp_sec)});
  }
  const auto gap = t.summary("crlb_gap_db", {{"case", "single"}, {"codebook", "4beam"}, {"estimator", "NOMP"}});
  const auto m4 = t.summary("mse_rad2", {{"case", "single"}, {"codebook", "4beam"}, {"estimator", "NOMP"}});
  const auto m3 = t.summary("mse_rad2", {{"case", "single"}, {"codebook", "3beam"}, {"estimator", "NOMP"}});
  const auto m2 = t.summary("mse_rad2", {{"case", "single"}, {"codebook", "2beam"}, {"estimator", "NOMP"}});
  if (gap) out.push_back({"fig6c NOMP MSE within 3 dB of CRLB", std::abs(*gap) <= 3.0, fmt("gap %.3f dB", *gap)});
  if (m4 && m3 && m2)
    out.push_back({"fig6c MSE 4beam < 3beam < 2beam", *m4 < *m3 && *m3 < *m2,
                   fmt("MSE %.4g < %.4g < %.4g rad^2", *m4, *m3, *m2)});
  if (out.empty()) return {missing("fig6")};
  return out;
}

std::vector<CheckResult> check_fig7(const ResultTable& t) {
  const auto frac = t.summary("frac_loss_gt_3db", {{"codebook", "2beam"}});
  const auto inside = t.summary("frac_loss_gt_3db_inside_85_95", {{"codebook", "2beam"}});
  const auto outside = t.summary("frac_loss_gt_3db_outside_85_95", {{"codebook", "2beam"}});
  if (!frac || !inside || !outside) return {missing("fig7 two-beam failure rate")};
  return {
      {"fig7 2beam loss > 3 dB in [5%, 12%]", *frac >= 0.05 && *frac <= 0.12,
       fmt("%.2f%% of trials", 100.0 * *frac)},
      {"fig7 failures concentrated in (85, 95) deg", *inside >= 5.0 * *outside,
       fmt("failure rate inside %.3f vs outside %.4f", *inside, *outside)},
  };
}

std::vector<CheckResult> check_fig8(const ResultTable& t) {
  std::vector<CheckResult> out;
  const auto agree = t.summary("agreement_rate", {{"codebook", "4beam"}});
  if (agree)
    out.push_back({"fig8 4beam virtual selection agrees >= 99%", *agree >= 0.99, fmt("%.2f%%", 100.0 * *agree)});
  for (const char* cb : {"3beam", "4beam"}) {
    const auto med = t.summary("median_loss_db", {{"codebook", cb}});
    if (med)
      out.push_back({std::string("fig8 ") + cb + " median loss < 0.5 dB", *med < 0.5, fmt("%.4f dB", *med)});
  }
  if (out.empty()) return {missing("fig8")};
  return out;
}

std::vector<CheckResult> check_fig10(const ResultTable& t) {
  std::vector<CheckResult> out;
  const auto seq = t.summary("sequence_ok", {{"policy", "FastAbs"}});
  if (seq) out.push_back({"fig10 selection sequence", *seq == 1.0, *seq == 1.0 ? "matches" : "differs"});
  const auto led = t.summary("ledger_ok", {{"policy", "FastAbs"}});
  const auto les = t.summary("ledger_ok", {{"policy", "ExhaustiveSearch"}});
  if (led && les)
    out.push_back({"fig10 slot ledgers", *led == 1.0 && *les == 1.0,
                   fmt("Fast-ABS %.0f, ES %.0f (1 = formula holds)", *led, *les)});
  if (out.empty()) return {missing("fig10")};
  return out;
}

}  // namespace

std::vector<CheckResult> check_experiment(const ResultTable& table) {
  const auto& id = table.experiment;
  if (id == "fig4") return check_fig4(table);
  if (id == "fig5") return check_fig5(table);
  if (id.rfind("fig6", 0) == 0) return check_fig6(table);
  if (id == "fig7") return check_fig7(table);
  if (id == "fig8") return check_fig8(table);
  if (id == "fig10") return check_fig10(table);
  return {};
}

}  // namespace fastabs
