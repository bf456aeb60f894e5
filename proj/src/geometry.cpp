#include "fastabs/geometry.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace fastabs {

ModuleLayout::ModuleLayout(std::vector<ModulePlacement> modules) : modules_(std::move(modules)) {
  if (modules_.empty()) throw std::invalid_argument("ModuleLayout: at least one module required");
  for (const auto& m : modules_)
    if (!std::isfinite(m.x) || !std::isfinite(m.y) || !std::isfinite(m.rotation_offset))
      throw std::invalid_argument("ModuleLayout: non-finite placement");
}

const ModulePlacement& ModuleLayout::module(int p) const {
  if (p < 0 || p >= size())
    throw std::out_of_range("module index " + std::to_string(p) + " out of range [0, " + std::to_string(size()) + ")");
  return modules_[static_cast<std::size_t>(p)];
}

double ModuleLayout::rotation(int p, int q) const { return module(q).rotation_offset - module(p).rotation_offset; }

ModuleLayout two_module_handset_layout() {
  return ModuleLayout({{0.06, 0.07, 0.0}, {0.0, 0.02, deg2rad(-90.0)}});
}

bool in_observable_range(double theta) { return is_valid_aoa(theta); }

double projected_delay(const ModuleLayout& layout, int p, int q, double theta_q) {
  const auto& mp = layout.module(p);
  const auto& mq = layout.module(q);
  // Arrival direction in the reference frame of module 0.
  const double global = theta_q - mq.rotation_offset;
  return (std::cos(global) * (mp.x - mq.x) + std::sin(global) * (mp.y - mq.y)) / kSpeedOfLight;
}

double delay_offset(const ModuleLayout& layout, int p, int q, double theta_q) {
  if (!in_observable_range(theta_q)) throw std::invalid_argument("delay_offset: AoA outside (0, pi)");
  return projected_delay(layout, p, q, theta_q);
}

std::vector<PathTuple> map_tuples(std::span<const PathTuple> paths, const ModuleLayout& layout, int p, int q,
                                  double rho) {
  if (!(rho >= 0.0)) throw std::invalid_argument("map_tuples: rho must be non-negative");
  const double rot = layout.rotation(p, q);
  std::vector<PathTuple> out;
  out.reserve(paths.size());
  for (const auto& path : paths) {
    PathTuple m;
    m.aoa = path.aoa + rot;
    m.toa = path.toa + projected_delay(layout, p, q, m.aoa);
    m.gain = rho * path.gain;
    out.push_back(m);
  }
  return out;
}

void PowerReport::validate() const {
  for (double p : power)
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("PowerReport: powers must be finite and >= 0");
}

double power_ratio(const PowerReport& report, int p, int q) {
  report.validate();
  const auto n = static_cast<int>(report.power.size());
  if (p < 0 || p >= n || q < 0 || q >= n) throw std::out_of_range("power_ratio: module index out of range");
  const double ref = report.power[static_cast<std::size_t>(p)];
  if (!(ref > 0.0)) throw std::invalid_argument("power_ratio: reference module power must be positive");
  return std::sqrt(report.power[static_cast<std::size_t>(q)] / ref);
}

double pseudo_omni_power(std::span<const PathTuple> paths, double detector_variance, Rng* rng) {
  double total = 0.0;
  for (const auto& p : paths)
    if (in_observable_range(p.aoa)) total += std::norm(p.gain);
  if (detector_variance > 0.0) {
    if (rng == nullptr) throw std::invalid_argument("pseudo_omni_power: detector noise needs an RNG");
    total = std::max(0.0, total + std::sqrt(detector_variance) * standard_normal(*rng));
  }
  return total;
}

}  // namespace fastabs
