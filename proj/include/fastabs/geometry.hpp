#pragma once

#include "fastabs/channel.hpp"

#include <span>
#include <vector>

namespace fastabs {

/// Module centre (m) and the rotation of its local AoA frame relative to module 0.
struct ModulePlacement {
  double x = 0.0;
  double y = 0.0;
  double rotation_offset = 0.0;  // rad
};

/// Fixed handset geometry. Local AoAs relate as theta_q = theta_p + rotation(p, q).
class ModuleLayout {
 public:
  ModuleLayout() = default;
  explicit ModuleLayout(std::vector<ModulePlacement> modules);

  int size() const { return static_cast<int>(modules_.size()); }
  const ModulePlacement& module(int p) const;
  const std::vector<ModulePlacement>& modules() const { return modules_; }

  /// Delta-theta^[p,q] = offset_q - offset_p.
  double rotation(int p, int q) const;

 private:
  std::vector<ModulePlacement> modules_;
};

/// Two modules on a handset: module 0 on a long edge, module 1 on the short
/// top edge, rotated -90 degrees (a path at 130 deg on module 0 arrives at
/// 40 deg on module 1). Offsets between the two centres are 6 cm x 5 cm.
ModuleLayout two_module_handset_layout();

/// True when theta lies in (0, pi), the half-plane a module can observe.
bool in_observable_range(double theta);

/// Signed plane-wave delay of module q relative to module p for a path
/// arriving at local AoA `theta_q` on module q:
///   (u(theta) . (r_p - r_q)) / c,
/// with u the unit vector towards the source. Throws when theta_q is outside
/// (0, pi) or an index is invalid.
double delay_offset(const ModuleLayout& layout, int p, int q, double theta_q);

/// Same projection without the observable-range precondition.
double projected_delay(const ModuleLayout& layout, int p, int q, double theta_q);

/// Maps path tuples measured on module p to module q:
/// theta' = theta + rotation(p, q), tau' = tau + projected_delay(p, q, theta'),
/// g' = rho * g. Angles are never wrapped; callers use in_observable_range().
std::vector<PathTuple> map_tuples(std::span<const PathTuple> paths, const ModuleLayout& layout, int p, int q,
                                  double rho);

/// Detected pseudo-omni power per module (linear).
struct PowerReport {
  std::vector<double> power;

  void validate() const;
};

/// Amplitude ratio rho^[p,q] = sqrt(power_q / power_p).
double power_ratio(const PowerReport& report, int p, int q);

/// Pseudo-omni power of a channel: sum of |g|^2 over paths visible to the
/// module. `detector_variance` > 0 adds Gaussian detector noise (clamped at 0).
double pseudo_omni_power(std::span<const PathTuple> paths, double detector_variance = 0.0, Rng* rng = nullptr);

}  // namespace fastabs
