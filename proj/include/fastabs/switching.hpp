#pragma once

#include "fastabs/channel.hpp"
#include "fastabs/geometry.hpp"

#include <map>
#include <span>
#include <tuple>
#include <vector>

namespace fastabs {

enum class VirtualMode {
  Full,        // AoA, ToA and gain mapped
  Simplified,  // ToA kept from the measuring module
};

struct VirtualCsi {
  CMatrix entries;
  int module = 0;
  int tx_beam = 0;
  VirtualMode mode = VirtualMode::Simplified;
};

/// CSI of module q rebuilt from tuples estimated on module p. Paths whose
/// mapped AoA leaves (0, pi) contribute nothing.
VirtualCsi reconstruct_virtual_csi(std::span<const PathTuple> estimated, const ModuleLayout& layout, int p, int q,
                                   double rho, const Codebook& codebook, const SubcarrierGrid& grid,
                                   VirtualMode mode, int tx_beam = 0);

/// B_m = sum_k |H(m, k)|^2 for every row.
RVector beam_scores(const CMatrix& csi);

/// 10 log10(B / (N_s sigma^2)).
double rsnr_db(double score, int num_subcarriers, double noise_variance);

struct SwitchDecision {
  int tx_beam = 0;
  int beam = 0;
  int module = 0;
  double score = 0.0;

  friend bool operator==(const SwitchDecision&, const SwitchDecision&) = default;
};

/// Scores keyed by (module, beam, tx beam).
class ScoreTable {
 public:
  void set(int tx_beam, int beam, int module, double score);
  /// Stores B_m for m = 0..M-1 of one (tx beam, module).
  void set_module(int tx_beam, int module, const RVector& scores);
  void erase_module(int tx_beam, int module);
  bool contains(int tx_beam, int beam, int module) const;
  double at(int tx_beam, int beam, int module) const;
  bool empty() const { return scores_.empty(); }
  std::size_t size() const { return scores_.size(); }
  std::vector<SwitchDecision> entries() const;

 private:
  std::map<std::tuple<int, int, int>, double> scores_;
};

/// argmax B; ties go to the lowest module, then beam, then tx beam.
SwitchDecision select_best(const ScoreTable& table);

struct OracleResult {
  double angle = 0.0;  // rad
  double score = 0.0;
  double rsnr_db = 0.0;
};

/// Steers a fine single-beam codebook over `grid_size` angles on [lo, hi] and
/// returns the best angle. Ties keep the lowest angle.
OracleResult es_oracle(std::span<const PathTuple> paths, const ArraySpec& array, const SubcarrierGrid& grid,
                       double noise_variance, int grid_size = 481, double lo = deg2rad(30.0),
                       double hi = deg2rad(150.0));

/// Paths restricted to the observable half-plane.
std::vector<PathTuple> visible_paths(std::span<const PathTuple> paths);

}  // namespace fastabs
