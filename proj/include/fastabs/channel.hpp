#pragma once

#include "fastabs/array_model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fastabs {

/// One propagation path: complex amplitude, AoA (rad) and ToA (s).
struct PathTuple {
  Complex gain{0.0, 0.0};
  double aoa = kPi / 2;
  double toa = 0.0;
};

/// Multipath channel seen through one BS transmit beam.
struct TransmitBeamChannel {
  int tx_beam = 0;
  std::vector<PathTuple> paths;  // canonical order: descending |gain|

  void canonicalize();
  void validate() const;
};

/// M x N_s frequency-domain channel of one module under one transmit beam.
struct CsiMatrix {
  CMatrix entries;
  int module = 0;
  int tx_beam = 0;
};

struct NoiseSpec {
  double variance = 0.0;  // per complex sample
  std::uint64_t seed = 0;
};

enum class PathCase { I, II };

/// Sum of |g_l|^2.
double total_path_power(std::span<const PathTuple> paths);

/// sigma_z^2 giving `snr_db` for total path power `path_power`.
double noise_variance_for_snr(double path_power, double snr_db);

/// H(m, k) = sum_l g_l A_m(theta_l) exp(-j 2 pi tau_l f_k).
/// Throws if any AoA lies outside (0, pi).
CMatrix synthesize_entries(std::span<const PathTuple> paths, const Codebook& codebook, const SubcarrierGrid& grid);

CsiMatrix synthesize_csi(const TransmitBeamChannel& channel, const Codebook& codebook, const SubcarrierGrid& grid,
                         int module = 0);

/// Column-major vec(H), matching steering_atom()'s ordering.
CVector vectorize(const CMatrix& csi);
CMatrix unvectorize(const CVector& y, int num_beams, int num_subcarriers);

/// y = vec(H) + z, z ~ CN(0, variance I), reproducible from `noise.seed`.
CVector measure(const CsiMatrix& csi, const NoiseSpec& noise);

/// Adds circularly-symmetric complex Gaussian noise to `y` in place.
void add_noise(CVector& y, double variance, Rng& rng);

/// Line-of-sight path plus one reflection 10 dB (case I) or 20 dB (case II)
/// weaker. AoAs uniform on [aoa_lo, aoa_hi], phases uniform, path lengths
/// uniform on [0, max_distance_m] with the LoS the shorter one.
TransmitBeamChannel make_two_path_scenario(PathCase which, std::uint64_t seed, double aoa_lo = deg2rad(30.0),
                                           double aoa_hi = deg2rad(150.0), double max_distance_m = 60.0);

/// Unit-amplitude single path with the same AoA/phase/distance draws.
TransmitBeamChannel make_single_path_scenario(std::uint64_t seed, double aoa_lo = deg2rad(30.0),
                                              double aoa_hi = deg2rad(150.0), double max_distance_m = 60.0);

/// Flat hand-blockage loss: every gain scaled by 10^(-attenuation_db / 20).
TransmitBeamChannel apply_hand_blockage(const TransmitBeamChannel& channel, double attenuation_db);

}  // namespace fastabs
