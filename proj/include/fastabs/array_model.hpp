#pragma once

#include "fastabs/common.hpp"

#include <optional>
#include <span>
#include <vector>

namespace fastabs {

/// Uniform linear array: element count and spacing in wavelengths.
struct ArraySpec {
  int num_elements = 4;
  double spacing = 0.5;  // d / lambda

  void validate() const;
};

/// Analog receive codebook of one antenna module.
///
/// `weights` is N x M; column m holds the phase-shifter weights w_m(n) of
/// beam m. `centers` is set when the codebook was steered from beam-center
/// angles. `frame_rotation` rigidly rotates the whole module: the pattern is
/// evaluated at (theta - frame_rotation), so a rotated copy of a codebook
/// sees a rotated AoA exactly as the original sees the unrotated one.
struct Codebook {
  ArraySpec array;
  CMatrix weights;
  std::optional<std::vector<double>> centers;
  double frame_rotation = 0.0;

  int num_beams() const { return static_cast<int>(weights.cols()); }
  int num_elements() const { return static_cast<int>(weights.rows()); }
};

/// OFDM subcarrier frequencies (Hz), strictly increasing.
struct SubcarrierGrid {
  RVector frequencies;

  int size() const { return static_cast<int>(frequencies.size()); }
  /// Mean subcarrier spacing (Hz); 0 for a single subcarrier.
  double spacing() const;
  /// True when f_k = k * spacing() for k = 0..N_s-1 within `tol` relative.
  bool is_uniform_from_zero(double tol = 1e-12) const;

  void validate() const;

  /// `count` consecutive subcarriers at `spacing_hz`, starting at `start_hz`.
  static SubcarrierGrid uniform(int count, double spacing_hz = 60e3, double start_hz = 0.0);
};

/// Steered codebook: w_m(n) = exp(j 2 pi n (d/lambda) cos(phi_m)) / sqrt(N).
/// At d/lambda = 0.5 the phase reduces to pi n cos(phi_m).
Codebook make_dft_codebook(const ArraySpec& array, std::span<const double> centers);

/// Codebook from arbitrary weights (N x M).
Codebook make_codebook(const ArraySpec& array, CMatrix weights);

/// Copy of `codebook` with the module frame rotated by `rotation` radians;
/// beam centers (if present) move by the same amount.
Codebook rotate_frame(const Codebook& codebook, double rotation);

/// A_m(theta) = sum_n w_m(n) exp(-j 2 pi n (d/lambda) cos theta).
Complex beam_gain(const Codebook& codebook, int beam, double theta);

/// dA_m / dtheta.
Complex beam_gain_derivative(const Codebook& codebook, int beam, double theta);

/// d^2 A_m / dtheta^2.
Complex beam_gain_second_derivative(const Codebook& codebook, int beam, double theta);

/// a(theta) = [A_1(theta) ... A_M(theta)]^T.
CVector rx_beam_vector(const Codebook& codebook, double theta);

/// a(theta) together with its first two theta-derivatives, evaluated in one pass.
struct BeamResponse {
  CVector value;
  CVector first;
  CVector second;
};
BeamResponse rx_beam_response(const Codebook& codebook, double theta);

/// Column k holds exp(-j 2 pi tau f_k); H = sum_l g_l a(theta_l) delay_vector(tau_l)^T.
CVector delay_vector(const SubcarrierGrid& grid, double tau);

/// Vectorized single-path CSI, v(theta, tau) = delay_vector(tau) (x) a(theta).
/// Entry k*M + m is A_m(theta) exp(-j 2 pi tau f_k), i.e. column-major vec(H).
CVector steering_atom(const Codebook& codebook, const SubcarrierGrid& grid, double theta, double tau);

/// Beam centers in [lo, hi] whose peaks sit on each other's nulls.
///
/// Consecutive centers are spaced by 1/(N d/lambda) in cos(theta), which is the
/// null spacing of a steered ULA beam, and the set is centred in cosine space
/// on the middle of the span. Throws when `count` beams at that spacing do not
/// fit inside the span.
std::vector<double> orthogonal_beam_centers(const ArraySpec& array, int count, double lo, double hi);

}  // namespace fastabs
