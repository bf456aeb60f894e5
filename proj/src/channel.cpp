#include "fastabs/channel.hpp"

#include <algorithm>
#include <stdexcept>

namespace fastabs {

void TransmitBeamChannel::canonicalize() {
  std::stable_sort(paths.begin(), paths.end(),
                   [](const PathTuple& a, const PathTuple& b) { return std::abs(a.gain) > std::abs(b.gain); });
}

void TransmitBeamChannel::validate() const {
  if (paths.empty()) throw std::invalid_argument("TransmitBeamChannel: at least one path required");
  for (const auto& p : paths) {
    if (!(p.aoa > 0.0 && p.aoa < kPi)) throw std::invalid_argument("TransmitBeamChannel: AoA outside (0, pi)");
    if (!(p.toa >= 0.0) || !std::isfinite(p.toa)) throw std::invalid_argument("TransmitBeamChannel: negative ToA");
    if (!std::isfinite(p.gain.real()) || !std::isfinite(p.gain.imag()))
      throw std::invalid_argument("TransmitBeamChannel: non-finite gain");
  }
}

double total_path_power(std::span<const PathTuple> paths) {
  double p = 0.0;
  for (const auto& path : paths) p += std::norm(path.gain);
  return p;
}

double noise_variance_for_snr(double path_power, double snr_db) { return path_power / db_to_power(snr_db); }

CMatrix synthesize_entries(std::span<const PathTuple> paths, const Codebook& codebook, const SubcarrierGrid& grid) {
  CMatrix h = CMatrix::Zero(codebook.num_beams(), grid.size());
  for (const auto& p : paths) {
    if (!(p.aoa > 0.0 && p.aoa < kPi))
      throw std::invalid_argument("synthesize_csi: path AoA outside (0, pi)");
    h.noalias() += (p.gain * rx_beam_vector(codebook, p.aoa)) * delay_vector(grid, p.toa).transpose();
  }
  return h;
}

CsiMatrix synthesize_csi(const TransmitBeamChannel& channel, const Codebook& codebook, const SubcarrierGrid& grid,
                         int module) {
  return {synthesize_entries(channel.paths, codebook, grid), module, channel.tx_beam};
}

CVector vectorize(const CMatrix& csi) { return Eigen::Map<const CVector>(csi.data(), csi.size()); }

CMatrix unvectorize(const CVector& y, int num_beams, int num_subcarriers) {
  if (y.size() != static_cast<Eigen::Index>(num_beams) * num_subcarriers)
    throw std::invalid_argument("unvectorize: length does not match M x N_s");
  return Eigen::Map<const CMatrix>(y.data(), num_beams, num_subcarriers);
}

void add_noise(CVector& y, double variance, Rng& rng) {
  if (variance < 0.0) throw std::invalid_argument("noise variance must be non-negative");
  if (variance == 0.0) return;
  const double sd = std::sqrt(variance / 2.0);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double re = standard_normal(rng);
    const double im = standard_normal(rng);
    y[i] += Complex(sd * re, sd * im);
  }
}

CVector measure(const CsiMatrix& csi, const NoiseSpec& noise) {
  CVector y = vectorize(csi.entries);
  Rng rng(noise.seed);
  add_noise(y, noise.variance, rng);
  return y;
}

namespace {

PathTuple draw_path(Rng& rng, double amplitude, double aoa_lo, double aoa_hi) {
  PathTuple p;
  p.aoa = uniform(rng, aoa_lo, aoa_hi);
  p.gain = std::polar(amplitude, uniform(rng, 0.0, 2.0 * kPi));
  return p;
}

}  // namespace

TransmitBeamChannel make_two_path_scenario(PathCase which, std::uint64_t seed, double aoa_lo, double aoa_hi,
                                           double max_distance_m) {
  Rng rng(seed);
  const double ratio_db = which == PathCase::I ? 10.0 : 20.0;
  PathTuple los = draw_path(rng, 1.0, aoa_lo, aoa_hi);
  PathTuple nlos = draw_path(rng, db_to_amplitude(-ratio_db), aoa_lo, aoa_hi);
  double d1 = uniform(rng, 0.0, max_distance_m);
  double d2 = uniform(rng, 0.0, max_distance_m);
  if (d1 > d2) std::swap(d1, d2);
  los.toa = d1 / kSpeedOfLight;
  nlos.toa = d2 / kSpeedOfLight;
  TransmitBeamChannel ch;
  ch.paths = {los, nlos};
  ch.canonicalize();
  return ch;
}

TransmitBeamChannel make_single_path_scenario(std::uint64_t seed, double aoa_lo, double aoa_hi, double max_distance_m) {
  Rng rng(seed);
  PathTuple p = draw_path(rng, 1.0, aoa_lo, aoa_hi);
  p.toa = uniform(rng, 0.0, max_distance_m) / kSpeedOfLight;
  TransmitBeamChannel ch;
  ch.paths = {p};
  return ch;
}

TransmitBeamChannel apply_hand_blockage(const TransmitBeamChannel& channel, double attenuation_db) {
  if (!(attenuation_db >= 0.0)) throw std::invalid_argument("apply_hand_blockage: attenuation must be >= 0 dB");
  TransmitBeamChannel out = channel;
  const double scale = db_to_amplitude(-attenuation_db);
  for (auto& p : out.paths) p.gain *= scale;
  return out;
}

}  // namespace fastabs
