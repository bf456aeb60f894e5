#include "fastabs/array_model.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace fastabs {

void ArraySpec::validate() const {
  if (num_elements < 1)
    throw std::invalid_argument("ArraySpec: num_elements must be >= 1");
  if (!(spacing > 0.0) || !std::isfinite(spacing))
    throw std::invalid_argument("ArraySpec: element spacing must be positive");
}

double SubcarrierGrid::spacing() const {
  if (frequencies.size() < 2) return 0.0;
  return (frequencies[frequencies.size() - 1] - frequencies[0]) / static_cast<double>(frequencies.size() - 1);
}

bool SubcarrierGrid::is_uniform_from_zero(double tol) const {
  const double df = spacing();
  if (frequencies.size() == 0) return false;
  if (frequencies.size() == 1) return frequencies[0] == 0.0;
  for (Eigen::Index k = 0; k < frequencies.size(); ++k) {
    const double expected = static_cast<double>(k) * df;
    if (std::abs(frequencies[k] - expected) > tol * std::max(1.0, std::abs(frequencies[frequencies.size() - 1])))
      return false;
  }
  return true;
}

void SubcarrierGrid::validate() const {
  if (frequencies.size() < 1)
    throw std::invalid_argument("SubcarrierGrid: at least one subcarrier required");
  for (Eigen::Index k = 0; k < frequencies.size(); ++k) {
    if (!std::isfinite(frequencies[k]))
      throw std::invalid_argument("SubcarrierGrid: non-finite frequency");
    if (k > 0 && !(frequencies[k] > frequencies[k - 1]))
      throw std::invalid_argument("SubcarrierGrid: frequencies must be strictly increasing");
  }
}

SubcarrierGrid SubcarrierGrid::uniform(int count, double spacing_hz, double start_hz) {
  if (count < 1) throw std::invalid_argument("SubcarrierGrid::uniform: count must be >= 1");
  if (!(spacing_hz > 0.0)) throw std::invalid_argument("SubcarrierGrid::uniform: spacing must be positive");
  SubcarrierGrid grid;
  grid.frequencies.resize(count);
  for (int k = 0; k < count; ++k) grid.frequencies[k] = start_hz + spacing_hz * k;
  return grid;
}

Codebook make_dft_codebook(const ArraySpec& array, std::span<const double> centers) {
  array.validate();
  if (centers.empty()) throw std::invalid_argument("make_dft_codebook: empty list of beam centers");
  const int n_el = array.num_elements;
  const double scale = 1.0 / std::sqrt(static_cast<double>(n_el));

  Codebook cb;
  cb.array = array;
  cb.weights.resize(n_el, static_cast<Eigen::Index>(centers.size()));
  for (std::size_t m = 0; m < centers.size(); ++m) {
    const double phi = centers[m];
    if (!(phi > 0.0 && phi < kPi))
      throw std::invalid_argument("make_dft_codebook: beam center outside (0, pi): " + std::to_string(phi));
    for (int n = 0; n < n_el; ++n) {
      const double phase = 2.0 * kPi * n * array.spacing * std::cos(phi);
      cb.weights(n, static_cast<Eigen::Index>(m)) = scale * std::polar(1.0, phase);
    }
  }
  cb.centers = std::vector<double>(centers.begin(), centers.end());
  return cb;
}

Codebook make_codebook(const ArraySpec& array, CMatrix weights) {
  array.validate();
  if (weights.rows() != array.num_elements)
    throw std::invalid_argument("make_codebook: weight rows must equal num_elements");
  if (weights.cols() < 1) throw std::invalid_argument("make_codebook: at least one beam required");
  Codebook cb;
  cb.array = array;
  cb.weights = std::move(weights);
  return cb;
}

Codebook rotate_frame(const Codebook& codebook, double rotation) {
  Codebook out = codebook;
  out.frame_rotation += rotation;
  if (out.centers)
    for (double& c : *out.centers) c += rotation;
  return out;
}

namespace {

void check_beam(const Codebook& cb, int beam) {
  if (beam < 0 || beam >= cb.num_beams())
    throw std::out_of_range("beam index " + std::to_string(beam) + " out of range [0, " +
                            std::to_string(cb.num_beams()) + ")");
}

// Per-element phase terms at angle theta (module frame applied):
// e_n = exp(-j k_n cos t), p_n = j k_n sin t, q_n = j k_n cos t, k_n = 2 pi n d.
struct ElementTerms {
  CVector e, first, second;
};

ElementTerms element_terms(const Codebook& cb, double theta, int order) {
  const double t = theta - cb.frame_rotation;
  const double c = std::cos(t), s = std::sin(t);
  const int n_el = cb.num_elements();
  ElementTerms out;
  out.e.resize(n_el);
  if (order >= 1) out.first.resize(n_el);
  if (order >= 2) out.second.resize(n_el);
  for (int n = 0; n < n_el; ++n) {
    const double k = 2.0 * kPi * n * cb.array.spacing;
    const Complex e = std::polar(1.0, -k * c);
    out.e[n] = e;
    if (order >= 1) {
      const Complex p(0.0, k * s);
      out.first[n] = e * p;
      if (order >= 2) out.second[n] = e * (p * p + Complex(0.0, k * c));
    }
  }
  return out;
}

}  // namespace

Complex beam_gain(const Codebook& codebook, int beam, double theta) {
  check_beam(codebook, beam);
  const auto terms = element_terms(codebook, theta, 0);
  return codebook.weights.col(beam).transpose() * terms.e;
}

Complex beam_gain_derivative(const Codebook& codebook, int beam, double theta) {
  check_beam(codebook, beam);
  const auto terms = element_terms(codebook, theta, 1);
  return codebook.weights.col(beam).transpose() * terms.first;
}

Complex beam_gain_second_derivative(const Codebook& codebook, int beam, double theta) {
  check_beam(codebook, beam);
  const auto terms = element_terms(codebook, theta, 2);
  return codebook.weights.col(beam).transpose() * terms.second;
}

CVector rx_beam_vector(const Codebook& codebook, double theta) {
  const auto terms = element_terms(codebook, theta, 0);
  return codebook.weights.transpose() * terms.e;
}

BeamResponse rx_beam_response(const Codebook& codebook, double theta) {
  const auto terms = element_terms(codebook, theta, 2);
  return {codebook.weights.transpose() * terms.e, codebook.weights.transpose() * terms.first,
          codebook.weights.transpose() * terms.second};
}

CVector delay_vector(const SubcarrierGrid& grid, double tau) {
  CVector d(grid.size());
  for (int k = 0; k < grid.size(); ++k) d[k] = std::polar(1.0, -2.0 * kPi * tau * grid.frequencies[k]);
  return d;
}

CVector steering_atom(const Codebook& codebook, const SubcarrierGrid& grid, double theta, double tau) {
  const CVector a = rx_beam_vector(codebook, theta);
  const CVector d = delay_vector(grid, tau);
  const Eigen::Index m_count = a.size();
  CVector v(m_count * d.size());
  for (Eigen::Index k = 0; k < d.size(); ++k) v.segment(k * m_count, m_count) = d[k] * a;
  return v;
}

std::vector<double> orthogonal_beam_centers(const ArraySpec& array, int count, double lo, double hi) {
  array.validate();
  if (count < 2) throw std::invalid_argument("orthogonal_beam_centers: need at least two beams");
  if (!(lo > 0.0 && hi < kPi && lo < hi))
    throw std::invalid_argument("orthogonal_beam_centers: span must lie within (0, pi)");
  if (count > array.num_elements)
    throw std::invalid_argument("orthogonal_beam_centers: more beams than elements; patterns would alias");

  const double u_lo = std::cos(hi);
  const double u_hi = std::cos(lo);
  const double step = 1.0 / (array.num_elements * array.spacing);
  const double width = step * (count - 1);
  if (width > (u_hi - u_lo) * (1.0 + 1e-12))
    throw std::invalid_argument("orthogonal_beam_centers: " + std::to_string(count) +
                                " orthogonal beams do not fit in the requested span");

  const double mid = 0.5 * (u_lo + u_hi);
  std::vector<double> centers;
  centers.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double u = std::clamp(mid + (i - 0.5 * (count - 1)) * step, -1.0, 1.0);
    centers.push_back(std::acos(u));
  }
  std::sort(centers.begin(), centers.end());
  return centers;
}

}  // namespace fastabs
