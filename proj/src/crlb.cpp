#include "fastabs/crlb.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <sstream>

namespace fastabs {

RVector to_params(std::span<const PathTuple> paths) {
  RVector psi(4 * static_cast<Eigen::Index>(paths.size()));
  for (std::size_t l = 0; l < paths.size(); ++l) {
    double phase = std::arg(paths[l].gain);
    if (phase < 0.0) phase += 2.0 * kPi;
    const auto o = 4 * static_cast<Eigen::Index>(l);
    psi[o] = std::abs(paths[l].gain);
    psi[o + 1] = phase;
    psi[o + 2] = paths[l].aoa;
    psi[o + 3] = paths[l].toa;
  }
  return psi;
}

std::vector<PathTuple> from_params(const RVector& psi) {
  if (psi.size() % 4 != 0) throw std::invalid_argument("from_params: length must be a multiple of 4");
  std::vector<PathTuple> paths(static_cast<std::size_t>(psi.size() / 4));
  for (std::size_t l = 0; l < paths.size(); ++l) {
    const auto o = 4 * static_cast<Eigen::Index>(l);
    paths[l] = {std::polar(psi[o], psi[o + 1]), psi[o + 2], psi[o + 3]};
  }
  return paths;
}

Eigen::Vector4cd csi_derivatives(const PathTuple& path, const Codebook& codebook, int beam, double frequency) {
  const double mag = std::abs(path.gain);
  const Complex e = std::polar(1.0, std::arg(path.gain) - 2.0 * kPi * path.toa * frequency);
  const Complex a = beam_gain(codebook, beam, path.aoa);
  const Complex da = beam_gain_derivative(codebook, beam, path.aoa);
  const Complex j(0.0, 1.0);
  Eigen::Vector4cd out;
  out << e * a, mag * j * e * a, mag * e * da, mag * e * a * Complex(0.0, -2.0 * kPi * frequency);
  return out;
}

CMatrix csi_jacobian(std::span<const PathTuple> paths, const Codebook& codebook, const SubcarrierGrid& grid) {
  const Eigen::Index m_count = codebook.num_beams();
  const Eigen::Index ns = grid.size();
  CMatrix jac(m_count * ns, 4 * static_cast<Eigen::Index>(paths.size()));
  for (std::size_t l = 0; l < paths.size(); ++l) {
    const auto& p = paths[l];
    const double mag = std::abs(p.gain);
    const Complex unit = std::polar(1.0, std::arg(p.gain));
    const BeamResponse br = rx_beam_response(codebook, p.aoa);
    const CVector d = delay_vector(grid, p.toa);
    const auto col = 4 * static_cast<Eigen::Index>(l);
    for (Eigen::Index k = 0; k < ns; ++k) {
      const Complex e = unit * d[k];
      const Complex w(0.0, -2.0 * kPi * grid.frequencies[k]);
      auto rows = jac.block(k * m_count, col, m_count, 4);
      rows.col(0) = e * br.value;
      rows.col(1) = Complex(0.0, mag) * e * br.value;
      rows.col(2) = mag * e * br.first;
      rows.col(3) = (mag * e * w) * br.value;
    }
  }
  return jac;
}

FisherMatrix assemble_fim(std::span<const PathTuple> paths, const Codebook& codebook, const SubcarrierGrid& grid,
                          double noise_variance) {
  if (!(noise_variance > 0.0)) throw std::invalid_argument("assemble_fim: noise variance must be positive");
  if (paths.empty()) throw std::invalid_argument("assemble_fim: at least one path required");
  const CMatrix jac = csi_jacobian(paths, codebook, grid);
  FisherMatrix f;
  f.noise_variance = noise_variance;
  f.entries = (2.0 / noise_variance) * (jac.adjoint() * jac).real();
  f.entries = 0.5 * (f.entries + f.entries.transpose()).eval();
  return f;
}

double scaled_condition(const RMatrix& f) {
  const RVector diag = f.diagonal();
  if ((diag.array() <= 0.0).any() || !diag.allFinite()) return std::numeric_limits<double>::infinity();
  const RVector s = diag.cwiseSqrt().cwiseInverse();
  const RMatrix scaled = s.asDiagonal() * f * s.asDiagonal();
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(scaled, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

RMatrix fim_inverse(const FisherMatrix& f) {
  const double cond = scaled_condition(f.entries);
  if (!(cond <= kSingularCondition)) {
    std::ostringstream msg;
    msg << "Fisher matrix is singular or ill-conditioned (scaled condition " << cond << ")";
    throw SingularFisherError(msg.str(), cond);
  }
  const RVector s = f.entries.diagonal().cwiseSqrt().cwiseInverse();
  const RMatrix scaled = s.asDiagonal() * f.entries * s.asDiagonal();
  const RMatrix inv = scaled.ldlt().solve(RMatrix::Identity(scaled.rows(), scaled.cols()));
  return s.asDiagonal() * inv * s.asDiagonal();
}

RVector crlb_diagonal(const FisherMatrix& f) { return fim_inverse(f).diagonal(); }

Abcd abcd(const Codebook& codebook, double theta) {
  const BeamResponse br = rx_beam_response(codebook, theta);
  return {br.value.dot(br.value), br.value.dot(br.first), br.first.dot(br.value), br.first.dot(br.first)};
}

namespace {

// Both combinations cancel heavily near uninformative angles; extended
// precision keeps them consistent with each other.
using Wide = long double;

double informative_denominator(const Abcd& t) {
  const Wide bc = Wide(t.b.real()) * t.c.real() - Wide(t.b.imag()) * t.c.imag();
  const double den = static_cast<double>(Wide(t.a.real()) * t.d.real() - bc);
  const double scale = std::abs(t.a) * std::abs(t.d);
  if (!(den > 1e-14 * scale) || !(den > 0.0))
    throw std::domain_error("uninformative codebook at this angle: AD - Re{BC} is not positive");
  return den;
}

double general_j(const Abcd& t) {
  const Wide ra = t.a.real(), ia = t.a.imag();
  const Wide rb = t.b.real(), ib = t.b.imag();
  const Wide rc = t.c.real(), ic = t.c.imag();
  const Wide rd = t.d.real();
  return static_cast<double>((ra * ra + ia * ia) * rd - ia * ib * rc - ia * ic * rb + ib * ic * ra - ra * rb * rc);
}

}  // namespace

double codebook_error_metric(const Codebook& codebook, double theta) {
  const Abcd t = abcd(codebook, theta);
  return std::real(t.a) / informative_denominator(t);
}

double crlb_theta_simplified(const PathTuple& path, const Codebook& codebook, int num_subcarriers,
                             double noise_variance) {
  const Abcd t = abcd(codebook, path.aoa);
  return noise_variance * std::real(t.a) /
         (2.0 * num_subcarriers * std::norm(path.gain) * informative_denominator(t));
}

double crlb_theta_closed_form(const PathTuple& path, const Codebook& codebook, int num_subcarriers,
                              double noise_variance) {
  const Abcd t = abcd(codebook, path.aoa);
  const double j = general_j(t);
  if (!(j > 0.0)) throw std::domain_error("closed form: J vanishes for this codebook and angle");
  return noise_variance * std::norm(t.a) / (2.0 * num_subcarriers * std::norm(path.gain) * j);
}

std::array<double, 4> closed_form_sigmas(const PathTuple& path, const Codebook& codebook, const SubcarrierGrid& grid,
                                         double noise_variance) {
  if (grid.size() < 2 || !grid.is_uniform_from_zero(1e-9))
    throw std::invalid_argument("closed_form_sigmas: grid must be f_k = k df, k = 0..N_s-1");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("closed_form_sigmas: noise variance must be positive");
  const Abcd t = abcd(codebook, path.aoa);
  const double ns = grid.size();
  const double g2 = std::norm(path.gain);
  const double ra = t.a.real();
  const double j = general_j(t);
  if (!(j > 0.0) || !(ra > 0.0)) throw std::domain_error("closed form: J vanishes for this codebook and angle");
  const double q = ra * ra * t.d.real() - ra * t.b.real() * t.c.real();

  std::array<double, 4> s{};
  s[0] = noise_variance * (t.b.imag() * t.c.imag() + ra * t.d.real()) / (2.0 * ns * j);
  s[1] = -noise_variance * (3.0 * j * (1.0 - ns) - q * (1.0 + ns)) / (2.0 * ns * g2 * ra * (ns + 1.0) * j);
  s[2] = noise_variance * std::norm(t.a) / (2.0 * ns * g2 * j);
  const double tau_norm = 3.0 * ns * noise_variance / (2.0 * kPi * kPi * g2 * ra * (ns * ns - 1.0));
  const double scale = ns * grid.spacing();  // tau_norm = N_s df tau
  s[3] = tau_norm / (scale * scale);
  return s;
}

bool ClosedFormReport::consistent() const {
  return std::all_of(relative_error.begin(), relative_error.end(), [this](double e) { return e <= tolerance; });
}

std::string ClosedFormReport::describe() const {
  static const char* names[4] = {"|g|", "arg g", "theta", "tau"};
  std::ostringstream out;
  out << "parameter,closed_form,numerical,relative_error,status\n";
  for (int i = 0; i < 4; ++i) {
    char line[160];
    std::snprintf(line, sizeof line, "%s,%.12e,%.12e,%.3e,%s\n", names[i], closed_form[i], numerical[i],
                  relative_error[i], relative_error[i] <= tolerance ? "ok" : "deviation (numerical value used)");
    out << line;
  }
  return out.str();
}

ClosedFormReport compare_closed_form(const PathTuple& path, const Codebook& codebook, const SubcarrierGrid& grid,
                                     double noise_variance, double tolerance) {
  ClosedFormReport r;
  r.tolerance = tolerance;
  r.closed_form = closed_form_sigmas(path, codebook, grid, noise_variance);
  const PathTuple one[1] = {path};
  const RVector numeric = crlb_diagonal(assemble_fim(one, codebook, grid, noise_variance));
  for (int i = 0; i < 4; ++i) {
    r.numerical[i] = numeric[i];
    r.relative_error[i] = std::abs(r.closed_form[i] - numeric[i]) / std::abs(numeric[i]);
  }
  return r;
}

RMatrix csi_lower_bound_matrix(std::span<const PathTuple> paths, const Codebook& codebook,
                               const SubcarrierGrid& grid, double noise_variance) {
  const RMatrix inv = fim_inverse(assemble_fim(paths, codebook, grid, noise_variance));
  const CMatrix jac = csi_jacobian(paths, codebook, grid);
  // Row i of jac is (dH_i/dpsi)^T, so LB_i = Re{conj(row_i) inv row_i^T}.
  const CMatrix t = jac * inv.cast<Complex>();
  const RVector lb = (t.array() * jac.conjugate().array()).rowwise().sum().real();
  return Eigen::Map<const RMatrix>(lb.data(), codebook.num_beams(), grid.size());
}

double csi_lower_bound(std::span<const PathTuple> paths, const Codebook& codebook, const SubcarrierGrid& grid,
                       double noise_variance, int beam, int subcarrier) {
  if (beam < 0 || beam >= codebook.num_beams() || subcarrier < 0 || subcarrier >= grid.size())
    throw std::out_of_range("csi_lower_bound: index out of range");
  const RMatrix inv = fim_inverse(assemble_fim(paths, codebook, grid, noise_variance));
  CVector h(4 * static_cast<Eigen::Index>(paths.size()));
  for (std::size_t l = 0; l < paths.size(); ++l)
    h.segment<4>(4 * static_cast<Eigen::Index>(l)) =
        csi_derivatives(paths[l], codebook, beam, grid.frequencies[subcarrier]);
  return std::real(h.dot(inv.cast<Complex>() * h));
}

double virtual_bound_equality(std::span<const PathTuple> paths, const ModuleLayout& layout, int p, int q,
                              const Codebook& codebook, const SubcarrierGrid& grid, double noise_variance) {
  const double rot = layout.rotation(p, q);
  std::vector<PathTuple> mapped(paths.begin(), paths.end());
  for (auto& path : mapped) {
    path.aoa += rot;
    if (!in_observable_range(path.aoa))
      throw std::invalid_argument("virtual_bound_equality: mapped AoA outside (0, pi)");
  }
  const RMatrix lb = csi_lower_bound_matrix(paths, codebook, grid, noise_variance);
  const RMatrix lbq = csi_lower_bound_matrix(mapped, rotate_frame(codebook, rot), grid, noise_variance);
  return ((lbq - lb).cwiseAbs().array() / lb.array().abs()).maxCoeff();
}

}  // namespace fastabs
