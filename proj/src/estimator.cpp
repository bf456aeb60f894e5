#include "fastabs/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fastabs {

void DictionaryGrids::validate() const {
  if (aoa.size() < 1 || toa.size() < 1) throw std::invalid_argument("DictionaryGrids: grids must be non-empty");
  for (Eigen::Index i = 0; i < aoa.size(); ++i) {
    if (!is_valid_aoa(aoa[i])) throw std::invalid_argument("DictionaryGrids: AoA grid outside (0, pi)");
    if (i > 0 && !(aoa[i] > aoa[i - 1])) throw std::invalid_argument("DictionaryGrids: AoA grid must be sorted");
  }
  for (Eigen::Index j = 0; j < toa.size(); ++j) {
    if (!(toa[j] >= 0.0) || !std::isfinite(toa[j])) throw std::invalid_argument("DictionaryGrids: ToA must be >= 0");
    if (j > 0 && !(toa[j] > toa[j - 1])) throw std::invalid_argument("DictionaryGrids: ToA grid must be sorted");
  }
}

DictionaryGrids DictionaryGrids::defaults(int num_beams, const SubcarrierGrid& grid, double aoa_lo, double aoa_hi) {
  grid.validate();
  if (num_beams < 1) throw std::invalid_argument("DictionaryGrids::defaults: num_beams must be >= 1");
  DictionaryGrids g;
  const int n_aoa = std::max(2, 4 * num_beams);
  g.aoa = RVector::LinSpaced(n_aoa, aoa_lo, aoa_hi);
  const int ns = grid.size();
  const double df = ns > 1 ? grid.spacing() : 60e3;
  const int n_toa = 2 * ns;
  g.toa.resize(n_toa);
  for (int j = 0; j < n_toa; ++j) g.toa[j] = j / (2.0 * ns * df);
  return g;
}

void EstimatorConfig::validate() const {
  if (max_paths < 1) throw std::invalid_argument("EstimatorConfig: max_paths must be >= 1");
  if (newton_steps < 0 || cyclic_rounds < 0 || final_rounds < 0)
    throw std::invalid_argument("EstimatorConfig: loop counts must be >= 0");
  if (!(kappa > 0.0)) throw std::invalid_argument("EstimatorConfig: kappa must be positive");
  if (!(noise_variance >= 0.0)) throw std::invalid_argument("EstimatorConfig: noise variance must be >= 0");
  if (!(relative_floor >= 0.0)) throw std::invalid_argument("EstimatorConfig: relative floor must be >= 0");
}

Dictionary::Dictionary(Codebook codebook, SubcarrierGrid grid, DictionaryGrids grids)
    : codebook_(std::move(codebook)), grid_(std::move(grid)), grids_(std::move(grids)) {
  grid_.validate();
  grids_.validate();
  const auto n_aoa = grids_.aoa.size();
  aoa_atoms_.resize(n_aoa, codebook_.num_beams());
  atom_norms_.resize(n_aoa);
  for (Eigen::Index i = 0; i < n_aoa; ++i) {
    const CVector a = rx_beam_vector(codebook_, grids_.aoa[i]);
    aoa_atoms_.row(i) = a.transpose();
    atom_norms_[i] = grid_.size() * a.squaredNorm();
  }
  toa_atoms_.resize(grid_.size(), grids_.toa.size());
  for (Eigen::Index j = 0; j < grids_.toa.size(); ++j) toa_atoms_.col(j) = delay_vector(grid_, grids_.toa[j]);
}

double Dictionary::grid_points() const {
  return static_cast<double>(grids_.aoa.size()) * static_cast<double>(grids_.toa.size());
}

namespace {

CMatrix as_matrix(const CVector& y, const Codebook& codebook, const SubcarrierGrid& grid) {
  if (y.size() != static_cast<Eigen::Index>(codebook.num_beams()) * grid.size())
    throw std::invalid_argument("measurement length does not match M x N_s");
  return unvectorize(y, codebook.num_beams(), grid.size());
}

CMatrix rank_one(const PathTuple& p, const Codebook& codebook, const SubcarrierGrid& grid) {
  return (p.gain * rx_beam_vector(codebook, p.aoa)) * delay_vector(grid, p.toa).transpose();
}

Detection coarse_detect_matrix(const CMatrix& residual, const Dictionary& dict) {
  const CMatrix z = dict.aoa_atoms().conjugate() * residual * dict.toa_atoms().conjugate();
  const auto& norms = dict.atom_norms();
  Eigen::Index bi = 0, bj = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (!(norms[i] > 0.0)) continue;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const double p = std::norm(z(i, j)) / norms[i];
      if (p > best) {
        best = p;
        bi = i;
        bj = j;
      }
    }
  }
  Detection d;
  d.aoa = dict.grids().aoa[bi];
  d.toa = dict.grids().toa[bj];
  d.power = std::max(best, 0.0);
  d.gain = norms[bi] > 0.0 ? z(bi, bj) / norms[bi] : Complex(0.0, 0.0);
  return d;
}

struct Correlations {
  Complex c;
  double n;
};

Correlations correlate(const CMatrix& residual, const Codebook& codebook, const SubcarrierGrid& grid, double theta,
                       double tau) {
  const CVector a = rx_beam_vector(codebook, theta);
  const CVector d = delay_vector(grid, tau);
  return {a.dot(residual * d.conjugate()), grid.size() * a.squaredNorm()};
}

// One cyclic pass: re-refine each path against the others, then refit all gains.
void cyclic_round(const CMatrix& y, std::vector<PathTuple>& paths, const Codebook& codebook,
                  const SubcarrierGrid& grid) {
  CMatrix r = y;
  for (const auto& p : paths) r -= rank_one(p, codebook, grid);
  for (auto& p : paths) {
    r += rank_one(p, codebook, grid);
    p = newton_refine(r, p, codebook, grid);
    r -= rank_one(p, codebook, grid);
  }
  const auto gains = fit_gains(y, paths, codebook, grid);
  for (std::size_t l = 0; l < paths.size(); ++l) paths[l].gain = gains[l];
}

CMatrix residual_of(const CMatrix& y, std::span<const PathTuple> paths, const Codebook& codebook,
                    const SubcarrierGrid& grid) {
  CMatrix r = y;
  for (const auto& p : paths) r -= rank_one(p, codebook, grid);
  return r;
}

EstimateResult greedy_estimate(const CVector& y, const Dictionary& dict, const EstimatorConfig& config, bool refine) {
  config.validate();
  const Codebook& cb = dict.codebook();
  const SubcarrierGrid& grid = dict.grid();
  const CMatrix ym = as_matrix(y, cb, grid);
  const double threshold = stop_threshold(config, dict, y.squaredNorm());

  EstimateResult out;
  std::vector<PathTuple> paths;
  CMatrix r = ym;
  while (static_cast<int>(paths.size()) < config.max_paths) {
    const Detection det = coarse_detect_matrix(r, dict);
    if (!(det.power > threshold)) break;
    PathTuple p{det.gain, det.aoa, det.toa};
    if (refine)
      for (int s = 0; s < config.newton_steps; ++s) p = newton_refine(r, p, cb, grid);
    paths.push_back(p);
    if (refine) {
      for (int k = 0; k < config.cyclic_rounds; ++k) cyclic_round(ym, paths, cb, grid);
    } else {
      const auto gains = fit_gains(ym, paths, cb, grid);
      for (std::size_t l = 0; l < paths.size(); ++l) paths[l].gain = gains[l];
    }
    r = residual_of(ym, paths, cb, grid);
    out.residual_history.push_back(r.squaredNorm());
  }

  if (refine && !paths.empty()) {
    const double df = grid.size() > 1 ? grid.spacing() : 1.0;
    for (int k = 0; k < config.final_rounds; ++k) {
      const auto before = paths;
      cyclic_round(ym, paths, cb, grid);
      double change = 0.0;
      for (std::size_t l = 0; l < paths.size(); ++l) {
        change = std::max(change, std::abs(paths[l].aoa - before[l].aoa));
        change = std::max(change, std::abs(paths[l].toa - before[l].toa) * df);
      }
      if (change < config.final_tolerance) break;
    }
    r = residual_of(ym, paths, cb, grid);
  }

  TransmitBeamChannel sorted;
  sorted.paths = std::move(paths);
  sorted.canonicalize();
  out.paths = std::move(sorted.paths);
  out.detections = static_cast<int>(out.paths.size());
  out.residual_energy = r.squaredNorm();
  return out;
}

}  // namespace

double cost_j(const CVector& y, std::span<const PathTuple> paths, const Codebook& codebook,
              const SubcarrierGrid& grid) {
  const CMatrix ym = as_matrix(y, codebook, grid);
  return residual_of(ym, paths, codebook, grid).squaredNorm();
}

Detection coarse_detect(const CVector& residual, const Dictionary& dict) {
  return coarse_detect_matrix(as_matrix(residual, dict.codebook(), dict.grid()), dict);
}

Detection coarse_detect(const CVector& residual, const Codebook& codebook, const SubcarrierGrid& grid,
                        const DictionaryGrids& grids) {
  return coarse_detect(residual, Dictionary(codebook, grid, grids));
}

ProfiledCost profiled_cost(const CMatrix& residual, const Codebook& codebook, const SubcarrierGrid& grid,
                           double theta, double tau) {
  const int ns = grid.size();
  const BeamResponse br = rx_beam_response(codebook, theta);
  const CVector d = delay_vector(grid, tau);
  CVector w(ns);
  for (int k = 0; k < ns; ++k) w[k] = Complex(0.0, -2.0 * kPi * grid.frequencies[k]);
  const CVector d1 = d.cwiseProduct(w);
  const CVector d2 = d1.cwiseProduct(w);

  const CVector u = residual * d.conjugate();
  const CVector u1 = residual * d1.conjugate();
  const CVector u2 = residual * d2.conjugate();

  // c = v^H r and its partials; index 0 is theta, 1 is tau.
  const Complex c = br.value.dot(u);
  const Complex ci[2] = {br.first.dot(u), br.value.dot(u1)};
  const Complex cij[2][2] = {{br.second.dot(u), br.first.dot(u1)}, {br.first.dot(u1), br.value.dot(u2)}};

  // ||v||^2 = N_s ||a||^2 depends on theta only.
  const double n = ns * br.value.squaredNorm();
  const double ni[2] = {2.0 * ns * std::real(br.value.dot(br.first)), 0.0};
  const double nij[2][2] = {{2.0 * ns * (br.first.squaredNorm() + std::real(br.value.dot(br.second))), 0.0},
                            {0.0, 0.0}};

  ProfiledCost out;
  if (!(n > 0.0)) return out;
  const double p = std::norm(c);
  double pi[2];
  for (int i = 0; i < 2; ++i) pi[i] = 2.0 * std::real(std::conj(c) * ci[i]);
  out.value = -p / n;
  out.gain = c / n;
  for (int i = 0; i < 2; ++i) {
    out.gradient[i] = -(pi[i] / n - p * ni[i] / (n * n));
    for (int j = 0; j < 2; ++j) {
      const double pij = 2.0 * std::real(std::conj(ci[i]) * ci[j] + std::conj(c) * cij[i][j]);
      out.hessian(i, j) = -(pij / n - (pi[i] * ni[j] + pi[j] * ni[i]) / (n * n) - p * nij[i][j] / (n * n) +
                            2.0 * p * ni[i] * ni[j] / (n * n * n));
    }
  }
  return out;
}

PathTuple newton_refine(const CMatrix& residual, const PathTuple& estimate, const Codebook& codebook,
                        const SubcarrierGrid& grid) {
  if (!std::isfinite(estimate.aoa) || !std::isfinite(estimate.toa)) return estimate;
  const ProfiledCost now = profiled_cost(residual, codebook, grid, estimate.aoa, estimate.toa);
  PathTuple kept{now.gain, estimate.aoa, estimate.toa};
  const auto& h = now.hessian;
  const double det = h(0, 0) * h(1, 1) - h(0, 1) * h(1, 0);
  if (!(h(0, 0) > 0.0) || !(det > 0.0)) return kept;

  const Eigen::Vector2d step = h.inverse() * now.gradient;
  const double theta = estimate.aoa - step[0];
  const double tau = estimate.toa - step[1];
  if (!is_valid_aoa(theta) || !std::isfinite(tau)) return kept;
  const Correlations next = correlate(residual, codebook, grid, theta, tau);
  if (!(next.n > 0.0) || -std::norm(next.c) / next.n > now.value) return kept;
  return {next.c / next.n, theta, tau};
}

PathTuple newton_refine(const CVector& residual, const PathTuple& estimate, const Codebook& codebook,
                        const SubcarrierGrid& grid) {
  return newton_refine(as_matrix(residual, codebook, grid), estimate, codebook, grid);
}

std::vector<Complex> fit_gains(const CMatrix& y, std::span<const PathTuple> paths, const Codebook& codebook,
                               const SubcarrierGrid& grid) {
  const auto l_count = static_cast<Eigen::Index>(paths.size());
  if (l_count == 0) return {};
  std::vector<CVector> a(paths.size()), d(paths.size());
  for (std::size_t l = 0; l < paths.size(); ++l) {
    a[l] = rx_beam_vector(codebook, paths[l].aoa);
    d[l] = delay_vector(grid, paths[l].toa);
  }
  CMatrix gram(l_count, l_count);
  CVector rhs(l_count);
  for (Eigen::Index i = 0; i < l_count; ++i) {
    rhs[i] = a[i].dot(y * d[i].conjugate());
    for (Eigen::Index j = 0; j < l_count; ++j) gram(i, j) = a[i].dot(a[j]) * d[i].dot(d[j]);
  }
  const CVector g = gram.completeOrthogonalDecomposition().solve(rhs);
  return {g.data(), g.data() + g.size()};
}

double stop_threshold(const EstimatorConfig& config, const Dictionary& dict, double y_energy) {
  const double cfar = config.kappa * config.noise_variance * std::log(dict.grid_points());
  return std::max(cfar, config.relative_floor * y_energy);
}

EstimateResult nomp_estimate(const CVector& y, const Dictionary& dict, const EstimatorConfig& config) {
  return greedy_estimate(y, dict, config, true);
}

EstimateResult nomp_estimate(const CVector& y, const Codebook& codebook, const SubcarrierGrid& grid,
                             const EstimatorConfig& config) {
  return nomp_estimate(y, Dictionary(codebook, grid, DictionaryGrids::defaults(codebook.num_beams(), grid)), config);
}

EstimateResult omp_estimate(const CVector& y, const Dictionary& dict, const EstimatorConfig& config) {
  return greedy_estimate(y, dict, config, false);
}

EstimateResult omp_estimate(const CVector& y, const Codebook& codebook, const SubcarrierGrid& grid,
                            const EstimatorConfig& config) {
  return omp_estimate(y, Dictionary(codebook, grid, DictionaryGrids::defaults(codebook.num_beams(), grid)), config);
}

}  // namespace fastabs
