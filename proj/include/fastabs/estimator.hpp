#pragma once

#include "fastabs/channel.hpp"

#include <span>
#include <vector>

namespace fastabs {

/// Coarse search grids for AoA (rad) and ToA (s).
struct DictionaryGrids {
  RVector aoa;
  RVector toa;

  void validate() const;

  /// 4 AoA points per beam over [aoa_lo, aoa_hi]; 2 N_s ToA points spaced
  /// 1/(2 N_s df) over [0, 1/df).
  static DictionaryGrids defaults(int num_beams, const SubcarrierGrid& grid, double aoa_lo = deg2rad(30.0),
                                  double aoa_hi = deg2rad(150.0));
};

struct EstimatorConfig {
  int max_paths = 4;
  int newton_steps = 3;   // per new detection
  int cyclic_rounds = 3;  // after each detection
  int final_rounds = 30;  // convergence sweeps once detection stops; early exit
  double final_tolerance = 1e-9;
  double kappa = 1.5;
  double noise_variance = 0.0;  // known sigma_z^2
  /// Stop-rule floor relative to ||y||^2; only matters when noise_variance is ~0.
  double relative_floor = 1e-12;

  void validate() const;
};

struct EstimateResult {
  std::vector<PathTuple> paths;  // descending |gain|
  double residual_energy = 0.0;
  int detections = 0;
  std::vector<double> residual_history;  // ||y_r||^2 after each detection
};

/// Precomputed coarse dictionary for one (codebook, grid, grids) triple.
/// Immutable; safe to share between threads.
class Dictionary {
 public:
  Dictionary(Codebook codebook, SubcarrierGrid grid, DictionaryGrids grids);

  const Codebook& codebook() const { return codebook_; }
  const SubcarrierGrid& grid() const { return grid_; }
  const DictionaryGrids& grids() const { return grids_; }
  int num_beams() const { return codebook_.num_beams(); }
  int num_subcarriers() const { return grid_.size(); }
  /// |Theta| * |Gamma|.
  double grid_points() const;

  /// Rows are a(theta_i)^T.
  const CMatrix& aoa_atoms() const { return aoa_atoms_; }
  /// Columns are delay_vector(tau_j).
  const CMatrix& toa_atoms() const { return toa_atoms_; }
  /// ||v(theta_i, tau)||^2, independent of tau.
  const RVector& atom_norms() const { return atom_norms_; }

 private:
  Codebook codebook_;
  SubcarrierGrid grid_;
  DictionaryGrids grids_;
  CMatrix aoa_atoms_;
  CMatrix toa_atoms_;
  RVector atom_norms_;
};

struct Detection {
  double aoa = 0.0;
  double toa = 0.0;
  Complex gain{0.0, 0.0};
  double power = 0.0;  // |v^H y|^2 / ||v||^2
};

/// J = ||y - sum_l g_l v(theta_l, tau_l)||^2.
double cost_j(const CVector& y, std::span<const PathTuple> paths, const Codebook& codebook,
              const SubcarrierGrid& grid);

/// Grid point maximizing |v^H y|^2 / ||v||^2 with g = v^H y / ||v||^2.
/// Ties keep the smallest AoA index, then the smallest ToA index.
Detection coarse_detect(const CVector& residual, const Dictionary& dict);
Detection coarse_detect(const CVector& residual, const Codebook& codebook, const SubcarrierGrid& grid,
                        const DictionaryGrids& grids);

/// Value, gradient and Hessian over (theta, tau) of the gain-profiled cost
/// -|v^H r|^2 / ||v||^2, which differs from min_g ||r - g v||^2 by ||r||^2.
struct ProfiledCost {
  double value = 0.0;
  Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
  Eigen::Matrix2d hessian = Eigen::Matrix2d::Zero();
  Complex gain{0.0, 0.0};
};
ProfiledCost profiled_cost(const CMatrix& residual, const Codebook& codebook, const SubcarrierGrid& grid,
                           double theta, double tau);

/// One guarded Newton step on (theta, tau) followed by the least-squares gain.
/// The step is taken only when the Hessian is positive definite, the new AoA
/// stays in (0, pi), and the residual cost does not increase.
PathTuple newton_refine(const CVector& residual, const PathTuple& estimate, const Codebook& codebook,
                        const SubcarrierGrid& grid);
PathTuple newton_refine(const CMatrix& residual, const PathTuple& estimate, const Codebook& codebook,
                        const SubcarrierGrid& grid);

/// Least-squares gains for fixed (theta_l, tau_l).
std::vector<Complex> fit_gains(const CMatrix& y, std::span<const PathTuple> paths, const Codebook& codebook,
                               const SubcarrierGrid& grid);

/// Detection threshold on |v^H y_r|^2 / ||v||^2.
double stop_threshold(const EstimatorConfig& config, const Dictionary& dict, double y_energy);

EstimateResult nomp_estimate(const CVector& y, const Dictionary& dict, const EstimatorConfig& config);
EstimateResult nomp_estimate(const CVector& y, const Codebook& codebook, const SubcarrierGrid& grid,
                             const EstimatorConfig& config);

/// Same greedy loop on the grid only: detection plus joint gain re-fit.
EstimateResult omp_estimate(const CVector& y, const Dictionary& dict, const EstimatorConfig& config);
EstimateResult omp_estimate(const CVector& y, const Codebook& codebook, const SubcarrierGrid& grid,
                            const EstimatorConfig& config);

}  // namespace fastabs
