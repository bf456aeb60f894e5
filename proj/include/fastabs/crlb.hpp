#pragma once

#include "fastabs/channel.hpp"
#include "fastabs/geometry.hpp"

#include <array>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fastabs {

/// Per path (|g|, arg g, theta, tau); arg g in [0, 2 pi).
RVector to_params(std::span<const PathTuple> paths);
std::vector<PathTuple> from_params(const RVector& psi);

struct FisherMatrix {
  RMatrix entries;
  double noise_variance = 0.0;
};

/// Raised when F is singular or its Jacobi-scaled condition number exceeds 1e12.
class SingularFisherError : public std::runtime_error {
 public:
  SingularFisherError(const std::string& what, double condition)
      : std::runtime_error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

inline constexpr double kSingularCondition = 1e12;

/// dH_m[f]/d(|g|, arg g, theta, tau) for one path.
Eigen::Vector4cd csi_derivatives(const PathTuple& path, const Codebook& codebook, int beam, double frequency);

/// Jacobian of vec(H) with respect to the 4L parameters; rows follow vec(H).
CMatrix csi_jacobian(std::span<const PathTuple> paths, const Codebook& codebook, const SubcarrierGrid& grid);

/// F = (2 / sigma^2) Re{J^H J}.
FisherMatrix assemble_fim(std::span<const PathTuple> paths, const Codebook& codebook, const SubcarrierGrid& grid,
                          double noise_variance);

/// Condition number of D^-1/2 F D^-1/2, D = diag(F). Infinite when F has a
/// non-positive diagonal entry.
double scaled_condition(const RMatrix& f);

/// F^-1 with the singularity guard.
RMatrix fim_inverse(const FisherMatrix& f);

/// diag(F^-1).
RVector crlb_diagonal(const FisherMatrix& f);

struct Abcd {
  Complex a, b, c, d;
};

/// Sums over the codebook beams of A*A, A*A', A'*A and A'*A'.
Abcd abcd(const Codebook& codebook, double theta);

/// A / (AD - Re{BC}). Throws std::domain_error when the denominator is not positive.
double codebook_error_metric(const Codebook& codebook, double theta);

/// sigma^2 A / (2 N_s |g|^2 (AD - Re{BC})).
double crlb_theta_simplified(const PathTuple& path, const Codebook& codebook, int num_subcarriers,
                             double noise_variance);

/// Closed-form single-path CRLBs in the order (|g|, arg g, theta, tau).
///
/// The closed forms assume f_k = k df for k = 0..N_s-1; they are evaluated on
/// the normalized grid f_k = k / N_s and the delay bound is rescaled to s^2.
/// Throws std::invalid_argument for other grids and std::domain_error when the
/// determinant term vanishes.
std::array<double, 4> closed_form_sigmas(const PathTuple& path, const Codebook& codebook, const SubcarrierGrid& grid,
                                         double noise_variance);

/// sigma_theta^2 from the general closed form (with the full J expression).
double crlb_theta_closed_form(const PathTuple& path, const Codebook& codebook, int num_subcarriers,
                              double noise_variance);

struct ClosedFormReport {
  std::array<double, 4> closed_form{};
  std::array<double, 4> numerical{};
  std::array<double, 4> relative_error{};
  double tolerance = 1e-6;

  bool consistent() const;
  /// Human-readable table; names any entry that exceeds the tolerance.
  std::string describe() const;
};

ClosedFormReport compare_closed_form(const PathTuple& path, const Codebook& codebook, const SubcarrierGrid& grid,
                                     double noise_variance, double tolerance = 1e-6);

/// LB_m[f_k] = Re{h^H F^-1 h}, h = dH_m[f_k]/dpsi.
double csi_lower_bound(std::span<const PathTuple> paths, const Codebook& codebook, const SubcarrierGrid& grid,
                       double noise_variance, int beam, int subcarrier);

/// All M x N_s lower bounds at once.
RMatrix csi_lower_bound_matrix(std::span<const PathTuple> paths, const Codebook& codebook,
                               const SubcarrierGrid& grid, double noise_variance);

/// Max over (m, k) of |LB^[q] - LB| / LB, where LB^[q] uses AoAs rotated by
/// rotation(p, q) and the codebook frame rotated by the same angle.
double virtual_bound_equality(std::span<const PathTuple> paths, const ModuleLayout& layout, int p, int q,
                              const Codebook& codebook, const SubcarrierGrid& grid, double noise_variance);

}  // namespace fastabs
