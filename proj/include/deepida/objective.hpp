#pragma once

#include "deepida/linalg.hpp"
#include "deepida/types.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace deepida::objective {

struct IdaConfig {
  /// Weight of class separation versus between-view association, in [0, 1].
  double rho = 0.5;
  /// Number of discriminant directions; 0 resolves to K - 1 at use sites.
  int l = 0;
  /// Relative ridge on S_t, as a multiple of trace(S_t) / dim.
  double ridge = 1e-4;
  /// Relative squared-change tolerance of the coupled eigensystem iteration.
  double eps_gamma = 1e-6;
  int max_gamma_iters = 200;
  linalg::Centering centering = linalg::Centering::SampleMean;

  double c1(std::size_t views) const { return rho / static_cast<double>(views); }
  double c2(std::size_t views) const {
    const auto d = static_cast<double>(views);
    return 2.0 * (1.0 - rho) / (d * (d - 1.0));
  }
  linalg::WhiteningOptions whitening() const { return {ridge, centering}; }
  /// Checks rho, ridge and tolerances. Throws InvalidConfig.
  void validate() const;
  /// Resolved number of directions for K classes and output widths.
  int resolve_l(int num_classes, std::span<const Eigen::Index> output_dims) const;
};

/// Converged discriminant bases and their eigenvalues.
struct IdaProjection {
  std::vector<Matrix> gammas;     // o_d x l, orthonormal columns
  std::vector<Vector> lambdas;    // top-l eigenvalues, descending
  std::vector<Matrix> whiteners;  // (S_t^d + ridge I)^{-1/2}
  bool converged = false;
  int iterations = 0;
  /// True when the l-th and (l+1)-th eigenvalue of some view coincide.
  bool degenerate = false;
  /// Per sweep: c1 sum_d tr(G_d' M_d G_d) + c2 sum_{d<j} |G_d' N_dj G_j|_F^2.
  std::vector<double> potential_trace;
  /// Per sweep: sum over views of the top-l eigenvalue sums found in that sweep.
  std::vector<double> eigen_sum_trace;

  std::size_t views() const { return gammas.size(); }
  /// A_d = W_d Gamma_d, applied to the view's network output.
  Matrix projection_matrix(std::size_t view) const { return whiteners[view] * gammas[view]; }
};

/// c1 M^d + c2 sum_{j != d} N_dj G_j G_j' N_dj'.
Matrix coupled_matrix(std::span<const Matrix> m, const std::vector<std::vector<Matrix>>& n,
                      std::span<const Matrix> gammas, std::size_t view, const IdaConfig& config);

/// Cyclic block eigen-updates until the largest relative squared change of a
/// basis drops below eps_gamma. `initial` (optional) warm-starts the bases;
/// otherwise they are orthonormalised standard-normal draws from `seed`.
IdaProjection solve_gamma_system(std::span<const Matrix> m,
                                 const std::vector<std::vector<Matrix>>& n,
                                 const IdaConfig& config, std::uint64_t seed,
                                 const std::vector<Matrix>* initial = nullptr);

/// max_d |C_d G_d - G_d diag(Lambda_d)|_F at the stored bases.
double fixed_point_residual(std::span<const Matrix> m, const std::vector<std::vector<Matrix>>& n,
                            const IdaProjection& projection, const IdaConfig& config);

/// c1 tr(G_d' M_d G_d) + c2 sum_{j != d} tr(G_d' N_dj G_j G_j' N_dj' G_d).
double trace_objective(std::span<const Matrix> m, const std::vector<std::vector<Matrix>>& n,
                       const IdaProjection& projection, std::size_t view,
                       const IdaConfig& config);

struct LossResult {
  double loss = 0.0;
  IdaProjection projection;
  linalg::WhitenedSystem system;
  int l = 0;
};

/// L = -sum_d sum_{r <= l} eta_{d,r} at the solved coupled system.
LossResult loss_value(std::span<const Matrix> h_list, const Labels& labels,
                      const IdaConfig& config, std::uint64_t seed,
                      const std::vector<Matrix>* initial = nullptr);

/// The loss with every basis held at `projection`: each view's eigenvalue
/// sum is recomputed from the current h_list.
double frozen_loss(std::span<const Matrix> h_list, const Labels& labels, const IdaConfig& config,
                   const IdaProjection& projection);

/// dL/dH^d for every view, treating the other views' bases as constants.
std::vector<Matrix> loss_gradient(const linalg::WhitenedSystem& system, const Labels& labels,
                                  const IdaConfig& config, const IdaProjection& projection);
std::vector<Matrix> loss_gradient(std::span<const Matrix> h_list, const Labels& labels,
                                  const IdaConfig& config, const IdaProjection& projection);

}  // namespace deepida::objective
