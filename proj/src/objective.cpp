#include "deepida/objective.hpp"

#include "deepida/error.hpp"
#include "deepida/log.hpp"
#include "deepida/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace deepida::objective {

using linalg::EigenPairs;
using linalg::sym_eig;

void IdaConfig::validate() const {
  if (!(rho >= 0.0 && rho <= 1.0)) fail(ErrorKind::InvalidConfig, "rho must lie in [0, 1]");
  if (l < 0) fail(ErrorKind::InvalidConfig, "l must be positive (or 0 for K - 1)");
  if (!(ridge >= 0.0)) fail(ErrorKind::InvalidConfig, "ridge must be nonnegative");
  if (!(eps_gamma > 0.0)) fail(ErrorKind::InvalidConfig, "eps_gamma must be positive");
  if (max_gamma_iters < 1) fail(ErrorKind::InvalidConfig, "max_gamma_iters must be positive");
}

int IdaConfig::resolve_l(int num_classes, std::span<const Eigen::Index> output_dims) const {
  Eigen::Index cap = num_classes - 1;
  for (Eigen::Index o : output_dims) cap = std::min(cap, o);
  const int resolved = l == 0 ? static_cast<int>(cap) : l;
  if (resolved < 1 || resolved > cap) {
    fail(ErrorKind::InvalidConfig, "l = " + std::to_string(resolved) +
                                       " must lie in [1, min(K - 1, o_1, ..., o_D)] = [1, " +
                                       std::to_string(cap) + "]");
  }
  return resolved;
}

Matrix coupled_matrix(std::span<const Matrix> m, const std::vector<std::vector<Matrix>>& n,
                      std::span<const Matrix> gammas, std::size_t view,
                      const IdaConfig& config) {
  const std::size_t views = m.size();
  Matrix c = config.c1(views) * m[view];
  const double c2 = config.c2(views);
  if (c2 != 0.0) {
    for (std::size_t j = 0; j < views; ++j) {
      if (j == view) continue;
      const Matrix ng = n[view][j] * gammas[j];
      c.noalias() += c2 * ng * ng.transpose();
    }
  }
  return 0.5 * (c + c.transpose());
}

namespace {

Matrix random_orthonormal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  const Matrix draw = standard_normal(rows, cols, rng);
  Eigen::HouseholderQR<Matrix> qr(draw);
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

double potential(std::span<const Matrix> m, const std::vector<std::vector<Matrix>>& n,
                 std::span<const Matrix> gammas, const IdaConfig& config) {
  const std::size_t views = m.size();
  double total = 0.0;
  for (std::size_t d = 0; d < views; ++d) {
    total += config.c1(views) * (gammas[d].transpose() * m[d] * gammas[d]).trace();
    for (std::size_t j = d + 1; j < views; ++j) {
      total += config.c2(views) * (gammas[d].transpose() * n[d][j] * gammas[j]).squaredNorm();
    }
  }
  return total;
}

void check_system(std::span<const Matrix> m, const std::vector<std::vector<Matrix>>& n, int l) {
  const std::size_t views = m.size();
  if (views < 2) fail(ErrorKind::InvalidInput, "coupled eigensystem needs at least 2 views");
  if (n.size() != views) fail(ErrorKind::ShapeMismatch, "cross table size differs from views");
  for (std::size_t d = 0; d < views; ++d) {
    if (m[d].rows() != m[d].cols()) fail(ErrorKind::ShapeMismatch, "M^d must be square");
    if (m[d].rows() < l) {
      fail(ErrorKind::InvalidConfig, "l exceeds output width of view " + std::to_string(d + 1));
    }
    if (n[d].size() != views) fail(ErrorKind::ShapeMismatch, "cross table row has wrong size");
    for (std::size_t j = 0; j < views; ++j) {
      if (j == d) continue;
      if (n[d][j].rows() != m[d].rows() || n[d][j].cols() != m[j].rows()) {
        fail(ErrorKind::ShapeMismatch, "N_dj shape does not match view widths");
      }
    }
  }
}

}  // namespace

IdaProjection solve_gamma_system(std::span<const Matrix> m,
                                 const std::vector<std::vector<Matrix>>& n,
                                 const IdaConfig& config, std::uint64_t seed,
                                 const std::vector<Matrix>* initial) {
  config.validate();
  if (config.l < 1) fail(ErrorKind::InvalidConfig, "solve_gamma_system: l must be resolved");
  const auto l = static_cast<Eigen::Index>(config.l);
  check_system(m, n, config.l);
  const std::size_t views = m.size();

  IdaProjection proj;
  bool align_signs = false;
  if (initial != nullptr && initial->size() == views &&
      std::all_of(initial->begin(), initial->end(), [&](const Matrix& g) { return g.cols() == l; })) {
    proj.gammas = *initial;
    for (std::size_t d = 0; d < views; ++d) {
      if (proj.gammas[d].rows() != m[d].rows()) {
        fail(ErrorKind::ShapeMismatch, "initial basis shape does not match view width");
      }
    }
    align_signs = true;
  } else {
    Rng rng(seed);
    for (std::size_t d = 0; d < views; ++d) {
      proj.gammas.push_back(random_orthonormal(m[d].rows(), l, rng));
    }
  }
  proj.lambdas.assign(views, Vector::Zero(l));

  const bool decoupled = config.c2(views) == 0.0;
  for (int iter = 1; iter <= config.max_gamma_iters; ++iter) {
    double max_change = 0.0;
    double eigen_sum = 0.0;
    for (std::size_t d = 0; d < views; ++d) {
      const Matrix c = coupled_matrix(m, n, proj.gammas, d, config);
      if (!c.allFinite()) {
        fail(ErrorKind::NumericalFailure, "coupled eigensystem produced non-finite entries");
      }
      const EigenPairs eig = sym_eig(c);
      Matrix next = eig.vectors.leftCols(l);
      const Matrix& prev = proj.gammas[d];
      if (align_signs) {
        for (Eigen::Index r = 0; r < l; ++r) {
          if (next.col(r).dot(prev.col(r)) < 0.0) next.col(r) = -next.col(r);
        }
      }
      const double denom = prev.squaredNorm();
      const double change = denom > 0.0 ? (next - prev).squaredNorm() / denom : 1.0;
      max_change = std::max(max_change, change);
      proj.gammas[d] = std::move(next);
      proj.lambdas[d] = eig.values.head(l);
      eigen_sum += proj.lambdas[d].sum();
      if (eig.values.size() > l) {
        const double gap = eig.values(l - 1) - eig.values(l);
        proj.degenerate =
            proj.degenerate || gap <= 1e-10 * std::max(1.0, std::abs(eig.values(0)));
      }
    }
    align_signs = true;
    proj.iterations = iter;
    proj.potential_trace.push_back(potential(m, n, proj.gammas, config));
    proj.eigen_sum_trace.push_back(eigen_sum);
    if (decoupled || max_change < config.eps_gamma) {
      proj.converged = true;
      break;
    }
  }
  if (proj.degenerate) {
    log::debug("coupled eigensystem: l-th eigenvalue is tied; top-l subspace is not unique");
  }
  return proj;
}

double trace_objective(std::span<const Matrix> m, const std::vector<std::vector<Matrix>>& n,
                       const IdaProjection& projection, std::size_t view,
                       const IdaConfig& config) {
  const std::size_t views = m.size();
  const Matrix& g = projection.gammas[view];
  double total = config.c1(views) * (g.transpose() * m[view] * g).trace();
  for (std::size_t j = 0; j < views; ++j) {
    if (j == view) continue;
    const Matrix inner = g.transpose() * n[view][j] * projection.gammas[j];
    total += config.c2(views) * (inner * inner.transpose()).trace();
  }
  return total;
}

double fixed_point_residual(std::span<const Matrix> m, const std::vector<std::vector<Matrix>>& n,
                            const IdaProjection& projection, const IdaConfig& config) {
  double worst = 0.0;
  for (std::size_t d = 0; d < m.size(); ++d) {
    const Matrix c = coupled_matrix(m, n, projection.gammas, d, config);
    const Matrix& g = projection.gammas[d];
    const double r = (c * g - g * projection.lambdas[d].asDiagonal()).norm();
    worst = std::max(worst, r);
  }
  return worst;
}

namespace {

void check_views(std::span<const Matrix> h_list, const Labels& labels) {
  if (h_list.size() < 2) fail(ErrorKind::InvalidInput, "Deep IDA loss needs at least 2 views");
  labels.require_all_present();
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (n < labels.num_classes + 1) {
    fail(ErrorKind::InvalidBatch, "need at least K + 1 samples, got " + std::to_string(n));
  }
}

IdaConfig resolved(const IdaConfig& config, const Labels& labels,
                   std::span<const Matrix> h_list) {
  std::vector<Eigen::Index> widths;
  for (const Matrix& h : h_list) widths.push_back(h.cols());
  IdaConfig out = config;
  out.l = config.resolve_l(labels.num_classes, widths);
  return out;
}

}  // namespace

LossResult loss_value(std::span<const Matrix> h_list, const Labels& labels,
                      const IdaConfig& config, std::uint64_t seed,
                      const std::vector<Matrix>* initial) {
  config.validate();
  check_views(h_list, labels);
  const IdaConfig cfg = resolved(config, labels, h_list);
  LossResult out;
  out.l = cfg.l;
  out.system = linalg::whitened_pair(h_list, labels, cfg.whitening());
  out.projection = solve_gamma_system(out.system.m, out.system.n, cfg, seed, initial);
  out.projection.whiteners = out.system.whiteners;
  double total = 0.0;
  for (const Vector& lam : out.projection.lambdas) total += lam.sum();
  if (!std::isfinite(total)) fail(ErrorKind::NumericalFailure, "loss is not finite");
  out.loss = -total;
  return out;
}

double frozen_loss(std::span<const Matrix> h_list, const Labels& labels, const IdaConfig& config,
                   const IdaProjection& projection) {
  check_views(h_list, labels);
  const IdaConfig cfg = resolved(config, labels, h_list);
  const linalg::WhitenedSystem sys = linalg::whitened_pair(h_list, labels, cfg.whitening());
  double total = 0.0;
  for (std::size_t d = 0; d < sys.views(); ++d) {
    const Matrix c = coupled_matrix(sys.m, sys.n, projection.gammas, d, cfg);
    total += sym_eig(c).values.head(cfg.l).sum();
  }
  return -total;
}

namespace {

/// Gradient of <G, (S + ridge I)^{-1/2}> with respect to S, where
/// ridge = scale * trace(S) / dim.
Matrix inv_sqrt_backward(const Matrix& s, double ridge, double ridge_scale, const Matrix& g) {
  const Eigen::Index dim = s.rows();
  const EigenPairs eig = sym_eig(s + ridge * Matrix::Identity(dim, dim));
  const Vector root = eig.values.array().sqrt();
  const Matrix rotated = eig.vectors.transpose() * (0.5 * (g + g.transpose())) * eig.vectors;
  Matrix weighted(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      // divided difference of s^{-1/2}; equals the derivative when i == j
      const double dd = -1.0 / (root(i) * root(j) * (root(i) + root(j)));
      weighted(i, j) = rotated(i, j) * dd;
    }
  }
  Matrix out = eig.vectors * weighted * eig.vectors.transpose();
  if (ridge_scale != 0.0) {
    out.diagonal().array() += ridge_scale * out.trace() / static_cast<double>(dim);
  }
  return out;
}

/// G_H - w (1' G_H): backward of H -> H - 1 w' H.
Matrix uncenter(const Matrix& g, const Vector& weights) {
  const RowVector col_sums = g.colwise().sum();
  return g - weights * col_sums;
}

}  // namespace

std::vector<Matrix> loss_gradient(const linalg::WhitenedSystem& sys, const Labels& labels,
                                  const IdaConfig& config, const IdaProjection& projection) {
  const std::size_t views = sys.views();
  if (projection.gammas.size() != views) {
    fail(ErrorKind::ShapeMismatch, "loss_gradient: projection view count differs");
  }
  IdaConfig cfg = config;
  cfg.l = static_cast<int>(projection.gammas.front().cols());
  const auto l = static_cast<Eigen::Index>(cfg.l);
  for (std::size_t d = 0; d < views; ++d) {
    if (projection.gammas[d].rows() != sys.m[d].rows() || projection.gammas[d].cols() != l) {
      fail(ErrorKind::ShapeMismatch, "loss_gradient: basis shape does not match view width");
    }
  }
  const Eigen::Index n = sys.centered.front().rows();
  const double inv_n1 = 1.0 / static_cast<double>(n - 1);
  const double c1 = cfg.c1(views);
  const double c2 = cfg.c2(views);

  std::vector<Matrix> q(views);
  std::vector<Matrix> p(views);
  for (std::size_t d = 0; d < views; ++d) {
    const Matrix c = coupled_matrix(sys.m, sys.n, projection.gammas, d, cfg);
    const Matrix u = sym_eig(c).vectors.leftCols(l);
    q[d] = u * u.transpose();
    p[d] = projection.gammas[d] * projection.gammas[d].transpose();
  }

  std::vector<Matrix> g_w(views);
  std::vector<Matrix> g_hc(views);
  std::vector<Matrix> g_h(views);
  for (std::size_t d = 0; d < views; ++d) {
    const Eigen::Index o = sys.m[d].rows();
    g_w[d] = Matrix::Zero(o, o);
    g_hc[d] = Matrix::Zero(n, o);
  }

  for (std::size_t d = 0; d < views; ++d) {
    const Matrix& w = sys.whiteners[d];
    // M^d = W S_b W
    const Matrix g_m = c1 * q[d];
    const Matrix wsb = w * sys.between[d];
    g_w[d].noalias() += g_m * wsb + wsb.transpose() * g_m;
    const Matrix g_sb = w * g_m * w;

    // S_b = Hb' Hb / (n - 1), Hb rows = class mean - grand mean
    const std::vector<int> counts = labels.counts();
    Matrix class_means = Matrix::Zero(labels.num_classes, sys.centered[d].cols());
    for (Eigen::Index i = 0; i < n; ++i) class_means.row(labels.ids[i]) += sys.centered[d].row(i);
    for (int k = 0; k < labels.num_classes; ++k) class_means.row(k) /= counts[k];
    Matrix hb(n, sys.centered[d].cols());
    for (Eigen::Index i = 0; i < n; ++i) hb.row(i) = class_means.row(labels.ids[i]);
    const Matrix g_hb = hb * (g_sb + g_sb.transpose()) * inv_n1;
    Matrix g_class = Matrix::Zero(labels.num_classes, g_hb.cols());
    for (Eigen::Index i = 0; i < n; ++i) g_class.row(labels.ids[i]) += g_hb.row(i);
    for (int k = 0; k < labels.num_classes; ++k) g_class.row(k) /= counts[k];
    Matrix g_from_sb(n, g_hb.cols());
    for (Eigen::Index i = 0; i < n; ++i) g_from_sb.row(i) = g_class.row(labels.ids[i]);
    g_h[d] = uncenter(g_from_sb, sys.weights[d]);

    // N_dj = W_d S_dj W_j for every ordered pair
    if (c2 != 0.0) {
      for (std::size_t j = 0; j < views; ++j) {
        if (j == d) continue;
        const Matrix g_n = 2.0 * c2 * q[d] * sys.n[d][j] * p[j];
        const Matrix s_dj = sys.centered[d].transpose() * sys.centered[j] * inv_n1;
        const Matrix& wj = sys.whiteners[j];
        g_w[d].noalias() += g_n * (s_dj * wj).transpose();
        g_w[j].noalias() += (w * s_dj).transpose() * g_n;
        const Matrix g_s = w * g_n * wj;
        g_hc[d].noalias() += sys.centered[j] * g_s.transpose() * inv_n1;
        g_hc[j].noalias() += sys.centered[d] * g_s * inv_n1;
      }
    }
  }

  std::vector<Matrix> out(views);
  for (std::size_t d = 0; d < views; ++d) {
    const Matrix g_st = inv_sqrt_backward(sys.total[d], sys.ridge[d], cfg.ridge, g_w[d]);
    g_hc[d].noalias() += sys.centered[d] * (g_st + g_st.transpose()) * inv_n1;
    g_h[d] += uncenter(g_hc[d], sys.weights[d]);
    out[d] = -g_h[d];
    if (!out[d].allFinite()) fail(ErrorKind::NumericalFailure, "loss gradient is not finite");
  }
  return out;
}

std::vector<Matrix> loss_gradient(std::span<const Matrix> h_list, const Labels& labels,
                                  const IdaConfig& config, const IdaProjection& projection) {
  check_views(h_list, labels);
  const linalg::WhitenedSystem sys = linalg::whitened_pair(h_list, labels, config.whitening());
  return loss_gradient(sys, labels, config, projection);
}

}  // namespace deepida::objective
