#include "deepida/linalg.hpp"

#include "deepida/error.hpp"

#include <cmath>
#include <string>

namespace deepida::linalg {

namespace {

constexpr double kSingularFloor = 1e-12;
constexpr double kSignThreshold = 1e-12;

void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) {
    fail(ErrorKind::InvalidInput, std::string(what) + ": non-finite entries");
  }
}

void require_square_symmetric(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    fail(ErrorKind::InvalidInput, std::string(what) + ": matrix is not square");
  }
  const double scale = 1.0 + a.cwiseAbs().maxCoeff();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    fail(ErrorKind::InvalidInput, std::string(what) + ": matrix is not symmetric");
  }
}

}  // namespace

EigenPairs sym_eig(const Matrix& a) {
  require_finite(a, "sym_eig");
  require_square_symmetric(a, "sym_eig");
  const Eigen::Index dim = a.rows();
  if (dim == 0) return {};

  const Matrix sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    fail(ErrorKind::NumericalFailure, "sym_eig: eigensolver did not converge");
  }

  EigenPairs out;
  out.values = solver.eigenvalues().reverse();
  out.vectors = solver.eigenvectors().rowwise().reverse();
  for (Eigen::Index c = 0; c < dim; ++c) {
    auto col = out.vectors.col(c);
    for (Eigen::Index r = 0; r < dim; ++r) {
      if (std::abs(col(r)) > kSignThreshold) {
        if (col(r) < 0) col = -col;
        break;
      }
    }
  }
  if (!out.values.allFinite() || !out.vectors.allFinite()) {
    fail(ErrorKind::NumericalFailure, "sym_eig: non-finite decomposition");
  }
  return out;
}

Matrix inv_sqrt(const Matrix& a, double ridge) {
  if (!(ridge >= 0.0)) fail(ErrorKind::InvalidInput, "inv_sqrt: ridge must be nonnegative");
  const EigenPairs eig = sym_eig(a);
  const Eigen::Index dim = a.rows();
  const Vector shifted = eig.values.array() + ridge;
  if (dim > 0 && shifted.minCoeff() < kSingularFloor) {
    fail(ErrorKind::SingularMatrix, "inv_sqrt: smallest eigenvalue " +
                                        std::to_string(shifted.minCoeff()) +
                                        " is below 1e-12");
  }
  const Vector scale = shifted.array().rsqrt();
  Matrix out = eig.vectors * scale.asDiagonal() * eig.vectors.transpose();
  return 0.5 * (out + out.transpose());
}

Vector uniform_weights(Eigen::Index n) {
  return Vector::Constant(n, 1.0 / static_cast<double>(n));
}

Vector centering_weights(const Labels& labels, Centering centering) {
  const auto n = static_cast<Eigen::Index>(labels.size());
  if (centering == Centering::SampleMean) return uniform_weights(n);
  labels.require_all_present();
  const std::vector<int> counts = labels.counts();
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i) = 1.0 / (static_cast<double>(labels.num_classes) * counts[labels.ids[i]]);
  }
  return w;
}

Matrix center_rows(const Matrix& h, const Vector& weights) {
  const RowVector mu = weights.transpose() * h;
  return h.rowwise() - mu;
}

Matrix between_class_cov(const Matrix& h, const Labels& labels, Centering centering) {
  const Eigen::Index n = h.rows();
  if (static_cast<std::size_t>(n) != labels.size()) {
    fail(ErrorKind::ShapeMismatch, "between_class_cov: label count differs from row count");
  }
  if (n < 2) fail(ErrorKind::InvalidInput, "between_class_cov: need at least 2 rows");
  labels.require_all_present();

  const Vector w = centering_weights(labels, centering);
  const RowVector mu = w.transpose() * h;
  const std::vector<int> counts = labels.counts();
  Matrix sums = Matrix::Zero(labels.num_classes, h.cols());
  for (Eigen::Index i = 0; i < n; ++i) sums.row(labels.ids[i]) += h.row(i);

  Matrix out = Matrix::Zero(h.cols(), h.cols());
  for (int k = 0; k < labels.num_classes; ++k) {
    const RowVector delta = sums.row(k) / counts[k] - mu;
    out.noalias() += counts[k] * delta.transpose() * delta;
  }
  out /= static_cast<double>(n - 1);
  return 0.5 * (out + out.transpose());
}

Matrix total_cov(const Matrix& h, const Vector& weights) {
  const Eigen::Index n = h.rows();
  if (n < 2) fail(ErrorKind::InvalidInput, "total_cov: need at least 2 rows");
  const Matrix hc = center_rows(h, weights);
  Matrix out = (hc.transpose() * hc) / static_cast<double>(n - 1);
  return 0.5 * (out + out.transpose());
}

Matrix total_cov(const Matrix& h) { return total_cov(h, uniform_weights(h.rows())); }

Matrix cross_cov(const Matrix& h_d, const Matrix& h_j, const Vector& weights_d,
                 const Vector& weights_j) {
  if (h_d.rows() != h_j.rows()) {
    fail(ErrorKind::ShapeMismatch, "cross_cov: row counts differ (" +
                                       std::to_string(h_d.rows()) + " vs " +
                                       std::to_string(h_j.rows()) + ")");
  }
  const Eigen::Index n = h_d.rows();
  if (n < 2) fail(ErrorKind::InvalidInput, "cross_cov: need at least 2 rows");
  return (center_rows(h_d, weights_d).transpose() * center_rows(h_j, weights_j)) /
         static_cast<double>(n - 1);
}

Matrix cross_cov(const Matrix& h_d, const Matrix& h_j) {
  return cross_cov(h_d, h_j, uniform_weights(h_d.rows()), uniform_weights(h_j.rows()));
}

WhitenedSystem whitened_pair(std::span<const Matrix> h_list, const Labels& labels,
                             const WhiteningOptions& options) {
  const std::size_t views = h_list.size();
  if (views == 0) fail(ErrorKind::InvalidInput, "whitened_pair: no views");
  const auto n = static_cast<Eigen::Index>(labels.size());
  for (std::size_t d = 0; d < views; ++d) {
    if (h_list[d].rows() != n) {
      fail(ErrorKind::ShapeMismatch, "whitened_pair: view " + std::to_string(d + 1) +
                                         " has " + std::to_string(h_list[d].rows()) +
                                         " rows, labels have " + std::to_string(n));
    }
    if (!h_list[d].allFinite()) {
      fail(ErrorKind::NumericalFailure,
           "whitened_pair: view " + std::to_string(d + 1) + " has non-finite entries");
    }
  }
  if (!(options.ridge_scale >= 0.0)) {
    fail(ErrorKind::InvalidInput, "whitened_pair: ridge must be nonnegative");
  }

  WhitenedSystem sys;
  const Vector w = centering_weights(labels, options.centering);
  sys.weights.assign(views, w);
  for (std::size_t d = 0; d < views; ++d) {
    const Matrix& h = h_list[d];
    sys.centered.push_back(center_rows(h, w));
    sys.between.push_back(between_class_cov(h, labels, options.centering));
    Matrix st = (sys.centered[d].transpose() * sys.centered[d]) / static_cast<double>(n - 1);
    st = 0.5 * (st + st.transpose());
    const double ridge = options.ridge_scale * st.trace() / static_cast<double>(st.rows());
    sys.ridge.push_back(ridge);
    sys.whiteners.push_back(inv_sqrt(st, ridge));
    sys.total.push_back(std::move(st));
    Matrix m = sys.whiteners[d] * sys.between[d] * sys.whiteners[d];
    sys.m.push_back(0.5 * (m + m.transpose()));
  }
  sys.n.assign(views, std::vector<Matrix>(views));
  for (std::size_t d = 0; d < views; ++d) {
    for (std::size_t j = d + 1; j < views; ++j) {
      const Matrix s_dj =
          (sys.centered[d].transpose() * sys.centered[j]) / static_cast<double>(n - 1);
      sys.n[d][j] = sys.whiteners[d] * s_dj * sys.whiteners[j];
      sys.n[j][d] = sys.n[d][j].transpose();
    }
  }
  return sys;
}

}  // namespace deepida::linalg
