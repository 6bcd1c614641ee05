#pragma once

#include "deepida/types.hpp"

#include <span>
#include <vector>

namespace deepida::linalg {

/// Spectral decomposition of a symmetric matrix. Values are sorted descending;
/// each eigenvector column has its first nonzero component positive.
struct EigenPairs {
  Vector values;
  Matrix vectors;
};

EigenPairs sym_eig(const Matrix& a);

/// (a + ridge * I)^{-1/2} through the spectral decomposition.
/// Throws SingularMatrix when the smallest shifted eigenvalue is below 1e-12.
Matrix inv_sqrt(const Matrix& a, double ridge);

/// Location used to center covariances.
enum class Centering {
  SampleMean,        ///< n_k-weighted grand mean of all rows
  ClassMeanAverage,  ///< unweighted average of the K class means
};

/// Row weights w (summing to one) such that the centering point is w^T H.
Vector centering_weights(const Labels& labels, Centering centering);
Vector uniform_weights(Eigen::Index n);

/// H - 1 w^T H.
Matrix center_rows(const Matrix& h, const Vector& weights);

Matrix between_class_cov(const Matrix& h, const Labels& labels,
                         Centering centering = Centering::SampleMean);
Matrix total_cov(const Matrix& h);
Matrix total_cov(const Matrix& h, const Vector& weights);
Matrix cross_cov(const Matrix& h_d, const Matrix& h_j);
Matrix cross_cov(const Matrix& h_d, const Matrix& h_j, const Vector& weights_d,
                 const Vector& weights_j);

struct WhiteningOptions {
  /// Ridge added to S_t before inversion, as a multiple of trace(S_t) / dim.
  double ridge_scale = 1e-4;
  Centering centering = Centering::SampleMean;
};

/// Whitened between-class matrices M^d = W_d S_b^d W_d and cross matrices
/// N_dj = W_d S_dj W_j with W_d = (S_t^d + ridge_d I)^{-1/2}.
/// Keeps the intermediates the objective gradient needs.
struct WhitenedSystem {
  std::vector<Vector> weights;        // centering weights per view
  std::vector<Matrix> centered;       // centered H^d
  std::vector<Matrix> between;        // S_b^d
  std::vector<Matrix> total;          // S_t^d without ridge
  std::vector<double> ridge;          // absolute ridge per view
  std::vector<Matrix> whiteners;      // W_d
  std::vector<Matrix> m;              // M^d
  std::vector<std::vector<Matrix>> n; // n[d][j] = N_dj; n[d][d] is empty

  std::size_t views() const { return m.size(); }
};

WhitenedSystem whitened_pair(std::span<const Matrix> h_list, const Labels& labels,
                             const WhiteningOptions& options = {});

}  // namespace deepida::linalg
