#include "deepida/classifier.hpp"

#include "deepida/error.hpp"

#include <string>

namespace deepida::classifier {

Matrix gather_scores(std::span<const Matrix> scores, Space space) {
  if (scores.empty()) fail(ErrorKind::InvalidInput, "no score matrices given");
  if (!space.pooled()) {
    if (space.view < 0 || static_cast<std::size_t>(space.view) >= scores.size()) {
      fail(ErrorKind::InvalidInput, "view " + std::to_string(space.view + 1) + " does not exist");
    }
    return scores[static_cast<std::size_t>(space.view)];
  }
  const Eigen::Index n = scores.front().rows();
  Eigen::Index cols = 0;
  for (const Matrix& s : scores) {
    if (s.rows() != n) fail(ErrorKind::ShapeMismatch, "score matrices differ in row count");
    cols += s.cols();
  }
  Matrix out(n, cols);
  Eigen::Index at = 0;
  for (const Matrix& s : scores) {
    out.middleCols(at, s.cols()) = s;
    at += s.cols();
  }
  return out;
}

CentroidSet fit_centroids(std::span<const Matrix> scores, const Labels& labels, Space space) {
  const Matrix points = gather_scores(scores, space);
  if (static_cast<std::size_t>(points.rows()) != labels.size()) {
    fail(ErrorKind::ShapeMismatch, "fit_centroids: label count differs from score rows");
  }
  labels.require_all_present();
  CentroidSet out;
  out.space = space;
  out.centroids = Matrix::Zero(labels.num_classes, points.cols());
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out.centroids.row(labels.ids[static_cast<std::size_t>(i)]) += points.row(i);
  }
  const std::vector<int> counts = labels.counts();
  for (int k = 0; k < labels.num_classes; ++k) out.centroids.row(k) /= counts[static_cast<std::size_t>(k)];
  if (!out.centroids.allFinite()) fail(ErrorKind::NumericalFailure, "centroids are not finite");
  return out;
}

std::vector<int> predict(const CentroidSet& centroids, const Matrix& points) {
  if (points.cols() != centroids.dim()) {
    fail(ErrorKind::ShapeMismatch, "predict: scores have " + std::to_string(points.cols()) +
                                       " columns, centroids have " +
                                       std::to_string(centroids.dim()));
  }
  std::vector<int> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    int best = 0;
    double best_dist = (centroids.centroids.row(0) - points.row(i)).squaredNorm();
    for (int k = 1; k < centroids.num_classes(); ++k) {
      const double dist = (centroids.centroids.row(k) - points.row(i)).squaredNorm();
      if (dist < best_dist) {
        best = k;
        best_dist = dist;
      }
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

std::vector<int> predict(const CentroidSet& centroids, std::span<const Matrix> scores) {
  return predict(centroids, gather_scores(scores, centroids.space));
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    fail(ErrorKind::ShapeMismatch, "accuracy: prediction and truth lengths differ");
  }
  if (truth.empty()) fail(ErrorKind::InvalidInput, "accuracy: no samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

}  // namespace deepida::classifier
