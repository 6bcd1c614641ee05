#pragma once

#include "deepida/types.hpp"

#include <span>
#include <vector>

namespace deepida::classifier {

/// Pooled = all views' scores concatenated column-wise; otherwise one view.
struct Space {
  static constexpr int kPooled = -1;
  int view = kPooled;

  bool pooled() const { return view == kPooled; }
  bool operator==(const Space&) const = default;
};

struct CentroidSet {
  Space space;
  Matrix centroids;  // K x dim, row k is the mean of class k

  int num_classes() const { return static_cast<int>(centroids.rows()); }
  Eigen::Index dim() const { return centroids.cols(); }
};

/// Concatenates per-view scores for the pooled space, or returns one view.
Matrix gather_scores(std::span<const Matrix> scores, Space space);

CentroidSet fit_centroids(std::span<const Matrix> scores, const Labels& labels, Space space);

/// Nearest centroid by Euclidean distance; ties go to the lowest class id.
std::vector<int> predict(const CentroidSet& centroids, const Matrix& points);
std::vector<int> predict(const CentroidSet& centroids, std::span<const Matrix> scores);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace deepida::classifier
