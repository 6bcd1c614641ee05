#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace deepida {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Class assignment for n samples. Ids are 0-based and dense in [0, num_classes).
struct Labels {
  std::vector<int> ids;
  int num_classes = 0;

  std::size_t size() const { return ids.size(); }
  /// Per-class sample counts.
  std::vector<int> counts() const;
  /// Throws InvalidLabels if an id is out of range or a class has no sample.
  void require_all_present() const;
  /// Builds labels from ids, inferring num_classes as max id + 1.
  static Labels from_ids(std::vector<int> ids);
};

}  // namespace deepida
