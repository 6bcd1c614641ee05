#pragma once

#include "deepida/types.hpp"

#include <string>
#include <vector>

namespace deepida {

/// D row-aligned sample matrices sharing one label vector.
struct MultiViewDataset {
  std::vector<Matrix> views;
  Labels labels;
  /// Ground-truth signal flags per view; empty when unknown.
  std::vector<std::vector<bool>> signal_mask;
  /// Column names per view; empty means generated names (f1, f2, ...).
  std::vector<std::vector<std::string>> feature_names;
  /// Free-form description of how the data were produced.
  std::string provenance;

  std::size_t num_views() const { return views.size(); }
  Eigen::Index num_samples() const { return static_cast<Eigen::Index>(labels.size()); }
  std::vector<Eigen::Index> feature_counts() const;

  /// Throws ShapeMismatch when views, labels, masks or names disagree in size.
  void validate() const;

  /// Rows in the given order (repeats allowed). Masks and names are kept.
  MultiViewDataset subset_rows(const std::vector<int>& rows) const;

  /// Keeps the listed columns of every view, in the given order.
  MultiViewDataset select_features(const std::vector<std::vector<int>>& columns) const;

  std::string feature_name(std::size_t view, Eigen::Index column) const;
};

}  // namespace deepida
