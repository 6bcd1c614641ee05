#include "deepida/dataset.hpp"

#include "deepida/error.hpp"

#include <algorithm>
#include <string>

namespace deepida {

std::vector<int> Labels::counts() const {
  std::vector<int> out(static_cast<std::size_t>(std::max(num_classes, 0)), 0);
  for (int id : ids) {
    if (id < 0 || id >= num_classes) {
      fail(ErrorKind::InvalidLabels, "class id " + std::to_string(id) + " outside [0, " +
                                         std::to_string(num_classes) + ")");
    }
    ++out[static_cast<std::size_t>(id)];
  }
  return out;
}

void Labels::require_all_present() const {
  if (num_classes < 1) fail(ErrorKind::InvalidLabels, "no classes");
  const std::vector<int> c = counts();
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c[k] == 0) {
      fail(ErrorKind::InvalidLabels, "class " + std::to_string(k + 1) + " has no samples");
    }
  }
}

Labels Labels::from_ids(std::vector<int> ids) {
  Labels out;
  int max_id = -1;
  for (int id : ids) {
    if (id < 0) fail(ErrorKind::InvalidLabels, "negative class id");
    max_id = std::max(max_id, id);
  }
  out.ids = std::move(ids);
  out.num_classes = max_id + 1;
  return out;
}

std::vector<Eigen::Index> MultiViewDataset::feature_counts() const {
  std::vector<Eigen::Index> out;
  for (const Matrix& v : views) out.push_back(v.cols());
  return out;
}

void MultiViewDataset::validate() const {
  if (views.empty()) fail(ErrorKind::ShapeMismatch, "dataset has no views");
  for (std::size_t d = 0; d < views.size(); ++d) {
    if (views[d].rows() != num_samples()) {
      fail(ErrorKind::ShapeMismatch, "view " + std::to_string(d + 1) + " has " +
                                         std::to_string(views[d].rows()) + " rows, labels have " +
                                         std::to_string(num_samples()));
    }
  }
  if (!signal_mask.empty()) {
    if (signal_mask.size() != views.size()) {
      fail(ErrorKind::ShapeMismatch, "signal mask view count differs from dataset");
    }
    for (std::size_t d = 0; d < views.size(); ++d) {
      if (static_cast<Eigen::Index>(signal_mask[d].size()) != views[d].cols()) {
        fail(ErrorKind::ShapeMismatch,
             "signal mask length differs from feature count in view " + std::to_string(d + 1));
      }
    }
  }
  if (!feature_names.empty()) {
    if (feature_names.size() != views.size()) {
      fail(ErrorKind::ShapeMismatch, "feature name view count differs from dataset");
    }
    for (std::size_t d = 0; d < views.size(); ++d) {
      if (!feature_names[d].empty() &&
          static_cast<Eigen::Index>(feature_names[d].size()) != views[d].cols()) {
        fail(ErrorKind::ShapeMismatch,
             "feature name count differs from feature count in view " + std::to_string(d + 1));
      }
    }
  }
}

MultiViewDataset MultiViewDataset::subset_rows(const std::vector<int>& rows) const {
  MultiViewDataset out;
  out.signal_mask = signal_mask;
  out.feature_names = feature_names;
  out.provenance = provenance;
  out.labels.num_classes = labels.num_classes;
  out.labels.ids.reserve(rows.size());
  for (int r : rows) {
    if (r < 0 || r >= num_samples()) fail(ErrorKind::InvalidInput, "row index out of range");
    out.labels.ids.push_back(labels.ids[static_cast<std::size_t>(r)]);
  }
  for (const Matrix& v : views) {
    Matrix sub(static_cast<Eigen::Index>(rows.size()), v.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = v.row(rows[i]);
    out.views.push_back(std::move(sub));
  }
  return out;
}

MultiViewDataset MultiViewDataset::select_features(
    const std::vector<std::vector<int>>& columns) const {
  if (columns.size() != views.size()) {
    fail(ErrorKind::ShapeMismatch, "feature selection view count differs from dataset");
  }
  MultiViewDataset out;
  out.labels = labels;
  out.provenance = provenance;
  for (std::size_t d = 0; d < views.size(); ++d) {
    const Matrix& v = views[d];
    Matrix sub(v.rows(), static_cast<Eigen::Index>(columns[d].size()));
    std::vector<bool> mask;
    std::vector<std::string> names;
    for (std::size_t c = 0; c < columns[d].size(); ++c) {
      const int col = columns[d][c];
      if (col < 0 || col >= v.cols()) {
        fail(ErrorKind::InvalidSelection, "feature index " + std::to_string(col) +
                                              " out of range in view " + std::to_string(d + 1));
      }
      sub.col(static_cast<Eigen::Index>(c)) = v.col(col);
      if (!signal_mask.empty()) mask.push_back(signal_mask[d][static_cast<std::size_t>(col)]);
      names.push_back(feature_name(d, col));
    }
    out.views.push_back(std::move(sub));
    if (!signal_mask.empty()) out.signal_mask.push_back(std::move(mask));
    out.feature_names.push_back(std::move(names));
  }
  return out;
}

std::string MultiViewDataset::feature_name(std::size_t view, Eigen::Index column) const {
  if (view < feature_names.size() && !feature_names[view].empty()) {
    return feature_names[view][static_cast<std::size_t>(column)];
  }
  return "f" + std::to_string(column + 1);
}

}  // namespace deepida
