#pragma once

#include "deepida/dataset.hpp"
#include "deepida/ranking.hpp"
#include "deepida/types.hpp"

#include <string>
#include <vector>

namespace deepida::io {

/// Shortest text that parses back to exactly x.
std::string format_double(double x);

/// "# deepida <version> <kind>", the first line of every file we write.
std::string stamp(const std::string& kind);

struct ViewTable {
  std::vector<std::string> names;
  Matrix values;  // rows are samples
};

/// Header of feature names, then one row of numbers per sample. Leading
/// lines starting with '#' are skipped. Throws IoError or ParseError
/// ("path:line: ...").
ViewTable read_view_csv(const std::string& path);
void write_view_csv(const std::string& path, const Matrix& values,
                    const std::vector<std::string>& names);

/// Header "label", then one class id in 1..K per row.
Labels read_labels_csv(const std::string& path);
void write_labels_csv(const std::string& path, const Labels& labels);

/// Header "feature,signal", then one "name,0|1" row per feature.
void write_mask_csv(const std::string& path, const std::vector<bool>& mask,
                    const std::vector<std::string>& names);
std::vector<bool> read_mask_csv(const std::string& path);

/// Reads every view and the labels. Throws IoError naming a missing view
/// file and ShapeMismatch naming a view whose row count differs.
MultiViewDataset load_dataset(const std::vector<std::string>& view_paths,
                              const std::string& labels_path);

/// Writes view<d>.csv, labels.csv and, when masks are present,
/// mask<d>.csv into dir (created if missing). Returns the view paths.
std::vector<std::string> save_dataset(const MultiViewDataset& data, const std::string& dir);

/// Header "view,feature,name,flagged,drawn,proportion,rank"; rows grouped by
/// view in ranking order, never-drawn features last by index.
void write_ranking_csv(const std::string& path, const ranking::RankingReport& report,
                       const MultiViewDataset& data);

/// Header "sample,predicted,predicted_view1..D,view<d>_score<r>...". Classes
/// are written 1-based.
void write_predictions_csv(const std::string& path, const std::vector<int>& pooled,
                           const std::vector<std::vector<int>>& per_view,
                           const std::vector<Matrix>& scores);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace deepida::io
