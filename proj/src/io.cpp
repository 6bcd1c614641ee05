#include "deepida/io.hpp"

#include "deepida/error.hpp"
#include "deepida/version.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace deepida::io {

namespace {

std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

/// Line reader that skips leading '#' lines and tracks 1-based line numbers.
class CsvReader {
 public:
  explicit CsvReader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) fail(ErrorKind::IoError, "cannot open " + path);
  }

  bool next(std::string& line) {
    while (std::getline(in_, line)) {
      ++line_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!seen_data_ && !line.empty() && line.front() == '#') continue;
      seen_data_ = true;
      if (trim(line).empty()) {
        if (trailing_blank_ok()) return false;
        fail(ErrorKind::ParseError, where(path_, line_) + ": empty line");
      }
      return true;
    }
    return false;
  }

  std::size_t line() const { return line_; }
  const std::string& path() const { return path_; }

 private:
  bool trailing_blank_ok() {
    std::string rest;
    while (std::getline(in_, rest)) {
      ++line_;
      if (!trim(rest).empty()) {
        fail(ErrorKind::ParseError, where(path_, line_ - 1) + ": empty line");
      }
    }
    return true;
  }

  std::string path_;
  std::ifstream in_;
  std::size_t line_ = 0;
  bool seen_data_ = false;
};

double parse_double(std::string_view field, const CsvReader& reader, std::size_t column) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() ||
      !std::isfinite(value)) {
    fail(ErrorKind::ParseError, where(reader.path(), reader.line()) + ": column " +
                                    std::to_string(column) + ": cannot read \"" +
                                    std::string(field) + "\" as a finite number");
  }
  return value;
}

long long parse_integer(std::string_view field, const CsvReader& reader) {
  field = trim(field);
  long long value = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    fail(ErrorKind::ParseError, where(reader.path(), reader.line()) + ": cannot read \"" +
                                    std::string(field) + "\" as an integer");
  }
  return value;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path);
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) fail(ErrorKind::IoError, "failed writing " + path);
}

void check_name(const std::string& name, const std::string& path) {
  if (name.empty() || name.find_first_of(",\n\r\"") != std::string::npos || name.front() == '#') {
    fail(ErrorKind::InvalidInput, path + ": feature name \"" + name +
                                      "\" must be non-empty, must not start with '#' and must not "
                                      "contain commas, quotes or line breaks");
  }
}

}  // namespace

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) fail(ErrorKind::InvalidInput, "format_double: conversion failed");
  return std::string(buf, ptr);
}

std::string stamp(const std::string& kind) {
  return std::string("# deepida ") + kVersion + " " + kind;
}

ViewTable read_view_csv(const std::string& path) {
  CsvReader reader(path);
  std::string line;
  if (!reader.next(line)) fail(ErrorKind::ParseError, path + ": missing header row");
  ViewTable table;
  for (std::string_view name : split(line)) table.names.emplace_back(trim(name));
  const std::size_t p = table.names.size();
  for (const auto& name : table.names) {
    if (name.empty()) fail(ErrorKind::ParseError, where(path, reader.line()) + ": empty feature name");
  }

  std::vector<double> values;
  Eigen::Index rows = 0;
  while (reader.next(line)) {
    const auto fields = split(line);
    if (fields.size() != p) {
      fail(ErrorKind::ParseError, where(path, reader.line()) + ": expected " + std::to_string(p) +
                                      " fields, found " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < p; ++c) values.push_back(parse_double(fields[c], reader, c + 1));
    ++rows;
  }
  table.values.resize(rows, static_cast<Eigen::Index>(p));
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(p); ++c) {
      table.values(r, c) = values[static_cast<std::size_t>(r) * p + static_cast<std::size_t>(c)];
    }
  }
  return table;
}

void write_view_csv(const std::string& path, const Matrix& values,
                    const std::vector<std::string>& names) {
  if (static_cast<Eigen::Index>(names.size()) != values.cols()) {
    fail(ErrorKind::ShapeMismatch, path + ": " + std::to_string(names.size()) + " names for " +
                                       std::to_string(values.cols()) + " columns");
  }
  for (const auto& name : names) check_name(name, path);
  std::ofstream out = open_out(path);
  out << stamp("view") << '\n';
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << '\n';
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) out << ',';
      out << format_double(values(r, c));
    }
    out << '\n';
  }
  finish(out, path);
}

Labels read_labels_csv(const std::string& path) {
  CsvReader reader(path);
  std::string line;
  if (!reader.next(line)) fail(ErrorKind::ParseError, path + ": missing header row");
  if (trim(line) != "label") {
    fail(ErrorKind::ParseError, where(path, reader.line()) + ": header must be \"label\"");
  }
  std::vector<int> ids;
  while (reader.next(line)) {
    const long long id = parse_integer(line, reader);
    if (id < 1 || id > 1'000'000) {
      fail(ErrorKind::ParseError, where(path, reader.line()) + ": class ids must be 1..K, got " +
                                      std::to_string(id));
    }
    ids.push_back(static_cast<int>(id - 1));
  }
  if (ids.empty()) fail(ErrorKind::ParseError, path + ": no labels");
  return Labels::from_ids(std::move(ids));
}

void write_labels_csv(const std::string& path, const Labels& labels) {
  std::ofstream out = open_out(path);
  out << stamp("labels") << "\nlabel\n";
  for (int id : labels.ids) out << id + 1 << '\n';
  finish(out, path);
}

void write_mask_csv(const std::string& path, const std::vector<bool>& mask,
                    const std::vector<std::string>& names) {
  if (names.size() != mask.size()) fail(ErrorKind::ShapeMismatch, path + ": mask and names differ in length");
  std::ofstream out = open_out(path);
  out << stamp("mask") << "\nfeature,signal\n";
  for (std::size_t i = 0; i < mask.size(); ++i) out << names[i] << ',' << (mask[i] ? 1 : 0) << '\n';
  finish(out, path);
}

std::vector<bool> read_mask_csv(const std::string& path) {
  CsvReader reader(path);
  std::string line;
  if (!reader.next(line) || trim(line) != "feature,signal") {
    fail(ErrorKind::ParseError, path + ": header must be \"feature,signal\"");
  }
  std::vector<bool> mask;
  while (reader.next(line)) {
    const auto fields = split(line);
    if (fields.size() != 2) fail(ErrorKind::ParseError, where(path, reader.line()) + ": expected 2 fields");
    const long long flag = parse_integer(fields[1], reader);
    if (flag != 0 && flag != 1) fail(ErrorKind::ParseError, where(path, reader.line()) + ": signal must be 0 or 1");
    mask.push_back(flag == 1);
  }
  return mask;
}

MultiViewDataset load_dataset(const std::vector<std::string>& view_paths,
                              const std::string& labels_path) {
  if (view_paths.size() < 2) fail(ErrorKind::InvalidInput, "at least two view files are required");
  if (labels_path.empty()) fail(ErrorKind::InvalidInput, "a labels file is required");
  MultiViewDataset data;
  for (std::size_t d = 0; d < view_paths.size(); ++d) {
    if (!std::filesystem::exists(view_paths[d])) {
      fail(ErrorKind::IoError, "view " + std::to_string(d + 1) + ": file not found: " + view_paths[d]);
    }
    ViewTable table = read_view_csv(view_paths[d]);
    data.views.push_back(std::move(table.values));
    data.feature_names.push_back(std::move(table.names));
  }
  data.labels = read_labels_csv(labels_path);
  for (std::size_t d = 0; d < data.views.size(); ++d) {
    if (data.views[d].rows() != data.num_samples()) {
      fail(ErrorKind::ShapeMismatch, "view " + std::to_string(d + 1) + " (" + view_paths[d] +
                                         ") has " + std::to_string(data.views[d].rows()) +
                                         " rows but the labels file has " +
                                         std::to_string(data.num_samples()));
    }
  }
  data.validate();
  return data;
}

std::vector<std::string> save_dataset(const MultiViewDataset& data, const std::string& dir) {
  data.validate();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create directory " + dir + ": " + ec.message());
  const std::filesystem::path base(dir);
  std::vector<std::string> paths;
  for (std::size_t d = 0; d < data.num_views(); ++d) {
    std::vector<std::string> names;
    for (Eigen::Index c = 0; c < data.views[d].cols(); ++c) names.push_back(data.feature_name(d, c));
    const std::string view_path = (base / ("view" + std::to_string(d + 1) + ".csv")).string();
    write_view_csv(view_path, data.views[d], names);
    paths.push_back(view_path);
    if (!data.signal_mask.empty()) {
      write_mask_csv((base / ("mask" + std::to_string(d + 1) + ".csv")).string(), data.signal_mask[d],
                     names);
    }
  }
  write_labels_csv((base / "labels.csv").string(), data.labels);
  return paths;
}

void write_ranking_csv(const std::string& path, const ranking::RankingReport& report,
                       const MultiViewDataset& data) {
  std::ofstream out = open_out(path);
  out << stamp("ranking") << "\nview,feature,name,flagged,drawn,proportion,rank\n";
  for (std::size_t d = 0; d < report.views.size(); ++d) {
    const auto& stats = report.views[d];
    std::vector<int> rows = report.order[d];
    std::vector<bool> listed(stats.size(), false);
    for (int f : rows) listed[static_cast<std::size_t>(f)] = true;
    for (std::size_t f = 0; f < stats.size(); ++f) {
      if (!listed[f]) rows.push_back(static_cast<int>(f));
    }
    for (int f : rows) {
      const auto& s = stats[static_cast<std::size_t>(f)];
      out << d + 1 << ',' << f + 1 << ',' << data.feature_name(d, f) << ',' << s.flagged << ','
          << s.drawn << ',' << format_double(s.proportion) << ',' << s.rank << '\n';
    }
  }
  finish(out, path);
}

void write_predictions_csv(const std::string& path, const std::vector<int>& pooled,
                           const std::vector<std::vector<int>>& per_view,
                           const std::vector<Matrix>& scores) {
  for (const auto& v : per_view) {
    if (v.size() != pooled.size()) fail(ErrorKind::ShapeMismatch, path + ": prediction lengths differ");
  }
  for (const auto& s : scores) {
    if (static_cast<std::size_t>(s.rows()) != pooled.size()) {
      fail(ErrorKind::ShapeMismatch, path + ": score rows differ from predictions");
    }
  }
  std::ofstream out = open_out(path);
  out << stamp("predictions") << "\nsample,predicted";
  for (std::size_t d = 0; d < per_view.size(); ++d) out << ",predicted_view" << d + 1;
  for (std::size_t d = 0; d < scores.size(); ++d) {
    for (Eigen::Index r = 0; r < scores[d].cols(); ++r) out << ",view" << d + 1 << "_score" << r + 1;
  }
  out << '\n';
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    out << i + 1 << ',' << pooled[i] + 1;
    for (const auto& v : per_view) out << ',' << v[i] + 1;
    for (const auto& s : scores) {
      for (Eigen::Index r = 0; r < s.cols(); ++r) {
        out << ',' << format_double(s(static_cast<Eigen::Index>(i), r));
      }
    }
    out << '\n';
  }
  finish(out, path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  finish(out, path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace deepida::io
