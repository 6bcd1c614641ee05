#pragma once

#include "deepida/ranking.hpp"
#include "deepida/trainer.hpp"

#include <optional>
#include <string>
#include <vector>

namespace deepida::config {

struct DataPaths {
  std::vector<std::string> views;
  std::string labels;

  bool empty() const { return views.empty() && labels.empty(); }
  bool operator==(const DataPaths&) const = default;
};

/// Everything a run needs. Loaded from a JSON document layered over the
/// defaults; command-line flags are applied on top by the caller.
struct RunConfig {
  std::uint64_t seed = 1;
  trainer::TrainConfig train;
  std::vector<trainer::NetworkShape> networks = {trainer::NetworkShape{}};
  ranking::RankingConfig ranking;
  std::optional<ranking::Selection> retrain_top;
  DataPaths train_data;
  DataPaths valid_data;
  DataPaths test_data;

  /// Copies the shared seed into the train and ranking sections.
  void sync_seed();
  /// Throws InvalidConfig.
  void validate() const;
};

/// Throws InvalidConfig on unknown keys or wrong types, ParseError on
/// malformed JSON.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Effective configuration as pretty-printed JSON. Runtime-only settings
/// (worker count) are omitted so runs differing only in those produce
/// identical output.
std::string effective_config(const RunConfig& config);

/// "20" keeps 20 features, "10%" keeps ceil(10% of p).
ranking::Selection parse_selection(const std::string& text);
std::string format_selection(const ranking::Selection& selection);

}  // namespace deepida::config
