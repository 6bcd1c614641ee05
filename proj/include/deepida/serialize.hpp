#pragma once

#include "deepida/trainer.hpp"

#include <string>

namespace deepida::serialize {

/// Bumped whenever the model document layout changes.
inline constexpr int kFormatVersion = 1;
inline constexpr const char* kFormatName = "deepida-model";

/// Model document: JSON with every double written in shortest round-trip
/// form, so deserialize(serialize(m)) reproduces m bit for bit.
std::string serialize(const trainer::TrainedDeepIda& model);

/// Throws ParseError on malformed documents or a format/version mismatch.
trainer::TrainedDeepIda deserialize(const std::string& text);

/// Throws IoError when the file cannot be written or read.
void save(const trainer::TrainedDeepIda& model, const std::string& path);
trainer::TrainedDeepIda load(const std::string& path);

}  // namespace deepida::serialize
