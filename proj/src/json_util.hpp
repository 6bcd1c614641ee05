#pragma once

// Internal JSON helpers shared by the config and model-file code.

#include "deepida/config.hpp"
#include "deepida/types.hpp"

#include <json.hpp>

#include <string>

namespace deepida::json_util {

using Json = nlohmann::ordered_json;

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const std::string& what);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j, const std::string& what);

Json ida_to_json(const objective::IdaConfig& c);
Json train_to_json(const trainer::TrainConfig& c);
Json shape_to_json(const trainer::NetworkShape& s);
Json run_config_to_json(const config::RunConfig& c);

/// Overlays j onto c, rejecting unknown keys. `path` prefixes error messages.
void apply_ida(const Json& j, objective::IdaConfig& c, const std::string& path);
void apply_train(const Json& j, trainer::TrainConfig& c, const std::string& path);
trainer::NetworkShape shape_from_json(const Json& j, const std::string& path);
void apply_run_config(const Json& j, config::RunConfig& c);

}  // namespace deepida::json_util
