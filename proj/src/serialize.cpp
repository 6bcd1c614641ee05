#include "deepida/serialize.hpp"

#include "deepida/error.hpp"
#include "deepida/version.hpp"
#include "json_util.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace deepida::serialize {

using json_util::Json;
using json_util::matrix_from_json;
using json_util::matrix_to_json;
using json_util::vector_from_json;
using json_util::vector_to_json;

namespace {

Json layer_to_json(const net::Layer& layer) {
  Json j = Json::object();
  j["in_dim"] = layer.spec.in_dim;
  j["out_dim"] = layer.spec.out_dim;
  j["activation"] = layer.spec.activation == net::Activation::LeakyRelu ? "leaky_relu" : "identity";
  j["slope"] = layer.spec.slope;
  j["batch_norm"] = layer.spec.batch_norm;
  j["weight"] = matrix_to_json(layer.weight);
  j["bias"] = vector_to_json(layer.bias);
  if (layer.spec.batch_norm) {
    j["bn_scale"] = vector_to_json(layer.bn_scale);
    j["bn_shift"] = vector_to_json(layer.bn_shift);
    j["running_mean"] = vector_to_json(layer.running_mean);
    j["running_var"] = vector_to_json(layer.running_var);
  }
  return j;
}

net::Layer layer_from_json(const Json& j, const std::string& what) {
  net::Layer layer;
  layer.spec.in_dim = j.at("in_dim").get<Eigen::Index>();
  layer.spec.out_dim = j.at("out_dim").get<Eigen::Index>();
  const auto act = j.at("activation").get<std::string>();
  if (act == "leaky_relu") {
    layer.spec.activation = net::Activation::LeakyRelu;
  } else if (act == "identity") {
    layer.spec.activation = net::Activation::Identity;
  } else {
    fail(ErrorKind::ParseError, what + ": unknown activation " + act);
  }
  layer.spec.slope = j.at("slope").get<double>();
  layer.spec.batch_norm = j.at("batch_norm").get<bool>();
  layer.weight = matrix_from_json(j.at("weight"), what + ".weight");
  layer.bias = vector_from_json(j.at("bias"), what + ".bias");
  if (layer.spec.batch_norm) {
    layer.bn_scale = vector_from_json(j.at("bn_scale"), what + ".bn_scale");
    layer.bn_shift = vector_from_json(j.at("bn_shift"), what + ".bn_shift");
    layer.running_mean = vector_from_json(j.at("running_mean"), what + ".running_mean");
    layer.running_var = vector_from_json(j.at("running_var"), what + ".running_var");
  }
  const Eigen::Index out = layer.spec.out_dim;
  if (layer.weight.rows() != out || layer.weight.cols() != layer.spec.in_dim ||
      layer.bias.size() != out ||
      (layer.spec.batch_norm &&
       (layer.bn_scale.size() != out || layer.bn_shift.size() != out ||
        layer.running_mean.size() != out || layer.running_var.size() != out))) {
    fail(ErrorKind::ParseError, what + ": parameter shapes do not match the layer spec");
  }
  return layer;
}

Json model_to_json(const net::MlpModel& m) {
  Json j = Json::object();
  j["mode"] = m.mode == net::Mode::Eval ? "eval" : "train";
  j["bn_momentum"] = m.bn_momentum;
  j["bn_epsilon"] = m.bn_epsilon;
  j["revision"] = m.revision;
  Json layers = Json::array();
  for (const auto& layer : m.layers) layers.push_back(layer_to_json(layer));
  j["layers"] = std::move(layers);
  return j;
}

net::MlpModel model_from_json(const Json& j, const std::string& what) {
  net::MlpModel m;
  const auto mode = j.at("mode").get<std::string>();
  if (mode != "eval" && mode != "train") fail(ErrorKind::ParseError, what + ": unknown mode " + mode);
  m.mode = mode == "eval" ? net::Mode::Eval : net::Mode::Train;
  m.bn_momentum = j.at("bn_momentum").get<double>();
  m.bn_epsilon = j.at("bn_epsilon").get<double>();
  m.revision = j.at("revision").get<std::uint64_t>();
  const Json& layers = j.at("layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    m.layers.push_back(layer_from_json(layers[i], what + ".layers[" + std::to_string(i) + "]"));
  }
  try {
    net::validate_specs(m.specs());
  } catch (const Error& e) {
    fail(ErrorKind::ParseError, what + ": " + e.what());
  }
  return m;
}

Json doubles_to_json(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(x);
  return out;
}

std::vector<double> doubles_from_json(const Json& j) { return j.get<std::vector<double>>(); }

Json centroids_to_json(const classifier::CentroidSet& c) {
  Json j = Json::object();
  if (c.space.pooled()) {
    j["space"] = "pooled";
  } else {
    j["space"] = c.space.view + 1;
  }
  j["centroids"] = matrix_to_json(c.centroids);
  return j;
}

classifier::CentroidSet centroids_from_json(const Json& j, const std::string& what) {
  classifier::CentroidSet c;
  const Json& space = j.at("space");
  if (space.is_string()) {
    if (space.get<std::string>() != "pooled") fail(ErrorKind::ParseError, what + ": unknown space");
  } else {
    c.space.view = space.get<int>() - 1;
  }
  c.centroids = matrix_from_json(j.at("centroids"), what + ".centroids");
  return c;
}

void require_finite(const trainer::TrainedDeepIda& model) {
  auto finite = [](const std::vector<double>& v) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  };
  if (!finite(model.loss_history) || !finite(model.validation_history) ||
      !std::isfinite(model.final_loss) || !finite(model.projection.potential_trace) ||
      !finite(model.projection.eigen_sum_trace)) {
    fail(ErrorKind::NumericalFailure, "serialize: model holds non-finite values");
  }
}

}  // namespace

std::string serialize(const trainer::TrainedDeepIda& model) {
  require_finite(model);
  Json j = Json::object();
  j["format"] = kFormatName;
  j["format_version"] = kFormatVersion;
  j["deepida_version"] = kVersion;
  j["train"] = json_util::train_to_json(model.config);
  j["train"]["seed"] = model.config.seed;
  j["train"]["ida"] = json_util::ida_to_json(model.config.ida);
  j["ida"] = json_util::ida_to_json(model.ida);

  Json nets = Json::array();
  for (const auto& m : model.models) nets.push_back(model_to_json(m));
  j["networks"] = std::move(nets);

  const auto& p = model.projection;
  Json proj = Json::object();
  Json gammas = Json::array();
  Json lambdas = Json::array();
  Json whiteners = Json::array();
  for (const auto& g : p.gammas) gammas.push_back(matrix_to_json(g));
  for (const auto& l : p.lambdas) lambdas.push_back(vector_to_json(l));
  for (const auto& w : p.whiteners) whiteners.push_back(matrix_to_json(w));
  proj["gammas"] = std::move(gammas);
  proj["lambdas"] = std::move(lambdas);
  proj["whiteners"] = std::move(whiteners);
  proj["converged"] = p.converged;
  proj["iterations"] = p.iterations;
  proj["degenerate"] = p.degenerate;
  proj["potential_trace"] = doubles_to_json(p.potential_trace);
  proj["eigen_sum_trace"] = doubles_to_json(p.eigen_sum_trace);
  j["projection"] = std::move(proj);

  j["pooled"] = centroids_to_json(model.pooled);
  Json per_view = Json::array();
  for (const auto& c : model.per_view) per_view.push_back(centroids_to_json(c));
  j["per_view"] = std::move(per_view);

  j["loss_history"] = doubles_to_json(model.loss_history);
  j["validation_history"] = doubles_to_json(model.validation_history);
  j["selected_epoch"] = model.selected_epoch;
  j["final_loss"] = model.final_loss;
  j["optimizer_steps"] = model.optimizer_steps;

  Json scores = Json::array();
  for (const auto& s : model.train_scores) scores.push_back(matrix_to_json(s));
  j["train_scores"] = std::move(scores);
  j["kept_features"] = model.kept_features;
  j["source_dims"] = model.source_dims;
  return j.dump(1) + "\n";
}

trainer::TrainedDeepIda deserialize(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::ParseError, std::string("model file: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != kFormatName) {
      fail(ErrorKind::ParseError, "model file: not a deepida model document");
    }
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) {
      fail(ErrorKind::ParseError, "model file: format version " + std::to_string(version) +
                                      " is not supported (expected " +
                                      std::to_string(kFormatVersion) + ")");
    }
    trainer::TrainedDeepIda m;
    Json train = j.at("train");
    m.config.seed = train.at("seed").get<std::uint64_t>();
    json_util::apply_ida(train.at("ida"), m.config.ida, "train.ida");
    train.erase("seed");
    train.erase("ida");
    json_util::apply_train(train, m.config, "train");
    json_util::apply_ida(j.at("ida"), m.ida, "ida");

    const Json& nets = j.at("networks");
    for (std::size_t d = 0; d < nets.size(); ++d) {
      m.models.push_back(model_from_json(nets[d], "networks[" + std::to_string(d) + "]"));
    }

    const Json& proj = j.at("projection");
    for (const Json& g : proj.at("gammas")) m.projection.gammas.push_back(matrix_from_json(g, "gamma"));
    for (const Json& l : proj.at("lambdas")) m.projection.lambdas.push_back(vector_from_json(l, "lambda"));
    for (const Json& w : proj.at("whiteners")) {
      m.projection.whiteners.push_back(matrix_from_json(w, "whitener"));
    }
    m.projection.converged = proj.at("converged").get<bool>();
    m.projection.iterations = proj.at("iterations").get<int>();
    m.projection.degenerate = proj.at("degenerate").get<bool>();
    m.projection.potential_trace = doubles_from_json(proj.at("potential_trace"));
    m.projection.eigen_sum_trace = doubles_from_json(proj.at("eigen_sum_trace"));

    m.pooled = centroids_from_json(j.at("pooled"), "pooled");
    for (const Json& c : j.at("per_view")) m.per_view.push_back(centroids_from_json(c, "per_view"));

    m.loss_history = doubles_from_json(j.at("loss_history"));
    m.validation_history = doubles_from_json(j.at("validation_history"));
    m.selected_epoch = j.at("selected_epoch").get<int>();
    m.final_loss = j.at("final_loss").get<double>();
    m.optimizer_steps = j.at("optimizer_steps").get<std::int64_t>();
    for (const Json& s : j.at("train_scores")) m.train_scores.push_back(matrix_from_json(s, "train_scores"));
    m.kept_features = j.at("kept_features").get<std::vector<std::vector<int>>>();
    m.source_dims = j.at("source_dims").get<std::vector<Eigen::Index>>();

    const std::size_t views = m.models.size();
    if (views < 2 || m.projection.gammas.size() != views || m.projection.whiteners.size() != views ||
        m.projection.lambdas.size() != views || m.per_view.size() != views) {
      fail(ErrorKind::ParseError, "model file: per-view sections disagree on the view count");
    }
    for (std::size_t d = 0; d < views; ++d) {
      const Eigen::Index o = m.models[d].output_dim();
      if (m.projection.whiteners[d].rows() != o || m.projection.whiteners[d].cols() != o ||
          m.projection.gammas[d].rows() != o || m.projection.gammas[d].cols() != m.ida.l) {
        fail(ErrorKind::ParseError,
             "model file: projection of view " + std::to_string(d + 1) + " does not match its network");
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ParseError, std::string("model file: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ParseError) throw;
    fail(ErrorKind::ParseError, std::string("model file: ") + e.what());
  }
}

void save(const trainer::TrainedDeepIda& model, const std::string& path) {
  const std::string text = serialize(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::IoError, "cannot write model file " + path);
  out << text;
  if (!out) fail(ErrorKind::IoError, "failed writing model file " + path);
}

trainer::TrainedDeepIda load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open model file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize(buf.str());
  } catch (const Error& e) {
    fail(e.kind(), path + ": " + e.what());
  }
}

}  // namespace deepida::serialize
