#include "deepida/config.hpp"

#include "deepida/error.hpp"
#include "json_util.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace deepida {

namespace json_util {

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
  fail(ErrorKind::InvalidConfig, path + ": " + msg);
}

void require_object(const Json& j, const std::string& path, const std::set<std::string>& keys) {
  if (!j.is_object()) bad(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (!keys.count(key)) bad(path.empty() ? key : path + "." + key, "unknown key");
  }
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

double get_number(const Json& j, const std::string& path) {
  if (!j.is_number()) bad(path, "expected a number");
  return j.get<double>();
}

long long get_integer(const Json& j, const std::string& path) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  return j.get<long long>();
}

bool get_bool(const Json& j, const std::string& path) {
  if (!j.is_boolean()) bad(path, "expected true or false");
  return j.get<bool>();
}

std::string get_string(const Json& j, const std::string& path) {
  if (!j.is_string()) bad(path, "expected a string");
  return j.get<std::string>();
}

config::DataPaths paths_from_json(const Json& j, const std::string& path) {
  require_object(j, path, {"views", "labels"});
  config::DataPaths out;
  if (j.contains("views")) {
    if (!j["views"].is_array()) bad(join(path, "views"), "expected a list of file names");
    for (const Json& v : j["views"]) out.views.push_back(get_string(v, join(path, "views")));
  }
  if (j.contains("labels")) out.labels = get_string(j["labels"], join(path, "labels"));
  return out;
}

Json paths_to_json(const config::DataPaths& p) {
  Json j = Json::object();
  j["views"] = p.views;
  j["labels"] = p.labels;
  return j;
}

}  // namespace

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

Matrix matrix_from_json(const Json& j, const std::string& what) {
  if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
    fail(ErrorKind::ParseError, what + ": malformed matrix");
  }
  const auto rows = j["rows"].get<Eigen::Index>();
  const auto cols = j["cols"].get<Eigen::Index>();
  const Json& data = j["data"];
  if (rows < 0 || cols < 0 || !data.is_array() || static_cast<Eigen::Index>(data.size()) != rows) {
    fail(ErrorKind::ParseError, what + ": matrix shape does not match its data");
  }
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = data[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      fail(ErrorKind::ParseError, what + ": ragged matrix row " + std::to_string(r + 1));
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) fail(ErrorKind::ParseError, what + ": expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Json ida_to_json(const objective::IdaConfig& c) {
  Json j = Json::object();
  j["rho"] = c.rho;
  if (c.l == 0) {
    j["l"] = "auto";
  } else {
    j["l"] = c.l;
  }
  j["ridge"] = c.ridge;
  j["eps_gamma"] = c.eps_gamma;
  j["max_gamma_iters"] = c.max_gamma_iters;
  j["centering"] =
      c.centering == linalg::Centering::SampleMean ? "sample_mean" : "class_mean_average";
  return j;
}

Json train_to_json(const trainer::TrainConfig& c) {
  Json j = Json::object();
  j["epochs"] = c.epochs;
  if (c.batch_size == 0) {
    j["batch_size"] = "full";
  } else {
    j["batch_size"] = c.batch_size;
  }
  j["learning_rate"] = c.adam.learning_rate;
  j["beta1"] = c.adam.beta1;
  j["beta2"] = c.adam.beta2;
  j["adam_epsilon"] = c.adam.epsilon;
  j["validation"] = c.validation == trainer::Validation::None ? "none" : "best_epoch";
  return j;
}

Json shape_to_json(const trainer::NetworkShape& s) {
  Json j = Json::object();
  j["hidden"] = s.hidden;
  j["output"] = s.output;
  j["slope"] = s.slope;
  j["batch_norm"] = s.batch_norm;
  return j;
}

Json run_config_to_json(const config::RunConfig& c) {
  Json j = Json::object();
  j["seed"] = c.seed;
  j["train"] = train_to_json(c.train);
  j["ida"] = ida_to_json(c.train.ida);
  Json nets = Json::array();
  for (const auto& s : c.networks) nets.push_back(shape_to_json(s));
  j["network"] = std::move(nets);
  Json r = Json::object();
  r["pairs"] = c.ranking.pairs;
  r["feature_fraction"] = c.ranking.feature_fraction;
  r["permutations_per_feature"] = c.ranking.permutations_per_feature;
  if (c.retrain_top) {
    r["retrain_top"] = config::format_selection(*c.retrain_top);
  } else {
    r["retrain_top"] = nullptr;
  }
  j["ranking"] = std::move(r);
  Json d = Json::object();
  d["train"] = paths_to_json(c.train_data);
  d["valid"] = paths_to_json(c.valid_data);
  d["test"] = paths_to_json(c.test_data);
  j["data"] = std::move(d);
  return j;
}

void apply_ida(const Json& j, objective::IdaConfig& c, const std::string& path) {
  require_object(j, path,
                 {"rho", "l", "ridge", "eps_gamma", "max_gamma_iters", "centering"});
  if (j.contains("rho")) c.rho = get_number(j["rho"], join(path, "rho"));
  if (j.contains("l")) {
    const Json& l = j["l"];
    if (l.is_string() && l.get<std::string>() == "auto") {
      c.l = 0;
    } else {
      c.l = static_cast<int>(get_integer(l, join(path, "l")));
      if (c.l < 1) bad(join(path, "l"), "must be positive or \"auto\"");
    }
  }
  if (j.contains("ridge")) c.ridge = get_number(j["ridge"], join(path, "ridge"));
  if (j.contains("eps_gamma")) c.eps_gamma = get_number(j["eps_gamma"], join(path, "eps_gamma"));
  if (j.contains("max_gamma_iters")) {
    c.max_gamma_iters = static_cast<int>(get_integer(j["max_gamma_iters"], join(path, "max_gamma_iters")));
  }
  if (j.contains("centering")) {
    const std::string v = get_string(j["centering"], join(path, "centering"));
    if (v == "sample_mean") {
      c.centering = linalg::Centering::SampleMean;
    } else if (v == "class_mean_average") {
      c.centering = linalg::Centering::ClassMeanAverage;
    } else {
      bad(join(path, "centering"), "expected \"sample_mean\" or \"class_mean_average\"");
    }
  }
}

void apply_train(const Json& j, trainer::TrainConfig& c, const std::string& path) {
  require_object(j, path,
                 {"epochs", "batch_size", "learning_rate", "beta1", "beta2", "adam_epsilon",
                  "validation"});
  if (j.contains("epochs")) c.epochs = static_cast<int>(get_integer(j["epochs"], join(path, "epochs")));
  if (j.contains("batch_size")) {
    const Json& b = j["batch_size"];
    if (b.is_string() && b.get<std::string>() == "full") {
      c.batch_size = 0;
    } else {
      c.batch_size = static_cast<int>(get_integer(b, join(path, "batch_size")));
      if (c.batch_size < 1) bad(join(path, "batch_size"), "must be positive or \"full\"");
    }
  }
  if (j.contains("learning_rate")) {
    c.adam.learning_rate = get_number(j["learning_rate"], join(path, "learning_rate"));
  }
  if (j.contains("beta1")) c.adam.beta1 = get_number(j["beta1"], join(path, "beta1"));
  if (j.contains("beta2")) c.adam.beta2 = get_number(j["beta2"], join(path, "beta2"));
  if (j.contains("adam_epsilon")) c.adam.epsilon = get_number(j["adam_epsilon"], join(path, "adam_epsilon"));
  if (j.contains("validation")) {
    const std::string v = get_string(j["validation"], join(path, "validation"));
    if (v == "none") {
      c.validation = trainer::Validation::None;
    } else if (v == "best_epoch") {
      c.validation = trainer::Validation::BestEpoch;
    } else {
      bad(join(path, "validation"), "expected \"none\" or \"best_epoch\"");
    }
  }
}

trainer::NetworkShape shape_from_json(const Json& j, const std::string& path) {
  require_object(j, path, {"hidden", "output", "slope", "batch_norm"});
  trainer::NetworkShape s;
  if (j.contains("hidden")) {
    if (!j["hidden"].is_array()) bad(join(path, "hidden"), "expected a list of widths");
    s.hidden.clear();
    for (const Json& w : j["hidden"]) {
      const auto width = get_integer(w, join(path, "hidden"));
      if (width < 1) bad(join(path, "hidden"), "widths must be positive");
      s.hidden.push_back(static_cast<Eigen::Index>(width));
    }
  }
  if (j.contains("output")) {
    s.output = static_cast<Eigen::Index>(get_integer(j["output"], join(path, "output")));
    if (s.output < 1) bad(join(path, "output"), "must be positive");
  }
  if (j.contains("slope")) s.slope = get_number(j["slope"], join(path, "slope"));
  if (j.contains("batch_norm")) s.batch_norm = get_bool(j["batch_norm"], join(path, "batch_norm"));
  return s;
}

void apply_run_config(const Json& j, config::RunConfig& c) {
  require_object(j, "", {"seed", "train", "ida", "network", "ranking", "data"});
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) bad("seed", "expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("train")) apply_train(j["train"], c.train, "train");
  if (j.contains("ida")) apply_ida(j["ida"], c.train.ida, "ida");
  if (j.contains("network")) {
    const Json& n = j["network"];
    c.networks.clear();
    if (n.is_object()) {
      c.networks.push_back(shape_from_json(n, "network"));
    } else if (n.is_array() && !n.empty()) {
      for (std::size_t i = 0; i < n.size(); ++i) {
        c.networks.push_back(shape_from_json(n[i], "network[" + std::to_string(i) + "]"));
      }
    } else {
      bad("network", "expected an object or a non-empty list of objects");
    }
  }
  if (j.contains("ranking")) {
    const Json& r = j["ranking"];
    require_object(r, "ranking", {"pairs", "feature_fraction", "permutations_per_feature", "retrain_top"});
    if (r.contains("pairs")) c.ranking.pairs = static_cast<int>(get_integer(r["pairs"], "ranking.pairs"));
    if (r.contains("feature_fraction")) {
      c.ranking.feature_fraction = get_number(r["feature_fraction"], "ranking.feature_fraction");
    }
    if (r.contains("permutations_per_feature")) {
      c.ranking.permutations_per_feature = static_cast<int>(
          get_integer(r["permutations_per_feature"], "ranking.permutations_per_feature"));
    }
    if (r.contains("retrain_top")) {
      const Json& t = r["retrain_top"];
      if (t.is_null()) {
        c.retrain_top.reset();
      } else if (t.is_number_integer()) {
        c.retrain_top = config::parse_selection(std::to_string(t.get<long long>()));
      } else {
        c.retrain_top = config::parse_selection(get_string(t, "ranking.retrain_top"));
      }
    }
  }
  if (j.contains("data")) {
    const Json& d = j["data"];
    require_object(d, "data", {"train", "valid", "test"});
    if (d.contains("train")) c.train_data = paths_from_json(d["train"], "data.train");
    if (d.contains("valid")) c.valid_data = paths_from_json(d["valid"], "data.valid");
    if (d.contains("test")) c.test_data = paths_from_json(d["test"], "data.test");
  }
}

}  // namespace json_util

namespace config {

void RunConfig::sync_seed() {
  train.seed = seed;
  ranking.seed = seed;
}

void RunConfig::validate() const {
  train.validate();
  ranking.validate();
  if (networks.empty()) fail(ErrorKind::InvalidConfig, "network: at least one shape is required");
  for (const auto& s : networks) {
    if (!(s.slope > 0.0 && s.slope < 1.0)) fail(ErrorKind::InvalidConfig, "network.slope must lie in (0, 1)");
  }
}

RunConfig parse_config(const std::string& text) {
  json_util::Json j;
  try {
    j = json_util::Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::ParseError, std::string("config: ") + e.what());
  }
  RunConfig c;
  json_util::apply_run_config(j, c);
  c.sync_seed();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const Error& e) {
    fail(e.kind(), path + ": " + e.what());
  }
}

std::string effective_config(const RunConfig& config) {
  return json_util::run_config_to_json(config).dump(2);
}

ranking::Selection parse_selection(const std::string& text) {
  std::string body = text;
  ranking::Selection s;
  if (!body.empty() && body.back() == '%') {
    s.kind = ranking::Selection::Kind::Percent;
    body.pop_back();
  }
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(body, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (body.empty() || used != body.size() || !std::isfinite(value)) {
    fail(ErrorKind::InvalidSelection, "cannot read selection \"" + text + "\" (use N or N%)");
  }
  s.value = value;
  if (!(value > 0.0)) fail(ErrorKind::InvalidSelection, "selection size must be positive");
  if (s.kind == ranking::Selection::Kind::Count && value != std::floor(value)) {
    fail(ErrorKind::InvalidSelection, "feature count must be an integer");
  }
  return s;
}

std::string format_selection(const ranking::Selection& selection) {
  std::ostringstream out;
  out << selection.value;
  if (selection.kind == ranking::Selection::Kind::Percent) out << '%';
  return out.str();
}

}  // namespace config

}  // namespace deepida
