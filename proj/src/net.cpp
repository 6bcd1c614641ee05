#include "deepida/net.hpp"

#include "deepida/error.hpp"
#include "deepida/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace deepida::net {

namespace {

std::string layer_name(std::size_t i) { return "layer " + std::to_string(i + 1); }

Matrix activate(const Matrix& pre, const LayerSpec& spec) {
  if (spec.activation == Activation::Identity) return pre;
  const double slope = spec.slope;
  return pre.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

Matrix activation_grad(const Matrix& pre, const Matrix& upstream, const LayerSpec& spec) {
  if (spec.activation == Activation::Identity) return upstream;
  const double slope = spec.slope;
  return upstream.binaryExpr(pre, [slope](double g, double v) { return v > 0.0 ? g : slope * g; });
}

void require_same_shape(const Matrix& a, const Matrix& b, const std::string& what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::ShapeMismatch, what + ": shape mismatch");
  }
}

void require_same_shape(const Vector& a, const Vector& b, const std::string& what) {
  if (a.size() != b.size()) fail(ErrorKind::ShapeMismatch, what + ": shape mismatch");
}

LayerGrads zeros_like(const Layer& layer) {
  LayerGrads g;
  g.weight = Matrix::Zero(layer.weight.rows(), layer.weight.cols());
  g.bias = Vector::Zero(layer.bias.size());
  g.bn_scale = Vector::Zero(layer.bn_scale.size());
  g.bn_shift = Vector::Zero(layer.bn_shift.size());
  return g;
}

}  // namespace

std::vector<LayerSpec> MlpModel::specs() const {
  std::vector<LayerSpec> out;
  out.reserve(layers.size());
  for (const Layer& l : layers) out.push_back(l.spec);
  return out;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t count = 0;
  for (const Layer& l : layers) {
    count += static_cast<std::size_t>(l.weight.size() + l.bias.size() + l.bn_scale.size() +
                                      l.bn_shift.size());
  }
  return count;
}

void validate_specs(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) fail(ErrorKind::InvalidSpec, "network has no layers");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const LayerSpec& s = specs[i];
    if (s.in_dim < 1 || s.out_dim < 1) {
      fail(ErrorKind::InvalidSpec, layer_name(i) + ": dimensions must be positive");
    }
    if (s.activation == Activation::LeakyRelu && !(s.slope > 0.0 && s.slope < 1.0)) {
      fail(ErrorKind::InvalidSpec, layer_name(i) + ": leaky slope must lie in (0, 1)");
    }
    if (i > 0 && specs[i - 1].out_dim != s.in_dim) {
      fail(ErrorKind::InvalidSpec, layer_name(i) + ": input width " + std::to_string(s.in_dim) +
                                       " does not match previous output width " +
                                       std::to_string(specs[i - 1].out_dim));
    }
  }
}

MlpModel init_model(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  validate_specs(specs);
  Rng rng(seed);
  MlpModel model;
  for (const LayerSpec& s : specs) {
    Layer layer;
    layer.spec = s;
    const double bound = std::sqrt(6.0 / static_cast<double>(s.in_dim));
    layer.weight = uniform(s.out_dim, s.in_dim, -bound, bound, rng);
    layer.bias = Vector::Zero(s.out_dim);
    if (s.batch_norm) {
      layer.bn_scale = Vector::Ones(s.out_dim);
      layer.bn_shift = Vector::Zero(s.out_dim);
      layer.running_mean = Vector::Zero(s.out_dim);
      layer.running_var = Vector::Ones(s.out_dim);
    }
    model.layers.push_back(std::move(layer));
  }
  return model;
}

std::vector<LayerSpec> default_layers(Eigen::Index input_dim,
                                      const std::vector<Eigen::Index>& hidden,
                                      Eigen::Index output_dim, double slope, bool batch_norm) {
  std::vector<LayerSpec> specs;
  Eigen::Index prev = input_dim;
  for (Eigen::Index width : hidden) {
    const Eigen::Index w = std::max(std::min(width, input_dim), output_dim);
    specs.push_back({prev, w, Activation::LeakyRelu, slope, batch_norm});
    prev = w;
  }
  specs.push_back({prev, output_dim, Activation::LeakyRelu, slope, false});
  return specs;
}

ForwardResult forward(const MlpModel& model, const Matrix& x) {
  if (model.layers.empty()) fail(ErrorKind::InvalidSpec, "forward: model has no layers");
  if (x.cols() != model.input_dim()) {
    fail(ErrorKind::ShapeMismatch, "forward: input has " + std::to_string(x.cols()) +
                                       " features, model expects " +
                                       std::to_string(model.input_dim()));
  }
  const Eigen::Index n = x.rows();
  ForwardResult result;
  result.tape.mode = model.mode;
  result.tape.revision = model.revision;
  result.tape.specs = model.specs();
  result.tape.layers.reserve(model.layers.size());

  Matrix current = x;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    LayerTape lt;
    lt.pre.noalias() = current * layer.weight.transpose();
    lt.pre.rowwise() += layer.bias.transpose();
    Matrix out = activate(lt.pre, layer.spec);
    if (layer.spec.batch_norm) {
      Vector mean;
      Vector var;
      if (model.mode == Mode::Train) {
        if (n < 2) {
          fail(ErrorKind::InvalidBatch, "forward: train-mode batch norm needs at least 2 rows");
        }
        mean = out.colwise().mean().transpose();
        var = (out.rowwise() - mean.transpose()).array().square().colwise().mean().transpose();
        lt.batch_mean = mean;
        lt.batch_var = var;
      } else {
        mean = layer.running_mean;
        var = layer.running_var;
      }
      lt.inv_std = (var.array() + model.bn_epsilon).rsqrt();
      lt.normalized = (out.rowwise() - mean.transpose()).array().rowwise() *
                      lt.inv_std.transpose().array();
      out = (lt.normalized.array().rowwise() * layer.bn_scale.transpose().array()).rowwise() +
            layer.bn_shift.transpose().array();
    }
    lt.input = std::move(current);
    current = std::move(out);
    result.tape.layers.push_back(std::move(lt));
  }
  result.output = std::move(current);
  return result;
}

Matrix predict(const MlpModel& model, const Matrix& x) { return forward(model, x).output; }

ParamGrads backward(const MlpModel& model, const ForwardTape& tape, const Matrix& grad_h) {
  if (tape.revision != model.revision || tape.specs != model.specs() ||
      tape.layers.size() != model.layers.size() || tape.mode != model.mode) {
    fail(ErrorKind::InvalidTape, "backward: tape was not produced by this model revision");
  }
  const Eigen::Index n = tape.layers.front().input.rows();
  if (grad_h.rows() != n || grad_h.cols() != model.output_dim()) {
    fail(ErrorKind::ShapeMismatch, "backward: gradient shape does not match network output");
  }

  ParamGrads grads;
  grads.layers.resize(model.layers.size());
  Matrix upstream = grad_h;
  for (std::size_t idx = model.layers.size(); idx-- > 0;) {
    const Layer& layer = model.layers[idx];
    const LayerTape& lt = tape.layers[idx];
    LayerGrads& g = grads.layers[idx];
    Matrix d_act;
    if (layer.spec.batch_norm) {
      g.bn_scale = (upstream.array() * lt.normalized.array()).colwise().sum().transpose();
      g.bn_shift = upstream.colwise().sum().transpose();
      const Matrix d_norm = upstream.array().rowwise() * layer.bn_scale.transpose().array();
      if (tape.mode == Mode::Train) {
        const double inv_n = 1.0 / static_cast<double>(n);
        const RowVector sum_d = d_norm.colwise().sum();
        const RowVector sum_dx = (d_norm.array() * lt.normalized.array()).colwise().sum();
        Matrix centered = (static_cast<double>(n) * d_norm).rowwise() - sum_d;
        centered.array() -= lt.normalized.array().rowwise() * sum_dx.array();
        d_act = (centered.array().rowwise() * lt.inv_std.transpose().array()) * inv_n;
      } else {
        d_act = d_norm.array().rowwise() * lt.inv_std.transpose().array();
      }
    } else {
      d_act = std::move(upstream);
    }
    const Matrix d_pre = activation_grad(lt.pre, d_act, layer.spec);
    g.weight.noalias() = d_pre.transpose() * lt.input;
    g.bias = d_pre.colwise().sum().transpose();
    upstream.noalias() = d_pre * layer.weight;
  }
  grads.input = std::move(upstream);
  return grads;
}

void update_running_stats(MlpModel& model, const ForwardTape& tape) {
  if (tape.mode != Mode::Train || tape.revision != model.revision ||
      tape.layers.size() != model.layers.size()) {
    fail(ErrorKind::InvalidTape, "update_running_stats: needs a train-mode tape of this model");
  }
  const double m = model.bn_momentum;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    Layer& layer = model.layers[i];
    if (!layer.spec.batch_norm) continue;
    const LayerTape& lt = tape.layers[i];
    const double n = static_cast<double>(lt.input.rows());
    const Vector unbiased = lt.batch_var * (n / (n - 1.0));
    layer.running_mean = (1.0 - m) * layer.running_mean + m * lt.batch_mean;
    layer.running_var = (1.0 - m) * layer.running_var + m * unbiased;
  }
  ++model.revision;
}

AdamState AdamState::for_model(const MlpModel& model, const AdamConfig& config) {
  AdamState state;
  state.config = config;
  for (const Layer& layer : model.layers) {
    state.first.push_back(zeros_like(layer));
    state.second.push_back(zeros_like(layer));
  }
  return state;
}

namespace {

template <typename T>
void adam_update(T& param, const T& grad, T& m1, T& m2, const AdamConfig& c, double corr1,
                 double corr2) {
  m1 = c.beta1 * m1 + (1.0 - c.beta1) * grad;
  m2 = c.beta2 * m2 + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  param.array() -= c.learning_rate * (m1.array() / corr1) /
                   ((m2.array() / corr2).sqrt() + c.epsilon);
}

}  // namespace

void adam_step(MlpModel& model, const ParamGrads& grads, AdamState& state) {
  if (grads.layers.size() != model.layers.size() || state.first.size() != model.layers.size() ||
      state.second.size() != model.layers.size()) {
    fail(ErrorKind::ShapeMismatch, "adam_step: layer count mismatch");
  }
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& layer = model.layers[i];
    const LayerGrads& g = grads.layers[i];
    const std::string what = "adam_step " + layer_name(i);
    require_same_shape(layer.weight, g.weight, what);
    require_same_shape(layer.bias, g.bias, what);
    require_same_shape(layer.bn_scale, g.bn_scale, what);
    require_same_shape(layer.bn_shift, g.bn_shift, what);
    require_same_shape(layer.weight, state.first[i].weight, what);
    require_same_shape(layer.bn_scale, state.first[i].bn_scale, what);
  }
  ++state.step;
  const AdamConfig& c = state.config;
  const double corr1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double corr2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    Layer& layer = model.layers[i];
    const LayerGrads& g = grads.layers[i];
    LayerGrads& m1 = state.first[i];
    LayerGrads& m2 = state.second[i];
    adam_update(layer.weight, g.weight, m1.weight, m2.weight, c, corr1, corr2);
    adam_update(layer.bias, g.bias, m1.bias, m2.bias, c, corr1, corr2);
    if (layer.spec.batch_norm) {
      adam_update(layer.bn_scale, g.bn_scale, m1.bn_scale, m2.bn_scale, c, corr1, corr2);
      adam_update(layer.bn_shift, g.bn_shift, m1.bn_shift, m2.bn_shift, c, corr1, corr2);
    }
  }
  ++model.revision;
}

}  // namespace deepida::net
