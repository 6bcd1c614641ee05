#pragma once

#include "deepida/types.hpp"

#include <cstdint>
#include <vector>

namespace deepida::net {

enum class Activation { Identity, LeakyRelu };

/// One dense layer: out = bn(act(W x + b)), with batch norm applied after the
/// activation when enabled.
struct LayerSpec {
  Eigen::Index in_dim = 0;
  Eigen::Index out_dim = 0;
  Activation activation = Activation::LeakyRelu;
  double slope = 0.1;
  bool batch_norm = false;

  bool operator==(const LayerSpec&) const = default;
};

struct Layer {
  LayerSpec spec;
  Matrix weight;  // out_dim x in_dim
  Vector bias;
  // Present only when spec.batch_norm is set.
  Vector bn_scale;
  Vector bn_shift;
  Vector running_mean;
  Vector running_var;
};

enum class Mode { Train, Eval };

struct MlpModel {
  std::vector<Layer> layers;
  Mode mode = Mode::Train;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;
  /// Bumped on every parameter or statistics update; tapes record it.
  std::uint64_t revision = 0;

  Eigen::Index input_dim() const { return layers.front().spec.in_dim; }
  Eigen::Index output_dim() const { return layers.back().spec.out_dim; }
  std::vector<LayerSpec> specs() const;
  std::size_t parameter_count() const;
};

/// Throws InvalidSpec for an empty list, a broken dimension chain, a zero
/// width or a slope outside (0, 1).
void validate_specs(const std::vector<LayerSpec>& specs);

/// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases, unit
/// batch-norm scale. Deterministic for a fixed seed.
MlpModel init_model(const std::vector<LayerSpec>& specs, std::uint64_t seed);

/// Hidden widths are capped at the input dimension (never below the output
/// width); every layer uses LeakyReLU, hidden layers also use batch norm.
std::vector<LayerSpec> default_layers(Eigen::Index input_dim,
                                      const std::vector<Eigen::Index>& hidden = {512, 256, 64},
                                      Eigen::Index output_dim = 20, double slope = 0.1,
                                      bool batch_norm = true);

struct LayerTape {
  Matrix input;
  Matrix pre;         // W x + b
  Matrix normalized;  // batch-norm xhat (empty without batch norm)
  Vector batch_mean;  // batch statistics (train mode) of the activation
  Vector batch_var;   // biased
  Vector inv_std;     // 1 / sqrt(var + eps) for the statistics actually used
};

struct ForwardTape {
  std::vector<LayerTape> layers;
  Mode mode = Mode::Train;
  std::uint64_t revision = 0;
  std::vector<LayerSpec> specs;
};

struct ForwardResult {
  Matrix output;
  ForwardTape tape;
};

/// Pure forward pass; never touches the model's running statistics.
ForwardResult forward(const MlpModel& model, const Matrix& x);

/// Convenience: forward output only.
Matrix predict(const MlpModel& model, const Matrix& x);

struct LayerGrads {
  Matrix weight;
  Vector bias;
  Vector bn_scale;
  Vector bn_shift;
};

struct ParamGrads {
  std::vector<LayerGrads> layers;
  Matrix input;  // dL/dx
};

/// Reverse pass for dL/dh = grad_h. Throws InvalidTape when the tape was not
/// produced by this model at its current revision.
ParamGrads backward(const MlpModel& model, const ForwardTape& tape, const Matrix& grad_h);

/// Exponential moving average of the batch statistics recorded in a
/// train-mode tape.
void update_running_stats(MlpModel& model, const ForwardTape& tape);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<LayerGrads> first;
  std::vector<LayerGrads> second;

  static AdamState for_model(const MlpModel& model, const AdamConfig& config = {});
};

/// One bias-corrected Adam descent step on every trainable parameter.
void adam_step(MlpModel& model, const ParamGrads& grads, AdamState& state);

}  // namespace deepida::net
