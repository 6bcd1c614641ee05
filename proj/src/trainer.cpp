#include "deepida/trainer.hpp"

#include "deepida/error.hpp"
#include "deepida/log.hpp"
#include "deepida/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace deepida::trainer {

namespace {

std::string view_name(std::size_t d) { return "view " + std::to_string(d + 1); }

std::vector<Matrix> forward_all(const std::vector<net::MlpModel>& models,
                                const std::vector<Matrix>& views,
                                std::vector<net::ForwardTape>* tapes) {
  std::vector<Matrix> out;
  out.reserve(models.size());
  for (std::size_t d = 0; d < models.size(); ++d) {
    net::ForwardResult r = net::forward(models[d], views[d]);
    out.push_back(std::move(r.output));
    if (tapes) tapes->push_back(std::move(r.tape));
  }
  return out;
}

std::vector<net::MlpModel> in_mode(std::vector<net::MlpModel> models, net::Mode mode) {
  for (net::MlpModel& m : models) m.mode = mode;
  return models;
}

/// Rows of each class dealt round-robin over `count` batches after a shuffle.
std::vector<std::vector<int>> stratified_batches(const Labels& labels, int count, Rng& rng) {
  std::vector<std::vector<int>> batches(static_cast<std::size_t>(count));
  std::size_t next = 0;
  for (int k = 0; k < labels.num_classes; ++k) {
    std::vector<int> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels.ids[i] == k) members.push_back(static_cast<int>(i));
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (int row : members) {
      batches[next].push_back(row);
      next = (next + 1) % batches.size();
    }
  }
  for (auto& b : batches) std::sort(b.begin(), b.end());
  return batches;
}

void check_inputs(const MultiViewDataset& data,
                  const std::vector<std::vector<net::LayerSpec>>& specs, const char* what) {
  data.validate();
  data.labels.require_all_present();
  if (specs.size() != data.num_views()) {
    fail(ErrorKind::ShapeMismatch, std::string(what) + ": " + std::to_string(specs.size()) +
                                       " networks for " + std::to_string(data.num_views()) +
                                       " views");
  }
  for (std::size_t d = 0; d < specs.size(); ++d) {
    net::validate_specs(specs[d]);
    if (specs[d].front().in_dim != data.views[d].cols()) {
      fail(ErrorKind::ShapeMismatch,
           std::string(what) + ": " + view_name(d) + " has " +
               std::to_string(data.views[d].cols()) + " features, network expects " +
               std::to_string(specs[d].front().in_dim));
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) fail(ErrorKind::InvalidConfig, "epochs must be at least 1");
  if (batch_size < 0) fail(ErrorKind::InvalidConfig, "batch_size must be positive (or 0 for full)");
  if (!(adam.learning_rate > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
      !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
    fail(ErrorKind::InvalidConfig, "Adam hyperparameters out of range");
  }
  ida.validate();
}

std::vector<std::vector<net::LayerSpec>> default_specs(const std::vector<Eigen::Index>& input_dims,
                                                       const std::vector<Eigen::Index>& hidden,
                                                       Eigen::Index output_dim) {
  std::vector<std::vector<net::LayerSpec>> out;
  for (Eigen::Index p : input_dims) out.push_back(net::default_layers(p, hidden, output_dim));
  return out;
}

std::vector<std::vector<net::LayerSpec>> specs_for(const std::vector<NetworkShape>& shapes,
                                                   const std::vector<Eigen::Index>& input_dims) {
  if (shapes.size() != 1 && shapes.size() != input_dims.size()) {
    fail(ErrorKind::InvalidConfig, "expected 1 or " + std::to_string(input_dims.size()) +
                                       " network shapes, got " + std::to_string(shapes.size()));
  }
  std::vector<std::vector<net::LayerSpec>> out;
  for (std::size_t d = 0; d < input_dims.size(); ++d) {
    const NetworkShape& s = shapes.size() == 1 ? shapes.front() : shapes[d];
    out.push_back(net::default_layers(input_dims[d], s.hidden, s.output, s.slope, s.batch_norm));
  }
  return out;
}

TrainedDeepIda fit(const MultiViewDataset& data,
                   const std::vector<std::vector<net::LayerSpec>>& specs, const TrainConfig& config,
                   const MultiViewDataset* validation) {
  config.validate();
  check_inputs(data, specs, "fit");
  const std::size_t views = data.num_views();
  const Eigen::Index n = data.num_samples();
  const std::vector<int> counts = data.labels.counts();
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < 2) {
      fail(ErrorKind::InvalidBatch, "class " + std::to_string(k + 1) + " has fewer than 2 training samples");
    }
  }
  if (config.batch_size > n) {
    fail(ErrorKind::InvalidConfig, "batch_size " + std::to_string(config.batch_size) +
                                       " exceeds the " + std::to_string(n) + " training samples");
  }
  const bool use_validation = validation != nullptr && config.validation == Validation::BestEpoch;
  if (use_validation) check_inputs(*validation, specs, "fit (validation)");

  std::vector<Eigen::Index> out_dims;
  for (const auto& s : specs) out_dims.push_back(s.back().out_dim);
  objective::IdaConfig ida = config.ida;
  ida.l = ida.resolve_l(data.labels.num_classes, out_dims);

  const int batch_count =
      config.batch_size == 0 ? 1 : static_cast<int>((n + config.batch_size - 1) / config.batch_size);
  if (batch_count > 1) {
    const int smallest = *std::min_element(counts.begin(), counts.end());
    if (smallest < 2 * batch_count) {
      fail(ErrorKind::InvalidBatch, "batch_size " + std::to_string(config.batch_size) +
                                        " leaves some batch with fewer than 2 samples of a class");
    }
  }

  std::vector<net::MlpModel> models;
  std::vector<net::AdamState> adam;
  for (std::size_t d = 0; d < views; ++d) {
    models.push_back(net::init_model(specs[d], derive_seed(config.seed, {10, static_cast<std::uint64_t>(d)})));
    adam.push_back(net::AdamState::for_model(models[d], config.adam));
  }

  TrainedDeepIda out;
  std::vector<net::MlpModel> best;
  double best_validation = 0.0;
  std::vector<Matrix> warm;
  std::vector<Matrix> validation_warm;
  Rng batch_rng(derive_seed(config.seed, {20}));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::vector<int>> batches;
    if (batch_count == 1) {
      batches.emplace_back();
    } else {
      batches = stratified_batches(data.labels, batch_count, batch_rng);
    }
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const MultiViewDataset batch = batch_count == 1 ? MultiViewDataset{} : data.subset_rows(batches[b]);
      const MultiViewDataset& source = batch_count == 1 ? data : batch;
      std::vector<net::ForwardTape> tapes;
      const std::vector<Matrix> h = forward_all(models, source.views, &tapes);
      objective::LossResult loss;
      std::vector<Matrix> grads;
      try {
        loss = objective::loss_value(h, source.labels, ida, derive_seed(config.seed, {30, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)}),
                                     warm.empty() ? nullptr : &warm);
        grads = objective::loss_gradient(loss.system, source.labels, ida, loss.projection);
      } catch (const Error& e) {
        fail(e.kind(), "epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1) +
                           ": " + e.what());
      }
      warm = loss.projection.gammas;
      epoch_loss += loss.loss;
      for (std::size_t d = 0; d < views; ++d) {
        const net::ParamGrads g = net::backward(models[d], tapes[d], grads[d]);
        net::update_running_stats(models[d], tapes[d]);
        net::adam_step(models[d], g, adam[d]);
      }
    }
    epoch_loss /= static_cast<double>(batches.size());
    out.loss_history.push_back(epoch_loss);
    log::debug("epoch " + std::to_string(epoch) + " loss " + std::to_string(epoch_loss));

    if (use_validation) {
      const std::vector<net::MlpModel> eval_models = in_mode(models, net::Mode::Eval);
      const std::vector<Matrix> hv = forward_all(eval_models, validation->views, nullptr);
      double vloss = 0.0;
      try {
        const objective::LossResult r =
            objective::loss_value(hv, validation->labels, ida, derive_seed(config.seed, {40, static_cast<std::uint64_t>(epoch)}),
                                  validation_warm.empty() ? nullptr : &validation_warm);
        validation_warm = r.projection.gammas;
        vloss = r.loss;
      } catch (const Error& e) {
        fail(e.kind(), "epoch " + std::to_string(epoch) + ", validation: " + e.what());
      }
      out.validation_history.push_back(vloss);
      if (best.empty() || vloss < best_validation) {
        best = models;
        best_validation = vloss;
        out.selected_epoch = epoch;
      }
    }
  }
  if (!use_validation) {
    best = std::move(models);
    out.selected_epoch = config.epochs;
  }

  out.models = in_mode(std::move(best), net::Mode::Eval);
  out.optimizer_steps = adam.front().step;
  out.config = config;
  out.ida = ida;
  out.source_dims = data.feature_counts();

  const std::vector<Matrix> h = forward_all(out.models, data.views, nullptr);
  const objective::LossResult final_loss =
      objective::loss_value(h, data.labels, ida, derive_seed(config.seed, {50}),
                            warm.empty() ? nullptr : &warm);
  out.projection = final_loss.projection;
  out.final_loss = final_loss.loss;
  for (std::size_t d = 0; d < views; ++d) {
    out.train_scores.push_back(h[d] * out.projection.projection_matrix(d));
  }
  out.pooled = classifier::fit_centroids(out.train_scores, data.labels, classifier::Space{});
  for (std::size_t d = 0; d < views; ++d) {
    out.per_view.push_back(
        classifier::fit_centroids(out.train_scores, data.labels, classifier::Space{static_cast<int>(d)}));
  }
  return out;
}

MultiViewDataset model_inputs(const TrainedDeepIda& model, const MultiViewDataset& data) {
  if (data.num_views() != model.num_views()) {
    fail(ErrorKind::ShapeMismatch, "model has " + std::to_string(model.num_views()) +
                                       " views, data has " + std::to_string(data.num_views()));
  }
  const bool restricted = !model.kept_features.empty();
  for (std::size_t d = 0; d < data.num_views(); ++d) {
    const Eigen::Index expected = restricted ? model.source_dims[d] : model.models[d].input_dim();
    if (data.views[d].cols() != expected) {
      fail(ErrorKind::ShapeMismatch, view_name(d) + " has " + std::to_string(data.views[d].cols()) +
                                         " features, model expects " + std::to_string(expected));
    }
  }
  if (!restricted) return data;
  return data.select_features(model.kept_features);
}

std::vector<Matrix> representations(const TrainedDeepIda& model, const MultiViewDataset& data) {
  const MultiViewDataset inputs = model_inputs(model, data);
  return forward_all(model.models, inputs.views, nullptr);
}

std::vector<Matrix> project(const TrainedDeepIda& model, const MultiViewDataset& data) {
  std::vector<Matrix> h = representations(model, data);
  for (std::size_t d = 0; d < h.size(); ++d) h[d] = h[d] * model.projection.projection_matrix(d);
  return h;
}

std::vector<int> predict(const TrainedDeepIda& model, const std::vector<Matrix>& scores,
                         classifier::Space space) {
  if (space.pooled()) return classifier::predict(model.pooled, scores);
  if (space.view < 0 || static_cast<std::size_t>(space.view) >= model.per_view.size()) {
    fail(ErrorKind::InvalidInput, "view " + std::to_string(space.view + 1) + " does not exist");
  }
  return classifier::predict(model.per_view[static_cast<std::size_t>(space.view)], scores);
}

double evaluate_loss(const TrainedDeepIda& model, const MultiViewDataset& data) {
  const std::vector<Matrix> h = representations(model, data);
  return objective::loss_value(h, data.labels, model.ida, derive_seed(model.config.seed, {60}),
                               &model.projection.gammas)
      .loss;
}

}  // namespace deepida::trainer
