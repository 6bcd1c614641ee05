#pragma once

#include "deepida/classifier.hpp"
#include "deepida/dataset.hpp"
#include "deepida/net.hpp"
#include "deepida/objective.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace deepida::trainer {

enum class Validation { None, BestEpoch };

struct TrainConfig {
  int epochs = 50;
  /// 0 trains on the full batch.
  int batch_size = 0;
  net::AdamConfig adam;
  objective::IdaConfig ida;
  std::uint64_t seed = 1;
  Validation validation = Validation::None;

  /// Throws InvalidConfig.
  void validate() const;
};

struct TrainedDeepIda {
  std::vector<net::MlpModel> models;  // eval mode
  objective::IdaProjection projection;
  objective::IdaConfig ida;           // with l resolved
  classifier::CentroidSet pooled;
  std::vector<classifier::CentroidSet> per_view;
  std::vector<double> loss_history;
  std::vector<double> validation_history;
  /// 1-based epoch whose weights were kept.
  int selected_epoch = 0;
  /// Loss of the kept networks on the full training set in eval mode.
  double final_loss = 0.0;
  std::int64_t optimizer_steps = 0;
  TrainConfig config;
  /// Training-set scores cached at fit time, one n x l matrix per view.
  std::vector<Matrix> train_scores;
  /// Column indices into the original data that feed each network. Empty
  /// when every column is used.
  std::vector<std::vector<int>> kept_features;
  /// Feature counts of the original data.
  std::vector<Eigen::Index> source_dims;

  std::size_t num_views() const { return models.size(); }
  int num_classes() const { return pooled.num_classes(); }
};

/// Per-view network layout independent of the input width; hidden widths
/// are capped at the input width when specs are built.
struct NetworkShape {
  std::vector<Eigen::Index> hidden = {512, 256, 64};
  Eigen::Index output = 20;
  double slope = 0.1;
  bool batch_norm = true;

  bool operator==(const NetworkShape&) const = default;
};

/// Per-view default network for the given input widths.
std::vector<std::vector<net::LayerSpec>> default_specs(const std::vector<Eigen::Index>& input_dims,
                                                       const std::vector<Eigen::Index>& hidden = {512, 256, 64},
                                                       Eigen::Index output_dim = 20);

/// One shape for every view, or one per view.
std::vector<std::vector<net::LayerSpec>> specs_for(const std::vector<NetworkShape>& shapes,
                                                   const std::vector<Eigen::Index>& input_dims);

TrainedDeepIda fit(const MultiViewDataset& data,
                   const std::vector<std::vector<net::LayerSpec>>& specs, const TrainConfig& config,
                   const MultiViewDataset* validation = nullptr);

/// Restricts data to the model's kept features (if any), checking widths.
MultiViewDataset model_inputs(const TrainedDeepIda& model, const MultiViewDataset& data);

/// Eval-mode network outputs, one n x o_d matrix per view.
std::vector<Matrix> representations(const TrainedDeepIda& model, const MultiViewDataset& data);

/// Discriminant scores H_d A_d, one n x l matrix per view.
std::vector<Matrix> project(const TrainedDeepIda& model, const MultiViewDataset& data);

/// Nearest-centroid classes in the pooled space or a single view's space.
std::vector<int> predict(const TrainedDeepIda& model, const std::vector<Matrix>& scores,
                         classifier::Space space = {});

/// Loss of the trained networks on a dataset (eval mode, freshly solved bases).
double evaluate_loss(const TrainedDeepIda& model, const MultiViewDataset& data);

}  // namespace deepida::trainer
