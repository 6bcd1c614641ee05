#pragma once

#include "deepida/dataset.hpp"
#include "deepida/error.hpp"
#include "deepida/trainer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace deepida::ranking {

struct RankingConfig {
  int pairs = 50;
  double feature_fraction = 0.8;
  int permutations_per_feature = 1;
  /// 0 uses the available hardware threads. Never affects results.
  int workers = 0;
  std::uint64_t seed = 1;

  /// Throws InvalidConfig.
  void validate() const;
};

struct BootstrapPair {
  int index = 0;
  std::vector<int> in_bag;                 // n rows drawn with replacement, sorted
  std::vector<int> out_of_bag;             // rows never drawn, sorted
  std::vector<std::vector<int>> features;  // per view, sorted column indices
};

/// Stratified bootstrap rows plus a random feature subset per view. Pair m
/// depends only on (seed, m).
std::vector<BootstrapPair> draw_pairs(const MultiViewDataset& data, int count,
                                      double feature_fraction, std::uint64_t seed);

struct PairResult {
  int index = 0;
  bool ok = false;
  std::optional<ErrorKind> error;
  std::string message;
  double baseline_accuracy = 0.0;
  std::vector<std::vector<int>> features;
  /// flags[d][i] refers to features[d][i].
  std::vector<std::vector<bool>> flags;
};

/// Trains on the in-bag rows restricted to the pair's features, then flags
/// each feature whose out-of-bag permutation lowers pooled accuracy. Training
/// failures are captured in the result rather than thrown.
PairResult run_pair(const BootstrapPair& pair, const MultiViewDataset& data,
                    const std::vector<trainer::NetworkShape>& shapes,
                    const trainer::TrainConfig& train, const RankingConfig& config);

struct FeatureStat {
  int index = 0;
  int flagged = 0;  // n_k
  int drawn = 0;    // N_k
  double proportion = 0.0;
  /// 1-based position in the view's ranking; 0 when never drawn.
  int rank = 0;
};

struct RankingReport {
  std::vector<std::vector<FeatureStat>> views;  // indexed by feature
  std::vector<std::vector<int>> order;          // ranked feature indices per view
  std::vector<double> baseline_accuracy;        // per successful pair, by pair index
  std::vector<int> succeeded;
  std::vector<int> failed;
};

/// Tallies flags over successful pairs. Throws NoResults if none succeeded.
RankingReport aggregate(const std::vector<PairResult>& results,
                        const std::vector<Eigen::Index>& feature_counts);

/// draw_pairs + run_pair on a worker pool + aggregate.
RankingReport rank_features(const MultiViewDataset& data,
                            const std::vector<trainer::NetworkShape>& shapes,
                            const trainer::TrainConfig& train, const RankingConfig& config);

struct Selection {
  enum class Kind { Count, Percent };
  Kind kind = Kind::Count;
  double value = 20;

  /// Features kept out of p: the count itself, or ceil(value% of p).
  Eigen::Index resolve(Eigen::Index p) const;
};

/// Sorted column indices of each view's top-ranked features.
std::vector<std::vector<int>> top_features(const RankingReport& report, const Selection& selection);

/// Retrains on the top features of each view; the returned model carries the
/// kept indices and accepts full-width data.
trainer::TrainedDeepIda select_and_retrain(const MultiViewDataset& data,
                                           const RankingReport& report, const Selection& selection,
                                           const std::vector<trainer::NetworkShape>& shapes,
                                           const trainer::TrainConfig& train);

}  // namespace deepida::ranking
