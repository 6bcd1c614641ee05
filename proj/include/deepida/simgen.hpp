#pragma once

#include "deepida/dataset.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace deepida::simgen {

/// Multi-view Gaussian classes with a correlated 20-feature signal block per
/// view, three classes, and a rank-2 cross-view association.
struct LinearSimSpec {
  std::vector<Eigen::Index> p = {1000, 1000};
  std::vector<int> n_per_class = {180, 180, 180};
  Eigen::Index block_size = 10;
  double block_corr = 0.8;
  std::array<double, 2> cross_assoc = {0.4, 0.2};
  /// Mean scale c_d per view; empty selects (0.2, 0.1) or (0.2, 0.1, 0.05).
  std::vector<double> mean_scale;
  std::uint64_t seed = 1;

  std::size_t views() const { return p.size(); }
  std::vector<double> resolved_mean_scale() const;
  /// Throws InvalidSpec.
  void validate() const;
};

/// Two-class, two-view curve data: view 1 carries 0.1 p signal columns,
/// view 2 is a noisy monotone transform of view 1.
struct NonlinearSimSpec {
  std::array<Eigen::Index, 2> p = {500, 500};
  std::array<int, 2> n_per_class = {200, 150};
  double signal_fraction = 0.1;
  double noise_scale = 0.2;
  double theta_max = 3.0 * 3.14159265358979323846;
  double jitter = 0.5;
  std::uint64_t seed = 1;

  Eigen::Index signal_count() const;
  void validate() const;
};

/// Block-diagonal compound-symmetric signal covariance plus identity noise.
Matrix view_covariance(Eigen::Index p, Eigen::Index block_size, double block_corr);

/// Full (sum p_d)^2 covariance; exposed for tests.
Matrix linear_joint_covariance(const LinearSimSpec& spec);
/// Stacked class means, (sum p_d) x K.
Matrix linear_class_means(const LinearSimSpec& spec);

MultiViewDataset gen_linear(const LinearSimSpec& spec);
MultiViewDataset gen_nonlinear(const NonlinearSimSpec& spec);

struct SplitFractions {
  double train = 1.0;
  double valid = 0.0;
  double test = 0.0;
};

struct Split {
  MultiViewDataset train;
  MultiViewDataset valid;
  MultiViewDataset test;
  std::array<std::vector<int>, 3> rows;
};

/// Stratified split; every split with a positive fraction receives every
/// class. When fractions sum to 1 the splits partition the rows.
Split train_valid_test_split(const MultiViewDataset& data, const SplitFractions& fractions,
                             std::uint64_t seed);

}  // namespace deepida::simgen
