#include "deepida/simgen.hpp"

#include "deepida/error.hpp"
#include "deepida/linalg.hpp"
#include "deepida/log.hpp"
#include "deepida/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace deepida::simgen {

namespace {

constexpr Eigen::Index kBlocks = 2;

/// Gram-Schmidt in the <a, b> = a' S b inner product.
Matrix sigma_orthonormalize(Matrix v, const Matrix& sigma) {
  for (Eigen::Index c = 0; c < v.cols(); ++c) {
    for (Eigen::Index prev = 0; prev < c; ++prev) {
      const double proj = v.col(prev).dot(sigma * v.col(c));
      v.col(c) -= proj * v.col(prev);
    }
    const double norm = std::sqrt(v.col(c).dot(sigma * v.col(c)));
    if (!(norm > 0.0)) fail(ErrorKind::InvalidSpec, "association loadings are degenerate");
    v.col(c) /= norm;
  }
  return v;
}

std::vector<Eigen::Index> offsets(const std::vector<Eigen::Index>& p) {
  std::vector<Eigen::Index> out(p.size() + 1, 0);
  for (std::size_t d = 0; d < p.size(); ++d) out[d + 1] = out[d] + p[d];
  return out;
}

/// Lower factor L with L L' = cov. Falls back to a clipped eigen factor if
/// Cholesky fails on round-off.
Matrix covariance_factor(const Matrix& cov) {
  const Matrix sym = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  const linalg::EigenPairs e = linalg::sym_eig(sym);
  const double smallest = e.values.minCoeff();
  const double scale = std::max(1.0, e.values.cwiseAbs().maxCoeff());
  if (smallest < -1e-8 * scale) {
    fail(ErrorKind::InvalidSpec,
         "joint covariance is not positive semidefinite (eigenvalue " + std::to_string(smallest) + ")");
  }
  log::warn("clipping joint covariance eigenvalue " + std::to_string(smallest) + " to 0");
  const Vector root = e.values.cwiseMax(0.0).cwiseSqrt();
  return e.vectors * root.asDiagonal();
}

std::string linear_provenance(const LinearSimSpec& spec) {
  nlohmann::json j;
  j["generator"] = "linear";
  j["p"] = spec.p;
  j["n_per_class"] = spec.n_per_class;
  j["block_size"] = spec.block_size;
  j["block_corr"] = spec.block_corr;
  j["cross_assoc"] = spec.cross_assoc;
  j["mean_scale"] = spec.resolved_mean_scale();
  j["seed"] = spec.seed;
  return j.dump();
}

std::string nonlinear_provenance(const NonlinearSimSpec& spec) {
  nlohmann::json j;
  j["generator"] = "nonlinear";
  j["p"] = spec.p;
  j["n_per_class"] = spec.n_per_class;
  j["signal_fraction"] = spec.signal_fraction;
  j["noise_scale"] = spec.noise_scale;
  j["theta_max"] = spec.theta_max;
  j["jitter"] = spec.jitter;
  j["seed"] = spec.seed;
  return j.dump();
}

}  // namespace

std::vector<double> LinearSimSpec::resolved_mean_scale() const {
  if (!mean_scale.empty()) return mean_scale;
  if (views() == 2) return {0.2, 0.1};
  if (views() == 3) return {0.2, 0.1, 0.05};
  fail(ErrorKind::InvalidSpec, "mean_scale must be given for " + std::to_string(views()) + " views");
}

void LinearSimSpec::validate() const {
  if (views() < 2) fail(ErrorKind::InvalidSpec, "linear simulation needs at least 2 views");
  if (block_size < 1) fail(ErrorKind::InvalidSpec, "block size must be positive");
  for (std::size_t d = 0; d < views(); ++d) {
    if (p[d] < kBlocks * block_size) {
      fail(ErrorKind::InvalidSpec, "view " + std::to_string(d + 1) + " needs at least " +
                                       std::to_string(kBlocks * block_size) + " features");
    }
  }
  if (n_per_class.size() != static_cast<std::size_t>(kBlocks + 1)) {
    fail(ErrorKind::InvalidSpec, "linear simulation has exactly 3 classes");
  }
  for (int n : n_per_class) {
    if (n < 2) fail(ErrorKind::InvalidSpec, "every class needs at least 2 samples");
  }
  if (!(block_corr > -1.0 / static_cast<double>(block_size - 1 > 0 ? block_size - 1 : 1) &&
        block_corr < 1.0)) {
    fail(ErrorKind::InvalidSpec, "block correlation must keep the block positive definite");
  }
  for (double a : cross_assoc) {
    if (!(a >= 0.0 && a < 1.0)) fail(ErrorKind::InvalidSpec, "cross association must lie in [0, 1)");
  }
  if (resolved_mean_scale().size() != views()) {
    fail(ErrorKind::InvalidSpec, "mean_scale needs one entry per view");
  }
}

Eigen::Index NonlinearSimSpec::signal_count() const {
  return static_cast<Eigen::Index>(std::llround(signal_fraction * static_cast<double>(p[0])));
}

void NonlinearSimSpec::validate() const {
  if (p[0] < 1 || p[1] != p[0]) {
    fail(ErrorKind::InvalidSpec, "view 2 is derived from view 1, so both need the same width");
  }
  if (signal_count() < 5 || signal_count() > p[0]) {
    fail(ErrorKind::InvalidSpec, "signal_fraction * p must lie in [5, p]");
  }
  if (n_per_class[0] < 2 || n_per_class[1] < 2) {
    fail(ErrorKind::InvalidSpec, "every class needs at least 2 samples");
  }
  if (!(noise_scale >= 0.0) || !(jitter >= 0.0) || !(theta_max > 0.0)) {
    fail(ErrorKind::InvalidSpec, "noise scale, jitter and theta range must be non-negative");
  }
}

Matrix view_covariance(Eigen::Index p, Eigen::Index block_size, double block_corr) {
  Matrix out = Matrix::Identity(p, p);
  for (Eigen::Index b = 0; b < kBlocks; ++b) {
    auto block = out.block(b * block_size, b * block_size, block_size, block_size);
    block.setConstant(block_corr);
    block.diagonal().setOnes();
  }
  return out;
}

Matrix linear_joint_covariance(const LinearSimSpec& spec) {
  spec.validate();
  const std::size_t views = spec.views();
  const std::vector<Eigen::Index> at = offsets(spec.p);
  Rng rng(derive_seed(spec.seed, {1}));
  std::vector<Matrix> sigma(views);
  std::vector<Matrix> v(views);
  for (std::size_t d = 0; d < views; ++d) {
    sigma[d] = view_covariance(spec.p[d], spec.block_size, spec.block_corr);
    Matrix raw = Matrix::Zero(spec.p[d], 2);
    raw.topRows(kBlocks * spec.block_size) = uniform(kBlocks * spec.block_size, 2, 0.5, 1.0, rng);
    v[d] = sigma_orthonormalize(raw, sigma[d]);
  }
  Vector assoc(2);
  assoc << spec.cross_assoc[0], spec.cross_assoc[1];
  Matrix joint = Matrix::Zero(at.back(), at.back());
  for (std::size_t d = 0; d < views; ++d) {
    joint.block(at[d], at[d], spec.p[d], spec.p[d]) = sigma[d];
    for (std::size_t j = d + 1; j < views; ++j) {
      const Matrix cross = sigma[d] * v[d] * assoc.asDiagonal() * v[j].transpose() * sigma[j];
      joint.block(at[d], at[j], spec.p[d], spec.p[j]) = cross;
      joint.block(at[j], at[d], spec.p[j], spec.p[d]) = cross.transpose();
    }
  }
  return joint;
}

Matrix linear_class_means(const LinearSimSpec& spec) {
  const Matrix joint = linear_joint_covariance(spec);
  const std::vector<Eigen::Index> at = offsets(spec.p);
  const std::vector<double> c = spec.resolved_mean_scale();
  Matrix a = Matrix::Zero(at.back(), kBlocks);
  for (std::size_t d = 0; d < spec.views(); ++d) {
    a.block(at[d], 0, spec.block_size, 1).setConstant(c[d]);
    a.block(at[d] + spec.block_size, 1, spec.block_size, 1).setConstant(-c[d]);
  }
  Matrix means = Matrix::Zero(at.back(), kBlocks + 1);
  means.leftCols(kBlocks) = joint * a;
  return means;
}

MultiViewDataset gen_linear(const LinearSimSpec& spec) {
  spec.validate();
  const Matrix joint = linear_joint_covariance(spec);
  const Matrix means = linear_class_means(spec);
  const Matrix factor = covariance_factor(joint);
  const std::vector<Eigen::Index> at = offsets(spec.p);
  const int n = std::accumulate(spec.n_per_class.begin(), spec.n_per_class.end(), 0);

  Rng rng(derive_seed(spec.seed, {2}));
  Matrix samples(n, at.back());
  MultiViewDataset out;
  out.labels.num_classes = static_cast<int>(spec.n_per_class.size());
  Eigen::Index row = 0;
  for (std::size_t k = 0; k < spec.n_per_class.size(); ++k) {
    const int nk = spec.n_per_class[k];
    const Matrix z = standard_normal(at.back(), nk, rng);
    samples.middleRows(row, nk) = ((factor * z).colwise() + means.col(static_cast<Eigen::Index>(k))).transpose();
    for (int i = 0; i < nk; ++i) out.labels.ids.push_back(static_cast<int>(k));
    row += nk;
  }
  for (std::size_t d = 0; d < spec.views(); ++d) {
    out.views.push_back(samples.middleCols(at[d], spec.p[d]));
    std::vector<bool> mask(static_cast<std::size_t>(spec.p[d]), false);
    std::fill(mask.begin(), mask.begin() + kBlocks * spec.block_size, true);
    out.signal_mask.push_back(std::move(mask));
  }
  out.provenance = linear_provenance(spec);
  return out;
}

MultiViewDataset gen_nonlinear(const NonlinearSimSpec& spec) {
  spec.validate();
  const Eigen::Index p = spec.p[0];
  const Eigen::Index signal = spec.signal_count();
  const int n = spec.n_per_class[0] + spec.n_per_class[1];
  Rng rng(derive_seed(spec.seed, {3}));

  const Vector theta =
      Vector::LinSpaced(n, 0.0, spec.theta_max) + spec.jitter * uniform(n, 1, 0.0, 1.0, rng);
  const Vector growth = (0.15 * theta.array()).exp();
  const Vector sine = growth.cwiseProduct(Vector((1.5 * theta.array()).sin()));
  const Vector cosine = growth.cwiseProduct(Vector((1.5 * theta.array()).cos()));
  Matrix x1(n, p);
  for (Eigen::Index c = 0; c < signal; ++c) x1.col(c) = c < 5 ? sine : cosine;
  // The remaining columns of the latent matrix are masked out by W, so only
  // the additive noise survives there.
  x1.rightCols(p - signal).setZero();
  x1 += spec.noise_scale * standard_normal(n, p, rng);

  Matrix x2 = x1.cwiseMax(0.0);
  for (Eigen::Index c = 0; c < p; ++c) {
    const double norm = x2.col(c).norm();
    if (norm > 0.0) x2.col(c) /= norm;
  }
  x2 += uniform(n, p, 0.0, 1.0, rng);

  MultiViewDataset out;
  out.labels.num_classes = 2;
  for (int i = 0; i < n; ++i) out.labels.ids.push_back(i < spec.n_per_class[0] ? 0 : 1);
  out.views = {std::move(x1), std::move(x2)};
  std::vector<bool> mask(static_cast<std::size_t>(p), false);
  std::fill(mask.begin(), mask.begin() + signal, true);
  out.signal_mask = {std::move(mask), std::vector<bool>(static_cast<std::size_t>(p), false)};
  out.provenance = nonlinear_provenance(spec);
  return out;
}

Split train_valid_test_split(const MultiViewDataset& data, const SplitFractions& fractions,
                             std::uint64_t seed) {
  data.validate();
  const std::array<double, 3> f = {fractions.train, fractions.valid, fractions.test};
  double total = 0.0;
  for (double v : f) {
    if (!(v >= 0.0)) fail(ErrorKind::InvalidInput, "split fractions must be non-negative");
    total += v;
  }
  if (!(f[0] > 0.0) || total > 1.0 + 1e-12) {
    fail(ErrorKind::InvalidInput, "split needs a positive train fraction and a sum of at most 1");
  }
  const bool partition = std::abs(total - 1.0) <= 1e-12;
  const std::vector<int> counts = data.labels.counts();
  Rng rng(seed);
  Split out;
  for (int k = 0; k < data.labels.num_classes; ++k) {
    std::vector<int> members;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
      if (data.labels.ids[i] == k) members.push_back(static_cast<int>(i));
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto nk = static_cast<double>(members.size());
    std::array<std::size_t, 3> take{};
    std::size_t used = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      take[s] = std::min(members.size() - used,
                         static_cast<std::size_t>(std::llround(f[s] * nk)));
      used += take[s];
    }
    if (partition) {
      // rounding remainder goes to the last split with a positive fraction
      const std::size_t last = f[2] > 0.0 ? 2 : (f[1] > 0.0 ? 1 : 0);
      take[last] += members.size() - used;
    }
    std::size_t at = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      if (f[s] > 0.0 && take[s] == 0) {
        fail(ErrorKind::StratificationFailure,
             "class " + std::to_string(k + 1) + " (" + std::to_string(counts[static_cast<std::size_t>(k)]) +
                 " samples) cannot populate every split");
      }
      out.rows[s].insert(out.rows[s].end(), members.begin() + static_cast<std::ptrdiff_t>(at),
                         members.begin() + static_cast<std::ptrdiff_t>(at + take[s]));
      at += take[s];
    }
  }
  for (auto& r : out.rows) std::sort(r.begin(), r.end());
  out.train = data.subset_rows(out.rows[0]);
  out.valid = data.subset_rows(out.rows[1]);
  out.test = data.subset_rows(out.rows[2]);
  return out;
}

}  // namespace deepida::simgen
