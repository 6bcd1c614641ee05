#include "deepida/error.hpp"
#include "deepida/objective.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace deepida;
using namespace deepida::objective;

namespace {

struct Instance {
  std::vector<Matrix> h;
  Labels labels;
};

/// Views sharing a latent class signal plus view-specific noise.
Instance random_instance(std::mt19937_64& rng, int views, int n, std::vector<int> widths, int k) {
  Instance inst;
  inst.labels.ids = oracle::random_labels(n, k, rng);
  inst.labels.num_classes = k;
  const Matrix latent = oracle::random_matrix(n, 3, rng);
  const Matrix class_shift = oracle::random_matrix(k, 3, rng);
  Matrix z = latent;
  for (int i = 0; i < n; ++i) z.row(i) += 1.5 * class_shift.row(inst.labels.ids[static_cast<std::size_t>(i)]);
  for (int d = 0; d < views; ++d) {
    const int o = widths[static_cast<std::size_t>(d)];
    const Matrix mix = oracle::random_matrix(3, o, rng);
    inst.h.push_back(z * mix + 0.8 * oracle::random_matrix(n, o, rng) +
                     Matrix::Constant(n, o, 0.3 * d));
  }
  return inst;
}

IdaConfig tight(double rho, int l) {
  IdaConfig cfg;
  cfg.rho = rho;
  cfg.l = l;
  cfg.eps_gamma = 1e-24;
  cfg.max_gamma_iters = 5000;
  return cfg;
}

}  // namespace

TEST_CASE("IdaConfig constants and validation") {
  IdaConfig cfg;
  cfg.rho = 0.3;
  CHECK(cfg.c1(2) == doctest::Approx(0.15));
  CHECK(cfg.c2(2) == doctest::Approx(0.7));
  CHECK(cfg.c2(3) == doctest::Approx(2.0 * 0.7 / 6.0));
  cfg.rho = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.rho = 0.5;
  const std::vector<Eigen::Index> widths = {4, 3};
  CHECK(cfg.resolve_l(3, widths) == 2);
  cfg.l = 3;
  CHECK_THROWS_AS(cfg.resolve_l(3, widths), Error);
}

TEST_CASE("rho = 1 decouples the views into independent eigenproblems") {
  std::mt19937_64 rng(1);
  const Instance inst = random_instance(rng, 3, 40, {5, 4, 6}, 4);
  const auto sys = linalg::whitened_pair(inst.h, inst.labels);
  IdaConfig cfg;
  cfg.rho = 1.0;
  cfg.l = 3;
  const IdaProjection proj = solve_gamma_system(sys.m, sys.n, cfg, 77);
  CHECK(proj.converged);
  CHECK(proj.iterations == 1);
  for (std::size_t d = 0; d < 3; ++d) {
    const linalg::EigenPairs e = linalg::sym_eig(sys.m[d] / 3.0);
    CHECK((proj.gammas[d] - e.vectors.leftCols(3)).norm() < 1e-12);
    CHECK((proj.lambdas[d] - e.values.head(3)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("identical views give identical spectra at the fixed point") {
  std::mt19937_64 rng(2);
  Instance inst = random_instance(rng, 2, 30, {4, 4}, 3);
  inst.h[1] = inst.h[0];
  const auto sys = linalg::whitened_pair(inst.h, inst.labels);
  const IdaConfig cfg = tight(0.5, 2);
  const IdaProjection proj = solve_gamma_system(sys.m, sys.n, cfg, 5);
  CHECK(proj.converged);
  CHECK((proj.lambdas[0] - proj.lambdas[1]).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(fixed_point_residual(sys.m, sys.n, proj, cfg) < 1e-8);
}

TEST_CASE("solver agrees with a multi-restart alternating oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const Instance inst = random_instance(rng, 2, 25, {4, 4}, 3);
    const auto sys = linalg::whitened_pair(inst.h, inst.labels);
    const double rho = 0.2 + 0.15 * trial;
    const IdaConfig cfg = tight(rho, 2);
    const IdaProjection proj = solve_gamma_system(sys.m, sys.n, cfg, 100 + trial);
    const oracle::AlternatingResult best =
        oracle::alternating_solve(sys.m, sys.n, rho, 2, 100, 300, 900 + trial);
    for (std::size_t d = 0; d < 2; ++d) {
      CHECK((proj.lambdas[d] - best.lambdas[d]).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("iteration invariants: bounds, monotone potential, orthonormality, trace identity") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 40; ++trial) {
    const int views = 2 + trial % 2;
    std::vector<int> widths;
    for (int d = 0; d < views; ++d) widths.push_back(3 + (trial + d) % 5);
    const int k = 3 + trial % 2;
    const Instance inst = random_instance(rng, views, 20 + trial, widths, k);
    const auto sys = linalg::whitened_pair(inst.h, inst.labels);
    const int l = 1 + trial % 2;
    const IdaConfig cfg = tight(0.1 + 0.02 * trial, l);
    const IdaProjection proj = solve_gamma_system(sys.m, sys.n, cfg, trial);
    REQUIRE(proj.converged);
    const double upper = cfg.c1(views) + cfg.c2(views) * (views - 1);
    for (std::size_t d = 0; d < proj.views(); ++d) {
      CHECK(proj.lambdas[d].minCoeff() >= -1e-10);
      CHECK(proj.lambdas[d].maxCoeff() <= upper + 1e-8);
      CHECK((proj.gammas[d].transpose() * proj.gammas[d] - Matrix::Identity(l, l)).norm() < 1e-8);
      CHECK(std::abs(trace_objective(sys.m, sys.n, proj, d, cfg) - proj.lambdas[d].sum()) < 1e-8);
    }
    for (std::size_t s = 1; s < proj.potential_trace.size(); ++s) {
      CHECK(proj.potential_trace[s] >= proj.potential_trace[s - 1] - 1e-10);
    }
    CHECK(fixed_point_residual(sys.m, sys.n, proj, cfg) < 1e-8);
  }
}

TEST_CASE("a shared rotation of H^d leaves the spectrum unchanged") {
  std::mt19937_64 rng(5);
  const Instance inst = random_instance(rng, 2, 30, {4, 3}, 3);
  const IdaConfig cfg = tight(0.4, 2);
  const LossResult base = loss_value(inst.h, inst.labels, cfg, 1);
  const Matrix q = oracle::random_matrix(4, 4, rng).householderQr().householderQ();
  std::vector<Matrix> rotated = inst.h;
  rotated[0] = inst.h[0] * q;
  const LossResult rot = loss_value(rotated, inst.labels, cfg, 1);
  for (std::size_t d = 0; d < 2; ++d) {
    CHECK((base.projection.lambdas[d] - rot.projection.lambdas[d]).cwiseAbs().maxCoeff() < 1e-8);
  }
  CHECK(std::abs(base.loss - rot.loss) < 1e-8);
}

TEST_CASE("loss_value examples") {
  std::mt19937_64 rng(6);
  SUBCASE("negated loss respects its bound") {
    for (int trial = 0; trial < 20; ++trial) {
      const int views = 2 + trial % 2;
      const Instance inst = random_instance(rng, views, 30, std::vector<int>(views, 4), 3);
      IdaConfig cfg;
      cfg.rho = 0.05 * trial;
      cfg.l = 2;
      const LossResult r = loss_value(inst.h, inst.labels, cfg, trial);
      const double bound = views * 2 * (cfg.c1(views) + cfg.c2(views) * (views - 1));
      CHECK(-r.loss >= -1e-10);
      CHECK(-r.loss <= bound + 1e-8);
    }
  }
  SUBCASE("rho = 1 without class separation gives zero loss") {
    const Matrix base = oracle::random_matrix(8, 3, rng);
    Matrix h(16, 3);
    h << base, base;
    Labels labels;
    labels.num_classes = 2;
    for (int i = 0; i < 16; ++i) labels.ids.push_back(i < 8 ? 0 : 1);
    const std::vector<Matrix> hs = {h, oracle::random_matrix(16, 3, rng)};
    IdaConfig cfg;
    cfg.rho = 1.0;
    cfg.l = 1;
    const LossResult r = loss_value(hs, labels, cfg, 0);
    // view 2 is random, so only view 1 is guaranteed zero
    CHECK(std::abs(r.projection.lambdas[0].sum()) < 1e-12);
    const std::vector<Matrix> both = {h, h};
    CHECK(std::abs(loss_value(both, labels, cfg, 0).loss) < 1e-12);
  }
  SUBCASE("rho = 0 with duplicated views gives 2 l c2") {
    const Instance inst = random_instance(rng, 2, 30, {4, 4}, 3);
    const std::vector<Matrix> hs = {inst.h[0], inst.h[0]};
    IdaConfig cfg;
    cfg.rho = 0.0;
    cfg.l = 2;
    cfg.ridge = 0.0;
    const LossResult r = loss_value(hs, inst.labels, cfg, 0);
    CHECK(std::abs(-r.loss - 2.0 * 2 * cfg.c2(2)) < 1e-6);
  }
  SUBCASE("too few samples are rejected") {
    const std::vector<Matrix> hs = {oracle::random_matrix(3, 2, rng),
                                    oracle::random_matrix(3, 2, rng)};
    Labels labels;
    labels.ids = {0, 1, 2};
    labels.num_classes = 3;
    CHECK_THROWS_AS(loss_value(hs, labels, IdaConfig{}, 0), Error);
  }
}

TEST_CASE("loss_gradient matches central differences of the frozen loss") {
  std::mt19937_64 rng(7);
  struct Case {
    int views;
    double rho;
    double ridge;
    linalg::Centering centering;
  };
  const std::vector<Case> cases = {
      {2, 0.5, 1e-4, linalg::Centering::SampleMean},
      {2, 0.5, 1e-4, linalg::Centering::SampleMean},
      {2, 0.0, 0.0, linalg::Centering::SampleMean},
      {2, 1.0, 1e-4, linalg::Centering::SampleMean},
      {2, 0.7, 1e-2, linalg::Centering::SampleMean},
      {3, 0.3, 1e-4, linalg::Centering::SampleMean},
      {2, 0.5, 1e-4, linalg::Centering::ClassMeanAverage},
  };
  for (const Case& c : cases) {
    const Instance inst = random_instance(rng, c.views, 30, std::vector<int>(c.views, 4), 3);
    IdaConfig cfg;
    cfg.rho = c.rho;
    cfg.l = 2;
    cfg.ridge = c.ridge;
    cfg.centering = c.centering;
    cfg.eps_gamma = 1e-20;
    cfg.max_gamma_iters = 2000;
    const LossResult r = loss_value(inst.h, inst.labels, cfg, 3);
    const std::vector<Matrix> grads = loss_gradient(inst.h, inst.labels, cfg, r.projection);
    for (int d = 0; d < c.views; ++d) {
      auto f = [&](const Matrix& hd) {
        std::vector<Matrix> hs = inst.h;
        hs[static_cast<std::size_t>(d)] = hd;
        return frozen_loss(hs, inst.labels, cfg, r.projection);
      };
      const Matrix fd = oracle::central_difference(f, inst.h[static_cast<std::size_t>(d)], 1e-5);
      CHECK(oracle::relative_error(grads[static_cast<std::size_t>(d)], fd) < 1e-4);
    }
  }
}

TEST_CASE("loss_gradient rows sum to zero (translation invariance)") {
  std::mt19937_64 rng(8);
  const Instance inst = random_instance(rng, 3, 30, {4, 5, 3}, 3);
  IdaConfig cfg;
  cfg.l = 2;
  const LossResult r = loss_value(inst.h, inst.labels, cfg, 1);
  for (const Matrix& g : loss_gradient(inst.h, inst.labels, cfg, r.projection)) {
    CHECK(g.colwise().sum().cwiseAbs().maxCoeff() < 1e-8);
  }
  std::vector<Matrix> shifted = inst.h;
  shifted[0].rowwise() += RowVector::Constant(4, 2.0);
  CHECK(std::abs(loss_value(shifted, inst.labels, cfg, 1).loss - r.loss) < 1e-8);
}

TEST_CASE("loss_gradient permutes with the samples") {
  std::mt19937_64 rng(9);
  const Instance inst = random_instance(rng, 2, 30, {4, 4}, 3);
  IdaConfig cfg;
  cfg.l = 2;
  const LossResult r = loss_value(inst.h, inst.labels, cfg, 1);
  const std::vector<Matrix> g = loss_gradient(inst.h, inst.labels, cfg, r.projection);

  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Instance p;
  p.labels.num_classes = 3;
  for (int i : perm) p.labels.ids.push_back(inst.labels.ids[static_cast<std::size_t>(i)]);
  for (const Matrix& h : inst.h) {
    Matrix ph(h.rows(), h.cols());
    for (int i = 0; i < 30; ++i) ph.row(i) = h.row(perm[static_cast<std::size_t>(i)]);
    p.h.push_back(ph);
  }
  const std::vector<Matrix> pg = loss_gradient(p.h, p.labels, cfg, r.projection);
  for (std::size_t d = 0; d < 2; ++d) {
    for (int i = 0; i < 30; ++i) {
      CHECK((pg[d].row(i) - g[d].row(perm[static_cast<std::size_t>(i)])).norm() < 1e-10);
    }
  }
}

TEST_CASE("loss_gradient rejects a mismatched projection") {
  std::mt19937_64 rng(10);
  const Instance inst = random_instance(rng, 2, 30, {4, 4}, 3);
  IdaConfig cfg;
  cfg.l = 2;
  LossResult r = loss_value(inst.h, inst.labels, cfg, 1);
  r.projection.gammas[1] = Matrix::Zero(3, 2);
  CHECK_THROWS_AS(loss_gradient(inst.h, inst.labels, cfg, r.projection), Error);
}
