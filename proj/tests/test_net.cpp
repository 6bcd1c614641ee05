#include "deepida/error.hpp"
#include "deepida/net.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace deepida;
using namespace deepida::net;

namespace {

using Loss = std::function<double(const MlpModel&)>;

double weighted_output(const MlpModel& model, const Matrix& x, const Matrix& r) {
  return (predict(model, x).array() * r.array()).sum();
}

/// Central differences over one parameter block, perturbed through `get`.
Matrix fd_block(const MlpModel& model, const Loss& loss,
                const std::function<Eigen::Ref<Matrix>(MlpModel&)>& get, double step) {
  MlpModel work = model;
  const Eigen::Index rows = get(work).rows();
  const Eigen::Index cols = get(work).cols();
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double orig = get(work)(i, j);
      get(work)(i, j) = orig + step;
      const double up = loss(work);
      get(work)(i, j) = orig - step;
      const double down = loss(work);
      get(work)(i, j) = orig;
      out(i, j) = (up - down) / (2.0 * step);
    }
  }
  return out;
}

double max_param_error(const MlpModel& model, const Matrix& x, const Matrix& r) {
  const ForwardResult fr = forward(model, x);
  const ParamGrads g = backward(model, fr.tape, r);
  const Loss loss = [&](const MlpModel& m) { return weighted_output(m, x, r); };
  double worst = 0.0;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    worst = std::max(worst, oracle::relative_error(
                                g.layers[i].weight,
                                fd_block(model, loss, [i](MlpModel& m) -> Eigen::Ref<Matrix> {
                                  return m.layers[i].weight;
                                }, 1e-5)));
    const auto vec_fd = [&](Vector Layer::*member) {
      return fd_block(model, loss, [i, member](MlpModel& m) -> Eigen::Ref<Matrix> {
        return m.layers[i].*member;
      }, 1e-5);
    };
    worst = std::max(worst, oracle::relative_error(g.layers[i].bias, vec_fd(&Layer::bias)));
    if (model.layers[i].spec.batch_norm) {
      worst = std::max(worst,
                       oracle::relative_error(g.layers[i].bn_scale, vec_fd(&Layer::bn_scale)));
      worst = std::max(worst,
                       oracle::relative_error(g.layers[i].bn_shift, vec_fd(&Layer::bn_shift)));
    }
  }
  const Matrix fd_x = oracle::central_difference(
      [&](const Matrix& xx) { return weighted_output(model, xx, r); }, x, 1e-5);
  return std::max(worst, oracle::relative_error(g.input, fd_x));
}

/// Perturb every parameter so batch-norm scale/shift are not at their
/// symmetric initial values.
void jitter(MlpModel& model, std::mt19937_64& rng) {
  for (Layer& layer : model.layers) {
    layer.bias = 0.3 * oracle::random_matrix(layer.bias.size(), 1, rng);
    if (layer.spec.batch_norm) {
      layer.bn_scale.array() += 0.3 * oracle::random_matrix(layer.bn_scale.size(), 1, rng).array();
      layer.bn_shift = 0.3 * oracle::random_matrix(layer.bn_shift.size(), 1, rng);
      layer.running_mean = 0.2 * oracle::random_matrix(layer.running_mean.size(), 1, rng);
      layer.running_var.array() += 0.5;
    }
  }
}

}  // namespace

TEST_CASE("init_model is deterministic and shaped by its layer specs") {
  const std::vector<LayerSpec> specs = {{4, 3, Activation::LeakyRelu, 0.1, true},
                                        {3, 2, Activation::Identity, 0.1, false}};
  const MlpModel a = init_model(specs, 42);
  const MlpModel b = init_model(specs, 42);
  const MlpModel c = init_model(specs, 43);
  CHECK(a.layers[0].weight.rows() == 3);
  CHECK(a.layers[0].weight.cols() == 4);
  CHECK(a.layers[1].weight.rows() == 2);
  CHECK(a.layers[1].weight.cols() == 3);
  CHECK(a.layers[0].weight == b.layers[0].weight);
  CHECK(a.layers[1].weight == b.layers[1].weight);
  CHECK(a.layers[0].weight != c.layers[0].weight);
  CHECK(a.layers[0].bias.isZero());
  CHECK(a.layers[0].bn_scale.isOnes());
  CHECK(a.layers[1].bn_scale.size() == 0);
  CHECK(a.parameter_count() == 12 + 3 + 3 + 3 + 6 + 2);
}

TEST_CASE("init_model weight scale follows fan-in") {
  const MlpModel m = init_model({{512, 20, Activation::LeakyRelu, 0.1, false}}, 7);
  const Matrix& w = m.layers[0].weight;
  REQUIRE(w.size() == 10240);
  const double mean = w.mean();
  const double sd = std::sqrt((w.array() - mean).square().sum() / static_cast<double>(w.size() - 1));
  CHECK(std::abs(sd - std::sqrt(2.0 / 512.0)) < 0.1 * std::sqrt(2.0 / 512.0));
  CHECK(w.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 512.0));
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(init_model({}, 1), Error);
  CHECK_THROWS_AS(init_model({{4, 3}, {2, 2}}, 1), Error);
  CHECK_THROWS_AS(init_model({{4, 0}}, 1), Error);
  CHECK_THROWS_AS(init_model({{4, 3, Activation::LeakyRelu, 1.5, false}}, 1), Error);
  try {
    init_model({{4, 3}, {2, 2}}, 1);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InvalidSpec);
  }
}

TEST_CASE("default_layers caps hidden widths") {
  const auto wide = default_layers(1000);
  REQUIRE(wide.size() == 4);
  CHECK(wide[0].out_dim == 512);
  CHECK(wide[1].out_dim == 256);
  CHECK(wide[2].out_dim == 64);
  CHECK(wide[3].out_dim == 20);
  CHECK(wide[0].batch_norm);
  CHECK_FALSE(wide[3].batch_norm);
  const auto narrow = default_layers(100);
  CHECK(narrow[0].out_dim == 100);
  CHECK(narrow[1].out_dim == 100);
  CHECK(narrow[2].out_dim == 64);
  const auto tiny = default_layers(8, {512, 256, 64}, 4);
  CHECK(tiny[0].out_dim == 8);
  CHECK(tiny[3].out_dim == 4);
  CHECK_NOTHROW(validate_specs(tiny));
}

TEST_CASE("forward examples") {
  SUBCASE("zero weights with identity activation give the biases") {
    MlpModel m = init_model({{3, 2, Activation::Identity, 0.1, false}}, 1);
    m.layers[0].weight.setZero();
    m.layers[0].bias << 1.5, -2.0;
    const Matrix h = predict(m, Matrix::Random(5, 3));
    for (Eigen::Index i = 0; i < 5; ++i) {
      CHECK(h(i, 0) == 1.5);
      CHECK(h(i, 1) == -2.0);
    }
  }
  SUBCASE("leaky relu slope") {
    MlpModel m = init_model({{1, 1, Activation::LeakyRelu, 0.1, false}}, 1);
    m.layers[0].weight(0, 0) = 1.0;
    Matrix x(2, 1);
    x << -2.0, 3.0;
    const Matrix h = predict(m, x);
    CHECK(h(0, 0) == doctest::Approx(-0.2).epsilon(1e-15));
    CHECK(h(1, 0) == 3.0);
  }
  SUBCASE("train-mode batch norm standardizes each column") {
    std::mt19937_64 rng(3);
    const MlpModel m = init_model({{5, 6, Activation::LeakyRelu, 0.1, true}}, 2);
    const Matrix x = 100.0 * oracle::random_matrix(50, 5, rng);
    const Matrix h = predict(m, x);
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      const double mean = h.col(j).mean();
      const double var = (h.col(j).array() - mean).square().mean();
      CHECK(std::abs(mean) < 1e-6);
      CHECK(std::abs(var - 1.0) < 1e-6);
    }
  }
  SUBCASE("shape and batch errors") {
    MlpModel m = init_model(default_layers(4, {6}, 3), 1);
    try {
      forward(m, Matrix::Zero(3, 5));
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ShapeMismatch);
    }
    try {
      forward(m, Matrix::Zero(1, 4));
      FAIL("expected InvalidBatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidBatch);
    }
    m.mode = Mode::Eval;
    CHECK_NOTHROW(forward(m, Matrix::Zero(1, 4)));
  }
}

TEST_CASE("eval mode is independent of batch composition") {
  std::mt19937_64 rng(4);
  MlpModel m = init_model(default_layers(6, {8, 5}, 3), 9);
  jitter(m, rng);
  m.mode = Mode::Eval;
  const Matrix x = oracle::random_matrix(12, 6, rng);
  const Matrix full = predict(m, x);
  for (Eigen::Index i = 0; i < 12; ++i) {
    CHECK((predict(m, x.row(i)) - full.row(i)).norm() < 1e-13);
  }
  CHECK((predict(m, x.topRows(5)) - full.topRows(5)).norm() < 1e-13);
}

TEST_CASE("backward examples") {
  std::mt19937_64 rng(5);
  SUBCASE("zero upstream gives zero gradients") {
    const MlpModel m = init_model(default_layers(6, {8, 5}, 3), 1);
    const Matrix x = oracle::random_matrix(10, 6, rng);
    const ForwardResult fr = forward(m, x);
    const ParamGrads g = backward(m, fr.tape, Matrix::Zero(10, 3));
    for (const LayerGrads& lg : g.layers) {
      CHECK(lg.weight.isZero());
      CHECK(lg.bias.isZero());
      CHECK(lg.bn_scale.isZero());
      CHECK(lg.bn_shift.isZero());
    }
  }
  SUBCASE("single linear layer") {
    const MlpModel m = init_model({{4, 3, Activation::Identity, 0.1, false}}, 1);
    const Matrix x = oracle::random_matrix(7, 4, rng);
    const Matrix gh = oracle::random_matrix(7, 3, rng);
    const ParamGrads g = backward(m, forward(m, x).tape, gh);
    CHECK((g.layers[0].weight - gh.transpose() * x).norm() < 1e-12);
    CHECK((g.layers[0].bias - gh.colwise().sum().transpose()).norm() < 1e-12);
  }
  SUBCASE("forward and backward leave the model untouched") {
    MlpModel m = init_model(default_layers(6, {8, 5}, 3), 1);
    const MlpModel before = m;
    const ForwardResult fr = forward(m, oracle::random_matrix(10, 6, rng));
    backward(m, fr.tape, oracle::random_matrix(10, 3, rng));
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
      CHECK(m.layers[i].weight == before.layers[i].weight);
      CHECK(m.layers[i].running_mean == before.layers[i].running_mean);
      CHECK(m.layers[i].running_var == before.layers[i].running_var);
    }
    CHECK(m.revision == before.revision);
  }
  SUBCASE("a stale tape is rejected") {
    MlpModel m = init_model(default_layers(6, {8, 5}, 3), 1);
    const ForwardResult fr = forward(m, oracle::random_matrix(10, 6, rng));
    update_running_stats(m, fr.tape);
    try {
      backward(m, fr.tape, Matrix::Zero(10, 3));
      FAIL("expected InvalidTape");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidTape);
    }
  }
}

TEST_CASE("parameter gradients match central differences") {
  struct Config {
    Eigen::Index input;
    std::vector<Eigen::Index> hidden;
    Eigen::Index output;
    bool batch_norm;
    Mode mode;
  };
  const std::vector<Config> grid = {
      {6, {512, 256, 64}, 4, true, Mode::Train},
      {6, {512, 256, 64}, 4, true, Mode::Eval},
      {6, {512, 256, 64}, 4, false, Mode::Train},
      {5, {7}, 3, true, Mode::Train},
      {3, {}, 2, false, Mode::Train},
  };
  for (const Config& c : grid) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      std::mt19937_64 rng(seed * 31);
      MlpModel m = init_model(default_layers(c.input, c.hidden, c.output, 0.1, c.batch_norm), seed);
      jitter(m, rng);
      m.mode = c.mode;
      const Matrix x = oracle::random_matrix(9, c.input, rng);
      const Matrix r = oracle::random_matrix(9, c.output, rng);
      CHECK(max_param_error(m, x, r) < 1e-4);
    }
  }
}

TEST_CASE("update_running_stats follows the moving average") {
  std::mt19937_64 rng(6);
  MlpModel m = init_model({{3, 4, Activation::Identity, 0.1, true}}, 1);
  const Matrix x = oracle::random_matrix(10, 3, rng);
  const ForwardResult fr = forward(m, x);
  const Matrix pre = x * m.layers[0].weight.transpose();
  update_running_stats(m, fr.tape);
  const Vector mean = pre.colwise().mean().transpose();
  const Vector var =
      ((pre.rowwise() - mean.transpose()).array().square().colwise().sum() / 9.0).transpose();
  CHECK((m.layers[0].running_mean - 0.1 * mean).norm() < 1e-12);
  CHECK((m.layers[0].running_var - (0.9 * Vector::Ones(4) + 0.1 * var)).norm() < 1e-12);
  CHECK(m.revision == 1);
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    MlpModel m = init_model(default_layers(4, {5}, 2), 1);
    const MlpModel before = m;
    AdamState s = AdamState::for_model(m);
    ParamGrads g;
    for (const Layer& l : m.layers) {
      g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()),
                          Vector::Zero(l.bias.size()), Vector::Zero(l.bn_scale.size()),
                          Vector::Zero(l.bn_shift.size())});
    }
    adam_step(m, g, s);
    CHECK(m.layers[0].weight == before.layers[0].weight);
    CHECK(m.layers[1].bias == before.layers[1].bias);
    CHECK(s.step == 1);
  }
  SUBCASE("first step moves by the learning rate against the gradient sign") {
    MlpModel m = init_model({{2, 2, Activation::Identity, 0.1, false}}, 1);
    const MlpModel before = m;
    AdamState s = AdamState::for_model(m);
    ParamGrads g;
    Matrix gw(2, 2);
    gw << 0.5, -3.0, 1e-2, -7.0;
    g.layers.push_back({gw, Vector::Constant(2, 2.0), Vector(), Vector()});
    adam_step(m, g, s);
    const Matrix delta = m.layers[0].weight - before.layers[0].weight;
    for (Eigen::Index i = 0; i < 4; ++i) {
      CHECK(delta(i) == doctest::Approx(-1e-3 * (gw(i) > 0 ? 1.0 : -1.0)).epsilon(1e-5));
    }
  }
  SUBCASE("converges on a quadratic bowl") {
    MlpModel m = init_model({{1, 1, Activation::Identity, 0.1, false}}, 1);
    m.layers[0].weight(0, 0) = 0.0;
    AdamConfig cfg;
    cfg.learning_rate = 0.1;
    AdamState s = AdamState::for_model(m, cfg);
    for (int step = 0; step < 100; ++step) {
      const double w = m.layers[0].weight(0, 0);
      ParamGrads g;
      g.layers.push_back({Matrix::Constant(1, 1, 2.0 * (w - 3.0)), Vector::Zero(1), Vector(),
                          Vector()});
      adam_step(m, g, s);
    }
    CHECK(std::abs(m.layers[0].weight(0, 0) - 3.0) < 0.1);
  }
  SUBCASE("mismatched gradient shapes are rejected") {
    MlpModel m = init_model({{2, 2, Activation::Identity, 0.1, false}}, 1);
    AdamState s = AdamState::for_model(m);
    ParamGrads g;
    g.layers.push_back({Matrix::Zero(3, 2), Vector::Zero(2), Vector(), Vector()});
    try {
      adam_step(m, g, s);
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ShapeMismatch);
    }
  }
}
