#include "deepida/classifier.hpp"
#include "deepida/error.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <limits>
#include <random>

using namespace deepida;
using namespace deepida::classifier;

TEST_CASE("fit_centroids examples") {
  std::mt19937_64 rng(1);
  SUBCASE("one sample per class gives the samples back") {
    const Matrix s = oracle::random_matrix(3, 2, rng);
    const std::vector<Matrix> scores = {s};
    const CentroidSet c = fit_centroids(scores, Labels::from_ids({0, 1, 2}), Space{0});
    CHECK(c.centroids == s);
  }
  SUBCASE("pooled dimension is D * l") {
    const std::vector<Matrix> scores = {oracle::random_matrix(9, 2, rng),
                                        oracle::random_matrix(9, 2, rng),
                                        oracle::random_matrix(9, 2, rng)};
    const Labels labels = Labels::from_ids({0, 1, 2, 0, 1, 2, 0, 1, 2});
    const CentroidSet c = fit_centroids(scores, labels, Space{});
    CHECK(c.dim() == 6);
    CHECK(c.num_classes() == 3);
    CHECK(c.centroids(1, 4) == doctest::Approx((scores[2](1, 0) + scores[2](4, 0) + scores[2](7, 0)) / 3.0));
  }
  SUBCASE("duplicating every row leaves centroids unchanged") {
    const Matrix s = oracle::random_matrix(6, 3, rng);
    Matrix doubled(12, 3);
    doubled << s, s;
    const Labels labels = Labels::from_ids({0, 1, 0, 1, 1, 0});
    const Labels twice = Labels::from_ids({0, 1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 0});
    const std::vector<Matrix> a = {s};
    const std::vector<Matrix> b = {doubled};
    CHECK((fit_centroids(a, labels, Space{0}).centroids -
           fit_centroids(b, twice, Space{0}).centroids).norm() < 1e-14);
  }
  SUBCASE("an empty class is rejected") {
    Labels labels;
    labels.ids = {0, 0, 2};
    labels.num_classes = 3;
    const std::vector<Matrix> s = {oracle::random_matrix(3, 2, rng)};
    try {
      fit_centroids(s, labels, Space{});
      FAIL("expected InvalidLabels");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::InvalidLabels);
    }
  }
}

TEST_CASE("predict examples") {
  std::mt19937_64 rng(2);
  CentroidSet c;
  c.centroids = Matrix(3, 2);
  c.centroids << 0, 0, 2, 0, 0, 5;
  SUBCASE("a centroid is its own class") {
    CHECK(predict(c, c.centroids) == std::vector<int>{0, 1, 2});
  }
  SUBCASE("ties go to the lowest class id") {
    Matrix mid(1, 2);
    mid << 1, 0;
    CHECK(predict(c, mid) == std::vector<int>{0});
  }
  SUBCASE("matches a brute-force distance table") {
    CentroidSet r;
    r.centroids = oracle::random_matrix(4, 3, rng);
    const Matrix pts = oracle::random_matrix(50, 3, rng);
    const std::vector<int> got = predict(r, pts);
    for (Eigen::Index i = 0; i < 50; ++i) {
      int best = -1;
      double best_d = std::numeric_limits<double>::infinity();
      for (int k = 0; k < 4; ++k) {
        double d = 0.0;
        for (int j = 0; j < 3; ++j) d += std::pow(pts(i, j) - r.centroids(k, j), 2);
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      CHECK(got[static_cast<std::size_t>(i)] == best);
    }
  }
  SUBCASE("rigid motions and positive scaling do not change predictions") {
    CentroidSet r;
    r.centroids = oracle::random_matrix(3, 4, rng);
    const Matrix pts = oracle::random_matrix(40, 4, rng);
    const std::vector<int> base = predict(r, pts);
    const Matrix q = oracle::random_matrix(4, 4, rng).householderQr().householderQ();
    const RowVector shift = oracle::random_matrix(1, 4, rng);
    CentroidSet moved;
    moved.centroids = (r.centroids * q).rowwise() + shift;
    CHECK(predict(moved, Matrix((pts * q).rowwise() + shift)) == base);
    CentroidSet scaled;
    scaled.centroids = 3.5 * r.centroids;
    CHECK(predict(scaled, Matrix(3.5 * pts)) == base);
  }
  SUBCASE("dimension mismatch") {
    try {
      predict(c, Matrix::Zero(2, 3));
      FAIL("expected ShapeMismatch");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ShapeMismatch);
    }
  }
}

TEST_CASE("accuracy examples") {
  CHECK(accuracy({0, 1, 2}, {0, 1, 2}) == 1.0);
  CHECK(accuracy({1, 0}, {0, 1}) == 0.0);
  CHECK(accuracy({0, 1, 1, 1}, {0, 1, 0, 1}) == 0.75);
  CHECK_THROWS_AS(accuracy({0}, {0, 1}), Error);
}
