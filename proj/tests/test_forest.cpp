#include <doctest.h>

#include <cmath>

#include "selcorr/forest.hpp"
#include "selcorr/parallel.hpp"

using namespace selcorr;

namespace {

MatRM make_x(const std::vector<std::vector<double>>& rows) {
  MatRM x(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[0].size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return x;
}

Eigen::VectorXi make_d(const std::vector<int>& v) {
  Eigen::VectorXi d(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) d[static_cast<Eigen::Index>(i)] = v[i];
  return d;
}

}  // namespace

TEST_CASE("constant targets clip to the boundaries") {
  const MatRM x = make_x({{0.0}, {1.0}, {2.0}, {3.0}});
  ForestHyperparams hp;
  hp.n_trees = 10;
  hp.min_leaf = 1;

  const PropensityModel ones = fit_random_forest(x, make_d({1, 1, 1, 1}), hp, Rng(1));
  const PropensityModel zeros = fit_random_forest(x, make_d({0, 0, 0, 0}), hp, Rng(1));
  Vec q(1);
  q << 1.5;
  CHECK(predict_propensity(ones, q) == 0.999);
  CHECK(predict_propensity(zeros, q) == 0.001);
}

TEST_CASE("min_leaf = n forces the global mean") {
  const MatRM x = make_x({{0.0}, {1.0}, {2.0}, {3.0}});
  ForestHyperparams hp;
  hp.n_trees = 25;
  hp.min_leaf = 4;  // = n: no split can satisfy both sides
  const PropensityModel model = fit_random_forest(x, make_d({0, 1, 1, 0}), hp, Rng(3));
  // Every tree predicts its bootstrap mean; the ensemble averages those means,
  // which for a single-node tree equals the mean of the drawn targets.
  // With min_leaf = n and a full bootstrap, each tree is a single leaf.
  for (double q : {-1.0, 0.5, 9.0}) {
    Vec point(1);
    point << q;
    const double pred = model.predict_raw(point);
    CHECK(pred >= 0.0);
    CHECK(pred <= 1.0);
    // All leaves are single-node, so the prediction is constant in x.
    Vec other(1);
    other << q + 100.0;
    CHECK(model.predict_raw(other) == pred);
  }
}

TEST_CASE("prediction equals the tree average on a hand-rolled ensemble") {
  // Two stumps built by hand on a 6-point dataset; the model prediction at any
  // x must equal the mean of the two tree predictions.
  RegressionTree t1;
  t1.nodes = {{0, 0.5, 1, 2, 0.0}, {-1, 0.0, -1, -1, 0.25}, {-1, 0.0, -1, -1, 0.75}};
  RegressionTree t2;
  t2.nodes = {{0, 1.5, 1, 2, 0.0}, {-1, 0.0, -1, -1, 0.4}, {-1, 0.0, -1, -1, 1.0}};
  const PropensityModel model({t1, t2}, 1, 0.001, 0.999);

  for (double q : {0.0, 0.7, 1.2, 2.0}) {
    Vec point(1);
    point << q;
    const double expected =
        0.5 * ((q <= 0.5 ? 0.25 : 0.75) + (q <= 1.5 ? 0.4 : 1.0));
    CHECK(model.predict_raw(point) == doctest::Approx(expected).epsilon(1e-15));
  }
}

TEST_CASE("forest learns a step function") {
  Rng rng(17);
  const std::size_t n = 400;
  MatRM x(n, 2);
  Eigen::VectorXi d(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    x(row, 0) = 2.0 * rng.uniform01() - 1.0;
    x(row, 1) = rng.uniform01();
    d[row] = x(row, 0) > 0.0 ? 1 : 0;
  }
  ForestHyperparams hp;
  hp.n_trees = 50;
  hp.min_leaf = 5;
  hp.max_features = 2;
  const PropensityModel model = fit_random_forest(x, d, hp, Rng(4));
  Vec lo(2), hi(2);
  lo << -0.6, 0.5;
  hi << 0.6, 0.5;
  CHECK(predict_propensity(model, lo) < 0.2);
  CHECK(predict_propensity(model, hi) > 0.8);
}

TEST_CASE("forest determinism across seeds and worker counts") {
  Rng rng(8);
  const std::size_t n = 200;
  MatRM x(n, 3);
  Eigen::VectorXi d(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    for (int j = 0; j < 3; ++j) x(row, j) = rng.normal();
    d[row] = rng.uniform01() < 0.5 ? 0 : 1;
  }
  ForestHyperparams hp;
  hp.n_trees = 30;
  hp.min_leaf = 3;
  hp.max_features = 2;

  set_thread_cap(1);
  const PropensityModel serial = fit_random_forest(x, d, hp, Rng(55));
  set_thread_cap(0);
  const PropensityModel parallel = fit_random_forest(x, d, hp, Rng(55));

  Rng qrng(77);
  for (int q = 0; q < 100; ++q) {
    Vec point(3);
    for (int j = 0; j < 3; ++j) point[j] = qrng.normal();
    CHECK(serial.predict_raw(point) == parallel.predict_raw(point));
  }
}

TEST_CASE("clip bounds hold everywhere") {
  Rng rng(31);
  const std::size_t n = 150;
  MatRM x(n, 2);
  Eigen::VectorXi d(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    x(row, 0) = rng.normal();
    x(row, 1) = rng.normal();
    d[row] = x(row, 0) + x(row, 1) > 1.5 ? 1 : 0;
  }
  ForestHyperparams hp;
  hp.n_trees = 20;
  hp.min_leaf = 1;
  const PropensityModel model = fit_random_forest(x, d, hp, Rng(6), 0.05, 0.95);
  Rng qrng(9);
  for (int q = 0; q < 200; ++q) {
    Vec point(2);
    point << qrng.normal(), qrng.normal();
    const double p = predict_propensity(model, point);
    CHECK(p >= 0.05);
    CHECK(p <= 0.95);
  }
}

TEST_CASE("tuning prefers deep trees on a deterministic step target") {
  Rng rng(21);
  const std::size_t n = 300;
  MatRM x(n, 2);
  Eigen::VectorXi d(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    x(row, 0) = 2.0 * rng.uniform01() - 1.0;
    x(row, 1) = rng.normal();
    d[row] = x(row, 0) > 0.0 ? 1 : 0;
  }
  ForestHyperparams deep;
  deep.n_trees = 40;
  deep.min_leaf = 1;
  deep.max_features = 2;
  ForestHyperparams stump = deep;
  stump.min_leaf = static_cast<int>(n);  // cannot split at all

  const ForestHyperparams chosen = tune_forest_cv(x, d, {stump, deep}, 5, Rng(12));
  CHECK(chosen.min_leaf == 1);

  // Singleton grid short-circuits.
  const ForestHyperparams only = tune_forest_cv(x, d, {stump}, 5, Rng(12));
  CHECK(only.min_leaf == stump.min_leaf);

  // Determinism: same grid order and seed agree.
  const ForestHyperparams again = tune_forest_cv(x, d, {stump, deep}, 5, Rng(12));
  CHECK(again.min_leaf == chosen.min_leaf);
}

TEST_CASE("default grid enumerates the documented combinations") {
  const auto grid = default_forest_grid(10);
  CHECK(grid.size() == 8);
  CHECK(grid.front().n_trees == 200);
  CHECK(grid.front().min_leaf == 1);
  CHECK(grid.front().max_features == 4);
  CHECK(grid.back().min_leaf == 25);
  CHECK(grid.back().max_features == 10);
}

TEST_CASE("empty data is rejected") {
  MatRM x(0, 2);
  Eigen::VectorXi d(0);
  ForestHyperparams hp;
  CHECK_THROWS_AS(fit_random_forest(x, d, hp, Rng(1)), std::invalid_argument);
}
