#include <doctest.h>

#include <cmath>

#include "selcorr/dgp.hpp"
#include "selcorr/errors.hpp"
#include "selcorr/mathx.hpp"

using namespace selcorr;

TEST_CASE("covariate marginals at scale") {
  const std::size_t n = 1000000;
  const MatRM x = generate_covariates(n, Rng(11));
  std::vector<double> x1(n), z2(n);
  double sum2 = 0.0;
  std::vector<double> binary_means(8, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    x1[i] = x(row, 0);
    z2[i] = normal_quantile(x(row, 1));
    sum2 += x(row, 1);
    for (int k = 2; k < 10; ++k) binary_means[static_cast<std::size_t>(k - 2)] += x(row, k);
  }
  CHECK(std::fabs(mean(x1)) < 0.01);
  CHECK(sum2 / static_cast<double>(n) == doctest::Approx(0.5).epsilon(0.02));
  for (double b : binary_means)
    CHECK(b / static_cast<double>(n) == doctest::Approx(0.5).epsilon(0.02));

  // Latent adjacent correlation 0.5: x2 = Phi(z2) recovers z2 exactly.
  CHECK(correlation(x1, z2) == doctest::Approx(0.5).epsilon(0.04));

  // Non-adjacent latent correlation is zero: x1 against the recentred binary x3.
  std::vector<double> x3(n);
  for (std::size_t i = 0; i < n; ++i)
    x3[i] = 2.0 * x(static_cast<Eigen::Index>(i), 2) - 1.0;
  CHECK(std::fabs(correlation(x1, x3)) < 0.02);
}

TEST_CASE("error laws have the documented scale") {
  const std::size_t n = 1000000;
  SUBCASE("rho = 0 decorrelates") {
    const ErrorDraws e = draw_errors(ErrorLaw::Normal, 0.0, n, Rng(3));
    CHECK(std::fabs(correlation(e.eps, e.u)) < 0.01);
  }
  SUBCASE("rho = 0.5 normal") {
    const ErrorDraws e = draw_errors(ErrorLaw::Normal, 0.5, n, Rng(4));
    CHECK(correlation(e.eps, e.u) == doctest::Approx(0.5).epsilon(0.02));
  }
  SUBCASE("logistic unit variance") {
    const ErrorDraws e = draw_errors(ErrorLaw::Logistic, 0.5, n, Rng(5));
    CHECK(stddev_pop(e.eps) == doctest::Approx(1.0).epsilon(0.01));
  }
  SUBCASE("t3 standardized") {
    const ErrorDraws e = draw_errors(ErrorLaw::T3, 0.5, n, Rng(6));
    CHECK(std::fabs(mean(e.eps)) < 0.01);
    CHECK(stddev_pop(e.eps) == doctest::Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("selection index forms") {
  std::vector<double> zero(10, 0.0);
  CHECK(selection_index(SelectionForm::Benchmark, zero.data(), 0.0) == 0.0);

  std::vector<double> pt(10, 0.0);
  pt[0] = 1.0;
  pt[1] = 1.0;
  pt[2] = 1.0;
  pt[3] = 1.0;
  CHECK(selection_index(SelectionForm::Benchmark, pt.data(), 0.0) ==
        doctest::Approx(1.0).epsilon(1e-14));

  // exp variant at the origin: 0 + 1 - 0 - 1 + 0 - 0 = 0.
  CHECK(selection_index(SelectionForm::ExpVariant, zero.data(), 0.0) ==
        doctest::Approx(0.0).epsilon(1e-14));

  // log variant at x1 = 0 hits the guard (never selected).
  std::vector<double> at_zero_x1(10, 0.0);
  at_zero_x1[1] = 1.0;
  CHECK(selection_index(SelectionForm::LogVariant, at_zero_x1.data(), 0.0) < -1e9);

  // constant shift enters every form.
  CHECK(selection_index(SelectionForm::Benchmark, zero.data(), 2.5) == 2.5);
}

TEST_CASE("calibration hits the target censoring and is deterministic") {
  SimulationDesign design;
  design.n = 100000;
  design.censor_target = 0.5;
  const double c = calibrate_constant(design, Rng(77).split(999));
  design.c = c;
  const Dataset sample = generate_sample(design, Rng(12));
  const double censoring = 1.0 - sample.selection_rate();
  CHECK(censoring == doctest::Approx(0.5).epsilon(0.02));

  SimulationDesign hard = design;
  hard.censor_target = 0.75;
  hard.c.reset();
  const double c75 = calibrate_constant(hard, Rng(77).split(999));
  hard.c = c75;
  const Dataset sample75 = generate_sample(hard, Rng(13));
  CHECK(1.0 - sample75.selection_rate() == doctest::Approx(0.75).epsilon(0.02));
  CHECK(c75 < c);  // more censoring needs a smaller constant

  // Deterministic given the seed.
  SimulationDesign again = design;
  again.c.reset();
  CHECK(calibrate_constant(again, Rng(77).split(999)) == c);
}

TEST_CASE("generated samples satisfy the model identities") {
  SimulationDesign design;
  design.n = 50000;
  design.c = 0.0;
  const Dataset sample = generate_sample(design, Rng(21));
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (sample.d_at(i) == 0) CHECK(sample.y_at(i) == 0.0);
  }
  // Determinism.
  const Dataset sample2 = generate_sample(design, Rng(21));
  CHECK(sample.y() == sample2.y());
  CHECK(sample.x() == sample2.x());
}

TEST_CASE("rho = 0 leaves OLS on the selected sample unbiased") {
  SimulationDesign design;
  design.n = 100000;
  design.rho = 0.0;
  design.c = 0.0;
  const Dataset sample = generate_sample(design, Rng(31));

  std::size_t selected = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) selected += sample.d_at(i) == 1;
  Mat x(selected, 11);
  Vec y(static_cast<Eigen::Index>(selected));
  std::size_t r = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (sample.d_at(i) != 1) continue;
    x.block(static_cast<Eigen::Index>(r), 0, 1, 10) = sample.x_row(i);
    x(static_cast<Eigen::Index>(r), 10) = 1.0;  // intercept for the OLS oracle only
    y[static_cast<Eigen::Index>(r)] = sample.y_at(i);
    ++r;
  }
  const Vec ols = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  for (int k = 0; k < 10; ++k) CHECK(ols[k] == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("repeated samples duplicate rows exactly") {
  SimulationDesign design;
  design.n = 4;
  design.c = 0.0;
  const Dataset tiny = generate_repeated_sample(design, Rng(5));
  CHECK(tiny.size() == 4);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(tiny.y_at(i) == tiny.y_at(i + 2));
    CHECK(tiny.d_at(i) == tiny.d_at(i + 2));
    CHECK((tiny.x_row(i) - tiny.x_row(i + 2)).norm() == 0.0);
  }

  design.n = 1000;
  const Dataset big = generate_repeated_sample(design, Rng(6));
  for (std::size_t i = 0; i < 500; ++i) {
    CHECK(big.y_at(i) == big.y_at(i + 500));
    CHECK((big.x_row(i) - big.x_row(i + 500)).norm() == 0.0);
  }

  design.n = 5;
  CHECK_THROWS_AS(generate_repeated_sample(design, Rng(7)), std::invalid_argument);
}

TEST_CASE("censoring concentrates at scale") {
  SimulationDesign design;
  design.n = 100000;
  design.censor_target = 0.5;
  design.c = calibrate_constant(design, Rng(1).split(999));
  for (std::uint64_t seed : {100ULL, 200ULL, 300ULL}) {
    const Dataset sample = generate_sample(design, Rng(seed));
    CHECK(std::fabs((1.0 - sample.selection_rate()) - 0.5) <= 0.01);
  }
}

TEST_CASE("calibration keys depend on the calibration-relevant fields only") {
  SimulationDesign a, b;
  b.rho = 0.9;  // rho does not enter censoring
  CHECK(calibration_key(a, 7) == calibration_key(b, 7));
  b.censor_target = 0.75;
  CHECK(calibration_key(a, 7) != calibration_key(b, 7));
  SimulationDesign c;
  c.error_law = ErrorLaw::T3;
  CHECK(calibration_key(a, 7) != calibration_key(c, 7));
  CHECK(calibration_key(a, 7) != calibration_key(a, 8));
}
