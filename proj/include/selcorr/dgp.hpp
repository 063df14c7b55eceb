#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "selcorr/dataset.hpp"
#include "selcorr/rng.hpp"

namespace selcorr {

enum class ErrorLaw { Normal, Logistic, T3, T2 };
enum class SelectionForm { Benchmark, LogVariant, ExpVariant, LogExpVariant };

const char* error_law_name(ErrorLaw law);
const char* selection_form_name(SelectionForm form);
std::optional<ErrorLaw> error_law_from_name(const std::string& name);
std::optional<SelectionForm> selection_form_from_name(const std::string& name);

// Simulation design: 10 covariates with adjacent latent correlation 0.5,
// selection error from a standardized law, outcome error U = rho·eps + sqrt(1-rho²)·e,
// and a selection index h(x) shifted by a constant c calibrated to the target
// censoring rate Pr(D = 0).
struct SimulationDesign {
  std::size_t n = 1000;
  Vec beta = Vec::Ones(10);
  double rho = 0.5;
  ErrorLaw error_law = ErrorLaw::Normal;
  double censor_target = 0.5;
  SelectionForm h_form = SelectionForm::Benchmark;
  std::optional<double> c;  // calibrated constant; set by calibrate_constant
  std::uint64_t seed = 1;

  int dim_x() const { return static_cast<int>(beta.size()); }
};

// Latent tridiagonal-Gaussian copula draw: X1 = Z1, X2 = Phi(Z2),
// Xk = 1{Zk > 0} for k >= 3, with corr(Zk, Zk+1) = 0.5.
MatRM generate_covariates(std::size_t n, Rng rng);

struct ErrorDraws {
  std::vector<double> eps;
  std::vector<double> u;
};

ErrorDraws draw_errors(ErrorLaw law, double rho, std::size_t n, Rng rng);

// Selection index h(x) for a 10-covariate point, including the constant c.
// log(x²) at x = 0 maps to a large negative value (never selected).
double selection_index(SelectionForm form, const double* x, double c);

// Bisection on c over a fixed calibration sample of 10^6 (X, eps) draws until the
// empirical censoring rate is within 0.002 of the target. Deterministic given seed.
double calibrate_constant(const SimulationDesign& design, Rng rng);

// Full sample: covariates, errors, d_i = 1{h(x_i) >= eps_i}, y_i = (x_i'beta + u_i)·d_i.
// Requires design.c to be set.
Dataset generate_sample(const SimulationDesign& design, Rng rng);

// First n/2 rows drawn from the design, rows n/2..n-1 exact copies in order.
Dataset generate_repeated_sample(const SimulationDesign& design, Rng rng);

std::vector<std::string> default_column_names(int dim_x);

// Stable identity for calibration caching: depends on everything c depends on
// (h form, error law, censor target, calibration seed) and nothing else.
std::uint64_t calibration_key(const SimulationDesign& design, std::uint64_t calib_seed);

}  // namespace selcorr
