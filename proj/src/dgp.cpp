#include "selcorr/dgp.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

#include "selcorr/errors.hpp"
#include "selcorr/mathx.hpp"
#include "selcorr/parallel.hpp"

namespace selcorr {

namespace {

constexpr double kLogOfZeroGuard = -1e10;
constexpr std::size_t kCalibrationDraws = 1000000;
constexpr double kCalibrationTol = 0.002;
constexpr int kCalibrationMaxIter = 200;

// Lower Cholesky factor of the 10x10 tridiagonal correlation matrix with 0.5
// off-diagonals (positive definite: min eigenvalue 1 - cos(pi/11)).
const Mat& latent_cholesky() {
  static const Mat L = [] {
    Mat sigma = Mat::Identity(10, 10);
    for (int i = 0; i + 1 < 10; ++i) {
      sigma(i, i + 1) = 0.5;
      sigma(i + 1, i) = 0.5;
    }
    return Mat(sigma.llt().matrixL());
  }();
  return L;
}

double standardized_eps(ErrorLaw law, Rng& rng) {
  switch (law) {
    case ErrorLaw::Normal:
      return rng.normal();
    case ErrorLaw::Logistic: {
      // scale sqrt(3)/pi gives unit variance
      const double u = rng.uniform_open();
      return (std::sqrt(3.0) / M_PI) * std::log(u / (1.0 - u));
    }
    case ErrorLaw::T3: {
      const double z = rng.normal();
      double w = 0.0;
      for (int j = 0; j < 3; ++j) {
        const double g = rng.normal();
        w += g * g;
      }
      return z / std::sqrt(w / 3.0) / std::sqrt(3.0);  // t(3) standardized to unit variance
    }
    case ErrorLaw::T2: {
      // Raw t(2): infinite variance, used as-is.
      const double z = rng.normal();
      double w = 0.0;
      for (int j = 0; j < 2; ++j) {
        const double g = rng.normal();
        w += g * g;
      }
      return z / std::sqrt(w / 2.0);
    }
  }
  return 0.0;
}

}  // namespace

const char* error_law_name(ErrorLaw law) {
  switch (law) {
    case ErrorLaw::Normal: return "normal";
    case ErrorLaw::Logistic: return "logistic";
    case ErrorLaw::T3: return "t3";
    case ErrorLaw::T2: return "t2";
  }
  return "unknown";
}

const char* selection_form_name(SelectionForm form) {
  switch (form) {
    case SelectionForm::Benchmark: return "benchmark";
    case SelectionForm::LogVariant: return "log";
    case SelectionForm::ExpVariant: return "exp";
    case SelectionForm::LogExpVariant: return "logexp";
  }
  return "unknown";
}

std::optional<ErrorLaw> error_law_from_name(const std::string& name) {
  if (name == "normal") return ErrorLaw::Normal;
  if (name == "logistic") return ErrorLaw::Logistic;
  if (name == "t3") return ErrorLaw::T3;
  if (name == "t2") return ErrorLaw::T2;
  return std::nullopt;
}

std::optional<SelectionForm> selection_form_from_name(const std::string& name) {
  if (name == "benchmark") return SelectionForm::Benchmark;
  if (name == "log") return SelectionForm::LogVariant;
  if (name == "exp") return SelectionForm::ExpVariant;
  if (name == "logexp") return SelectionForm::LogExpVariant;
  return std::nullopt;
}

MatRM generate_covariates(std::size_t n, Rng rng) {
  if (n == 0) throw std::invalid_argument("generate_covariates: n must be >= 1");
  const Mat& L = latent_cholesky();
  MatRM x(n, 10);
  Vec zeta(10), z(10);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j = 0; j < 10; ++j) zeta[j] = rng.normal();
    z = L * zeta;
    x(static_cast<Eigen::Index>(i), 0) = z[0];
    x(static_cast<Eigen::Index>(i), 1) = normal_cdf(z[1]);
    for (int j = 2; j < 10; ++j)
      x(static_cast<Eigen::Index>(i), j) = z[j] > 0.0 ? 1.0 : 0.0;
  }
  return x;
}

ErrorDraws draw_errors(ErrorLaw law, double rho, std::size_t n, Rng rng) {
  Rng rng_eps = rng.split(0);
  Rng rng_e = rng.split(1);
  ErrorDraws out;
  out.eps.resize(n);
  out.u.resize(n);
  const double mix = std::sqrt(1.0 - rho * rho);
  for (std::size_t i = 0; i < n; ++i) {
    out.eps[i] = standardized_eps(law, rng_eps);
    out.u[i] = rho * out.eps[i] + mix * rng_e.normal();
  }
  return out;
}

double selection_index(SelectionForm form, const double* x, double c) {
  const double x1 = x[0], x2 = x[1];
  const double interact = x[2] * x[3] - x[4] * x[5];
  auto log_sq = [](double v) { return v == 0.0 ? kLogOfZeroGuard : std::log(v * v); };
  switch (form) {
    case SelectionForm::Benchmark:
      return c + x1 + x1 * x1 - x2 - x2 * x2 + interact;
    case SelectionForm::LogVariant:
      return c + x1 + log_sq(x1) - x2 - log_sq(x2) + interact;
    case SelectionForm::ExpVariant:
      return c + x1 + std::exp(x1) - x2 - std::exp(x2) + interact;
    case SelectionForm::LogExpVariant:
      return c + x1 + std::exp(x1) + log_sq(x1) - x2 - std::exp(x2) - log_sq(x2) + interact;
  }
  return c;
}

double calibrate_constant(const SimulationDesign& design, Rng rng) {
  if (!(design.censor_target > 0.02 && design.censor_target < 0.98))
    throw std::invalid_argument("calibrate_constant: censor_target must be in (0.02, 0.98)");

  // Residual r_i = eps_i - h0(x_i); censoring(c) = mean(r_i > c) is decreasing in c.
  const MatRM x = generate_covariates(kCalibrationDraws, rng.split(1));
  Rng rng_eps = rng.split(2).split(0);
  std::vector<double> resid(kCalibrationDraws);
  for (std::size_t i = 0; i < kCalibrationDraws; ++i) {
    const double eps = standardized_eps(design.error_law, rng_eps);
    resid[i] = eps - selection_index(design.h_form, x.row(static_cast<Eigen::Index>(i)).data(), 0.0);
  }

  auto censoring_at = [&](double c) {
    std::size_t count = 0;
    for (double r : resid)
      if (r > c) ++count;
    return static_cast<double>(count) / static_cast<double>(resid.size());
  };

  double lo = -1.0, hi = 1.0;
  int expand = 0;
  while (censoring_at(lo) < design.censor_target) {  // need smaller c
    lo *= 2.0;
    if (++expand > 60) throw calibration_error("calibrate_constant: bracket failure (low)");
  }
  expand = 0;
  while (censoring_at(hi) > design.censor_target) {
    hi *= 2.0;
    if (++expand > 60) throw calibration_error("calibrate_constant: bracket failure (high)");
  }

  for (int iter = 0; iter < kCalibrationMaxIter; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double rate = censoring_at(mid);
    if (std::fabs(rate - design.censor_target) < kCalibrationTol) return mid;
    if (rate > design.censor_target)
      lo = mid;
    else
      hi = mid;
  }
  throw calibration_error("calibrate_constant: no convergence after 200 bisection steps");
}

std::vector<std::string> default_column_names(int dim_x) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(dim_x));
  for (int j = 1; j <= dim_x; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

namespace {

Dataset assemble_sample(const SimulationDesign& design, std::size_t n, Rng rng) {
  const double c = design.c.value();
  MatRM x = generate_covariates(n, rng.split(1));
  const ErrorDraws err = draw_errors(design.error_law, design.rho, n, rng.split(2));
  Vec y(static_cast<Eigen::Index>(n));
  Eigen::VectorXi d(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double h = selection_index(design.h_form, x.row(row).data(), c);
    const int di = h >= err.eps[i] ? 1 : 0;
    d[row] = di;
    y[row] = di == 1 ? x.row(row).dot(design.beta) + err.u[i] : 0.0;
  }
  return Dataset(std::move(x), std::move(y), std::move(d), default_column_names(design.dim_x()));
}

}  // namespace

Dataset generate_sample(const SimulationDesign& design, Rng rng) {
  if (!design.c.has_value())
    throw std::invalid_argument("generate_sample: design.c not calibrated");
  return assemble_sample(design, design.n, rng);
}

Dataset generate_repeated_sample(const SimulationDesign& design, Rng rng) {
  if (design.n % 2 != 0)
    throw std::invalid_argument("generate_repeated_sample: n must be even");
  if (!design.c.has_value())
    throw std::invalid_argument("generate_repeated_sample: design.c not calibrated");
  const std::size_t half = design.n / 2;
  const Dataset base = assemble_sample(design, half, rng);

  MatRM x(design.n, base.dim_x());
  Vec y(static_cast<Eigen::Index>(design.n));
  Eigen::VectorXi d(static_cast<Eigen::Index>(design.n));
  for (std::size_t i = 0; i < half; ++i) {
    const auto src = static_cast<Eigen::Index>(i);
    x.row(src) = base.x().row(src);
    x.row(static_cast<Eigen::Index>(i + half)) = base.x().row(src);
    y[src] = base.y()[src];
    y[static_cast<Eigen::Index>(i + half)] = base.y()[src];
    d[src] = base.d()[src];
    d[static_cast<Eigen::Index>(i + half)] = base.d()[src];
  }
  return Dataset(std::move(x), std::move(y), std::move(d), base.column_names());
}

std::uint64_t calibration_key(const SimulationDesign& design, std::uint64_t calib_seed) {
  std::uint64_t key = Rng::mix(0x5e1c0aaULL, calib_seed);
  key = Rng::mix(key, static_cast<std::uint64_t>(design.h_form));
  key = Rng::mix(key, static_cast<std::uint64_t>(design.error_law));
  key = Rng::mix(key, static_cast<std::uint64_t>(std::llround(design.censor_target * 1e9)));
  return key;
}

}  // namespace selcorr
