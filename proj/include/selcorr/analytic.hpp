#pragma once

#include <utility>

#include "selcorr/dataset.hpp"
#include "selcorr/dgp.hpp"

namespace selcorr {

// Analytic bivariate-normal model used as a ground-truth oracle for the
// constructive identification argument. eps ~ N(0,1) independent of X, so
// pi(x) = Phi(h(x)), V = Phi(eps), U = rho·eps + sqrt(1-rho²)e, and the
// selectivity correction is g(v) = -rho·phi(Phi^{-1}(v))/v with g(1) = 0.
// Covariate layout matches the simulation designs: x1, x2 continuous,
// the rest discrete with benchmark value 0.
class AnalyticModel {
 public:
  enum class IndexForm {
    Benchmark,      // c + x1 + x1² - x2 - x2²  (+ discrete interactions off the benchmark slice)
    OneContinuous,  // c + x1²  (non-injective in the single continuous covariate)
    Linear,         // eta'xC
    ProbitLinear,   // Phi(eta'xC)
    LogitLinear     // logistic(eta'xC)
  };

  AnalyticModel(IndexForm form, Vec beta, double rho, double c = 0.0,
                Vec eta = Vec::Zero(0));

  int dim_x() const { return static_cast<int>(beta_.size()); }
  int dim_continuous() const { return form_ == IndexForm::OneContinuous ? 1 : 2; }
  const Vec& beta() const { return beta_; }
  double rho() const { return rho_; }

  // Selection index restricted to the benchmark slice x^D = 0.
  double h0(const Vec& xc) const;
  double dh0(const Vec& xc, int k) const;

  // Full-point selection index (benchmark form only off the slice).
  double h(const Vec& x) const;

  double pi(const Vec& x) const { return normal_cdf(h(x)); }
  double pi0(const Vec& xc) const { return normal_cdf(h0(xc)); }
  double dpi0(const Vec& xc, int k) const { return normal_pdf(h0(xc)) * dh0(xc, k); }

  // Selectivity correction and its derivative.
  double g(double v) const;
  double g1(double v) const;

  // Selected-sample regression function m(x) = x'beta + g(pi(x)) and its
  // restriction/partials on the benchmark slice.
  double m(const Vec& x) const;
  double m0(const Vec& xc) const;
  double dm0(const Vec& xc, int k) const;

 private:
  IndexForm form_;
  Vec beta_;
  double rho_;
  double c_;
  Vec eta_;
};

// Solves the 2x2 system in (beta_k, beta_j) from the two point evaluations of
// the derivative identity; throws assumption_violation_error when |det Y| < 1e-8
// (the functional-form rank condition fails at this point pair).
std::pair<double, double> oracle_beta_pair(const AnalyticModel& model, const Vec& xc,
                                           const Vec& xc_tilde, int k, int j);

// Remaining continuous coefficient from a pivot coordinate with known beta_k.
double oracle_beta_remaining(const AnalyticModel& model, const Vec& xc, int k_pivot, int l,
                             double beta_k);

// Discrete coefficient via the support-overlap construction: x_dk is the
// nonzero value placed in discrete coordinate k (0-based index into x^D).
double oracle_beta_discrete(const AnalyticModel& model, const Vec& xc_k, double x_dk, int k,
                            const Vec& beta_c);

// One-continuous-covariate route: pi0(xc) = pi0(xc_tilde) with xc != xc_tilde
// identifies beta^C from the difference quotient of m0.
double oracle_beta_one_continuous(const AnalyticModel& model, double xc, double xc_tilde);

// g sampled on a grid of v in (0,1).
std::vector<double> oracle_recover_g(const AnalyticModel& model, const std::vector<double>& grid);

}  // namespace selcorr
