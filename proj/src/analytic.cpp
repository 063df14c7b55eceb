#include "selcorr/analytic.hpp"

#include <cmath>
#include <stdexcept>

#include "selcorr/errors.hpp"
#include "selcorr/mathx.hpp"

namespace selcorr {

namespace {
constexpr double kRankTol = 1e-8;

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }
double dlogistic(double t) {
  const double s = logistic(t);
  return s * (1.0 - s);
}
}  // namespace

AnalyticModel::AnalyticModel(IndexForm form, Vec beta, double rho, double c, Vec eta)
    : form_(form), beta_(std::move(beta)), rho_(rho), c_(c), eta_(std::move(eta)) {
  if (!(std::fabs(rho_) < 1.0)) throw std::invalid_argument("AnalyticModel: need |rho| < 1");
  if (form_ == IndexForm::OneContinuous) {
    if (beta_.size() < 1) throw std::invalid_argument("AnalyticModel: empty beta");
  } else if (beta_.size() < 2) {
    throw std::invalid_argument("AnalyticModel: need at least two continuous coordinates");
  }
  if ((form_ == IndexForm::Linear || form_ == IndexForm::ProbitLinear ||
       form_ == IndexForm::LogitLinear) &&
      eta_.size() != dim_continuous())
    throw std::invalid_argument("AnalyticModel: eta must match the continuous block");
}

double AnalyticModel::h0(const Vec& xc) const {
  if (xc.size() != dim_continuous())
    throw std::invalid_argument("AnalyticModel::h0: wrong continuous dimension");
  switch (form_) {
    case IndexForm::Benchmark:
      return c_ + xc[0] + xc[0] * xc[0] - xc[1] - xc[1] * xc[1];
    case IndexForm::OneContinuous:
      return c_ + xc[0] * xc[0];
    case IndexForm::Linear:
      return c_ + eta_.dot(xc);
    case IndexForm::ProbitLinear:
      return c_ + normal_cdf(eta_.dot(xc));
    case IndexForm::LogitLinear:
      return c_ + logistic(eta_.dot(xc));
  }
  return c_;
}

double AnalyticModel::dh0(const Vec& xc, int k) const {
  switch (form_) {
    case IndexForm::Benchmark:
      return k == 0 ? 1.0 + 2.0 * xc[0] : -1.0 - 2.0 * xc[1];
    case IndexForm::OneContinuous:
      return 2.0 * xc[0];
    case IndexForm::Linear:
      return eta_[k];
    case IndexForm::ProbitLinear:
      return normal_pdf(eta_.dot(xc)) * eta_[k];
    case IndexForm::LogitLinear:
      return dlogistic(eta_.dot(xc)) * eta_[k];
  }
  return 0.0;
}

double AnalyticModel::h(const Vec& x) const {
  if (x.size() != beta_.size()) throw std::invalid_argument("AnalyticModel::h: wrong dimension");
  const int kc = dim_continuous();
  const Vec xc = x.head(kc);
  double value = h0(xc);
  if (form_ == IndexForm::Benchmark && x.size() >= 6)
    value += x[2] * x[3] - x[4] * x[5];
  return value;
}

double AnalyticModel::g(double v) const {
  if (!(v > 0.0 && v <= 1.0)) throw std::invalid_argument("AnalyticModel::g: v must be in (0,1]");
  if (v == 1.0) return 0.0;
  return -rho_ * normal_pdf(normal_quantile(v)) / v;
}

double AnalyticModel::g1(double v) const {
  if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("AnalyticModel::g1: v must be in (0,1)");
  const double u = normal_quantile(v);
  // d/dv phi(Phi^{-1}(v)) = -Phi^{-1}(v), so g'(v) = rho [v·u + phi(u)] / v².
  return rho_ * (v * u + normal_pdf(u)) / (v * v);
}

double AnalyticModel::m(const Vec& x) const { return x.dot(beta_) + g(pi(x)); }

double AnalyticModel::m0(const Vec& xc) const {
  return xc.dot(beta_.head(dim_continuous())) + g(pi0(xc));
}

double AnalyticModel::dm0(const Vec& xc, int k) const {
  return beta_[k] + g1(pi0(xc)) * dpi0(xc, k);
}

std::pair<double, double> oracle_beta_pair(const AnalyticModel& model, const Vec& xc,
                                           const Vec& xc_tilde, int k, int j) {
  const double pk = model.dpi0(xc, k), pj = model.dpi0(xc, j);
  const double qk = model.dpi0(xc_tilde, k), qj = model.dpi0(xc_tilde, j);
  Eigen::Matrix2d upsilon;
  upsilon << pj, -pk, qj, -qk;
  const double det = upsilon.determinant();
  if (std::fabs(det) < kRankTol)
    throw assumption_violation_error(
        "oracle_beta_pair: rank condition fails at this point pair (|det| = " +
        std::to_string(std::fabs(det)) + ")");
  Eigen::Vector2d rhs;
  rhs << model.dm0(xc, k) * pj - model.dm0(xc, j) * pk,
      model.dm0(xc_tilde, k) * qj - model.dm0(xc_tilde, j) * qk;
  const Eigen::Vector2d sol = upsilon.inverse() * rhs;
  return {sol[0], sol[1]};
}

double oracle_beta_remaining(const AnalyticModel& model, const Vec& xc, int k_pivot, int l,
                             double beta_k) {
  const double pk = model.dpi0(xc, k_pivot);
  if (std::fabs(pk) < kRankTol)
    throw std::invalid_argument("oracle_beta_remaining: pivot derivative vanishes at this point");
  const double pl = model.dpi0(xc, l);
  return (model.dm0(xc, l) * pk - model.dm0(xc, k_pivot) * pl + pl * beta_k) / pk;
}

double oracle_beta_discrete(const AnalyticModel& model, const Vec& xc_k, double x_dk, int k,
                            const Vec& beta_c) {
  if (x_dk == 0.0) throw std::invalid_argument("oracle_beta_discrete: x_dk must be nonzero");
  const int kc = model.dim_continuous();
  Vec x = Vec::Zero(model.dim_x());
  x.head(kc) = xc_k;
  x[kc + k] = x_dk;
  const double p = model.pi(x);
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("oracle_beta_discrete: propensity outside the support of pi0");
  return (model.m(x) - xc_k.dot(beta_c) - model.g(p)) / x_dk;
}

double oracle_beta_one_continuous(const AnalyticModel& model, double xc, double xc_tilde) {
  if (xc == xc_tilde)
    throw std::invalid_argument("oracle_beta_one_continuous: points must differ");
  Vec a(1), b(1);
  a << xc;
  b << xc_tilde;
  if (std::fabs(model.pi0(a) - model.pi0(b)) > kRankTol)
    throw assumption_violation_error(
        "oracle_beta_one_continuous: pi0 must agree at the two points");
  return (model.m0(a) - model.m0(b)) / (xc - xc_tilde);
}

std::vector<double> oracle_recover_g(const AnalyticModel& model, const std::vector<double>& grid) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (double v : grid) {
    if (!(v > 0.0 && v < 1.0))
      throw std::invalid_argument("oracle_recover_g: grid must lie in (0,1)");
    out.push_back(model.g(v));
  }
  return out;
}

}  // namespace selcorr
