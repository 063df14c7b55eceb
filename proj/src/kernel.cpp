#include "selcorr/kernel.hpp"

#include <cmath>
#include <stdexcept>

#include "selcorr/mathx.hpp"

namespace selcorr {

namespace {
constexpr double kDenominatorFloor = 1e-300;

std::size_t nearest_input(const std::vector<double>& inputs, double p) {
  std::size_t best = 0;
  double best_dist = std::fabs(inputs[0] - p);
  for (std::size_t i = 1; i < inputs.size(); ++i) {
    const double dist = std::fabs(inputs[i] - p);
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  return best;
}
}  // namespace

double rule_of_thumb_bandwidth(const std::vector<double>& inputs, std::size_t m) {
  const double sd = stddev_pop(inputs);
  double scale = 0.0;
  for (double v : inputs) scale = std::max(scale, std::fabs(v));
  if (sd <= 1e-12 * (1.0 + scale)) return 1e-3;  // degenerate inputs
  return 1.06 * sd * std::pow(static_cast<double>(m), -0.2);
}

double eval_kernel(const KernelFit& fit, double p, bool* fell_back) {
  if (fit.inputs.empty() || fit.inputs.size() != fit.targets.size())
    throw std::invalid_argument("eval_kernel: invalid fit");
  const double h = fit.bandwidth;
  if (!(h > 0.0)) throw std::invalid_argument("eval_kernel: bandwidth must be positive");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < fit.inputs.size(); ++i) {
    const double u = (fit.inputs[i] - p) / h;
    const double w = kInvSqrt2Pi * std::exp(-0.5 * u * u) / h;
    num += w * fit.targets[i];
    den += w;
  }
  if (den < kDenominatorFloor) {
    if (fell_back) *fell_back = true;
    return fit.targets[nearest_input(fit.inputs, p)];
  }
  if (fell_back) *fell_back = false;
  return num / den;
}

double eval_kernel_derivative(const KernelFit& fit, double p, bool* fell_back) {
  if (fit.inputs.empty() || fit.inputs.size() != fit.targets.size())
    throw std::invalid_argument("eval_kernel_derivative: invalid fit");
  const double h = fit.bandwidth;
  if (!(h > 0.0)) throw std::invalid_argument("eval_kernel_derivative: bandwidth must be positive");
  // d/dp k((x_i - p)/h) = u_i k(u_i) / h with u_i = (x_i - p)/h.
  double a = 0.0, b = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < fit.inputs.size(); ++i) {
    const double u = (fit.inputs[i] - p) / h;
    const double w = kInvSqrt2Pi * std::exp(-0.5 * u * u) / h;
    const double dw = u * w / h;
    a += w * fit.targets[i];
    b += w;
    da += dw * fit.targets[i];
    db += dw;
  }
  if (b < kDenominatorFloor) {
    if (fell_back) *fell_back = true;
    return 0.0;
  }
  if (fell_back) *fell_back = false;
  return (da * b - a * db) / (b * b);
}

KernelRegressor::KernelRegressor(std::vector<double> inputs, Mat targets)
    : inputs_(std::move(inputs)), targets_(std::move(targets)) {
  if (inputs_.size() < 2) throw std::invalid_argument("KernelRegressor: need at least 2 points");
  if (static_cast<Eigen::Index>(inputs_.size()) != targets_.rows())
    throw std::invalid_argument("KernelRegressor: input/target size mismatch");
  bandwidth_ = rule_of_thumb_bandwidth(inputs_, inputs_.size());
}

int KernelRegressor::eval_all(double p, Vec& values, Vec& derivatives) const {
  const Eigen::Index t_count = targets_.cols();
  values.setZero(t_count);
  derivatives.setZero(t_count);
  const double h = bandwidth_;
  double b = 0.0, db = 0.0;
  Vec a = Vec::Zero(t_count), da = Vec::Zero(t_count);
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    const double u = (inputs_[i] - p) / h;
    const double w = kInvSqrt2Pi * std::exp(-0.5 * u * u) / h;
    const double dw = u * w / h;
    b += w;
    db += dw;
    a += w * targets_.row(static_cast<Eigen::Index>(i)).transpose();
    da += dw * targets_.row(static_cast<Eigen::Index>(i)).transpose();
  }
  if (b < kDenominatorFloor) {
    values = targets_.row(static_cast<Eigen::Index>(nearest_input(inputs_, p))).transpose();
    derivatives.setZero();
    return 1;
  }
  values = a / b;
  derivatives = (da * b - a * db) / (b * b);
  return 0;
}

KernelFit KernelRegressor::fit_for_target(Eigen::Index t) const {
  KernelFit fit;
  fit.inputs = inputs_;
  fit.targets.resize(inputs_.size());
  for (std::size_t i = 0; i < inputs_.size(); ++i)
    fit.targets[i] = targets_(static_cast<Eigen::Index>(i), t);
  fit.bandwidth = bandwidth_;
  return fit;
}

}  // namespace selcorr
