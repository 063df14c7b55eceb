#pragma once

#include <cstddef>
#include <vector>

#include "selcorr/dataset.hpp"

namespace selcorr {

// Nadaraya-Watson regression of a scalar target on a scalar input with a
// Gaussian kernel. Inputs are generated regressors (propensity predictions).
struct KernelFit {
  std::vector<double> inputs;
  std::vector<double> targets;
  double bandwidth = 0.0;
};

// h = 1.06 · sd(inputs) · m^(-1/5) with the population sd convention;
// degenerate (constant) inputs fall back to a 1e-3 floor.
double rule_of_thumb_bandwidth(const std::vector<double>& inputs, std::size_t m);

// NW ratio A(p)/B(p). When the normalized denominator underflows (query far
// outside the training inputs) returns the target of the nearest input and
// reports the fallback through `fell_back` if given.
double eval_kernel(const KernelFit& fit, double p, bool* fell_back = nullptr);

// Analytic quotient-rule derivative (A'B - AB')/B² using k'(u) = -u·k(u).
// Same denominator guard as eval_kernel, returning 0 there.
double eval_kernel_derivative(const KernelFit& fit, double p, bool* fell_back = nullptr);

// Shared-input NW regression onto several targets at once: one weight pass per
// query serves every target column. Bandwidth from the rule of thumb applied
// to the inputs, so all targets share it.
class KernelRegressor {
 public:
  KernelRegressor() = default;
  KernelRegressor(std::vector<double> inputs, Mat targets);

  std::size_t train_size() const { return inputs_.size(); }
  Eigen::Index target_count() const { return targets_.cols(); }
  double bandwidth() const { return bandwidth_; }

  // Values and derivatives of every target regression at p. Returns the number
  // of denominator fallbacks (0, or 1 counted once per query).
  int eval_all(double p, Vec& values, Vec& derivatives) const;

  // Single-target view, for inspection and tests.
  KernelFit fit_for_target(Eigen::Index t) const;

 private:
  std::vector<double> inputs_;
  Mat targets_;  // train_size × target_count
  double bandwidth_ = 0.0;
};

}  // namespace selcorr
