#pragma once

#include <vector>

#include "selcorr/dataset.hpp"

namespace selcorr {

// Nuisance quantities evaluated at one observation's generated regressor:
// propensity p, second-step regressions and their derivatives at p, and the
// fold-level initial coefficient feeding the influence-function correction.
struct NuisanceValues {
  double p = 0.5;
  Vec mu_x;
  double mu_y = 0.0;
  Vec dmu_x;
  double dmu_y = 0.0;
  Vec beta_init;
};

// Partialling-out moment contribution:
//   p (x - mu_x) (y - mu_y - p (x - mu_x)'beta).
Vec robinson_contribution(const Observation& obs, const NuisanceValues& nv, const Vec& beta);

// First-step influence-function multiplier:
//   -p (x - mu_x) [dmu_y - p dmu_x'beta_init].
Vec alpha_correction(const Observation& obs, const NuisanceValues& nv);

// Orthogonalized moment contribution:
//   p (x - mu_x) [y - mu_y - d (x - mu_x)'beta] + alpha(x) (d - p).
// The d (rather than p) on the beta term is the direct-effect absorption that
// makes the Jacobian symmetric.
Vec psi_contribution(const Observation& obs, const NuisanceValues& nv, const Vec& beta);

// The four algebraically equivalent normal-equation layouts for the
// orthogonalized moment; F3 is the one the estimator uses, F1/F2/F4 exist for
// cross-validation of the algebra.
enum class Formulation { F1, F2, F3, F4 };

struct NormalEquations {
  Mat J;
  Vec b;
};

// Sample-average (1/n scaled) Jacobian matrix and right-hand side such that
// beta_hat = J^{-1} b. Singularity of J is the solver's concern, not checked here.
NormalEquations assemble_normal_equations(const Dataset& data,
                                          const std::vector<NuisanceValues>& nuisances,
                                          Formulation formulation);

}  // namespace selcorr
