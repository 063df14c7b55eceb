#include "selcorr/moments.hpp"

#include <stdexcept>

namespace selcorr {

Vec robinson_contribution(const Observation& obs, const NuisanceValues& nv, const Vec& beta) {
  const Vec resid = obs.x - nv.mu_x;
  const double scalar = obs.y - nv.mu_y - nv.p * resid.dot(beta);
  return nv.p * scalar * resid;
}

Vec alpha_correction(const Observation& obs, const NuisanceValues& nv) {
  const Vec resid = obs.x - nv.mu_x;
  const double bracket = nv.dmu_y - nv.p * nv.dmu_x.dot(nv.beta_init);
  return -nv.p * bracket * resid;
}

Vec psi_contribution(const Observation& obs, const NuisanceValues& nv, const Vec& beta) {
  const Vec resid = obs.x - nv.mu_x;
  const double d = static_cast<double>(obs.d);
  const double scalar = obs.y - nv.mu_y - d * resid.dot(beta);
  return nv.p * scalar * resid + alpha_correction(obs, nv) * (d - nv.p);
}

NormalEquations assemble_normal_equations(const Dataset& data,
                                          const std::vector<NuisanceValues>& nuisances,
                                          Formulation formulation) {
  const auto n = data.size();
  if (nuisances.size() != n)
    throw std::invalid_argument("assemble_normal_equations: nuisance count mismatch");
  const int k = data.dim_x();

  NormalEquations eq;
  eq.J = Mat::Zero(k, k);
  eq.b = Vec::Zero(k);

  for (std::size_t i = 0; i < n; ++i) {
    const NuisanceValues& nv = nuisances[i];
    const Vec resid = data.x_row(i).transpose() - nv.mu_x;
    const double p = nv.p;
    const double d = static_cast<double>(data.d_at(i));
    const double y_res = data.y_at(i) - nv.mu_y;
    const double dp = d - p;

    switch (formulation) {
      case Formulation::F1:
        eq.J += p * resid * (d * resid - p * dp * nv.dmu_x).transpose();
        eq.b += p * (y_res - dp * nv.dmu_y) * resid;
        break;
      case Formulation::F2:
        eq.J += p * p * resid * (resid - dp * nv.dmu_x).transpose();
        eq.b += p * (y_res - dp * (nv.dmu_y + resid.dot(nv.beta_init))) * resid;
        break;
      case Formulation::F3:
        eq.J += p * d * resid * resid.transpose();
        eq.b += p * (y_res - dp * (nv.dmu_y - p * nv.dmu_x.dot(nv.beta_init))) * resid;
        break;
      case Formulation::F4:
        eq.J += p * p * resid * resid.transpose();
        eq.b += p * (y_res - dp * (nv.dmu_y + (resid - p * nv.dmu_x).dot(nv.beta_init))) * resid;
        break;
    }
  }

  eq.J /= static_cast<double>(n);
  eq.b /= static_cast<double>(n);
  return eq;
}

}  // namespace selcorr
