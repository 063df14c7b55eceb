#include "selcorr/estimators.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "selcorr/errors.hpp"
#include "selcorr/parallel.hpp"

namespace selcorr {

namespace {

constexpr double kConditionLimit = 1e12;

struct SolvedSystem {
  Vec beta;
  double condition = 0.0;
};

// Solves the symmetric system J beta = b through an eigendecomposition and
// reports the condition number; throws past the 1e12 threshold.
SolvedSystem solve_symmetric(const Mat& j, const Vec& b, const std::string& what) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (j + j.transpose()));
  const Vec& vals = eig.eigenvalues();
  const double max_abs = vals.cwiseAbs().maxCoeff();
  const double min_abs = vals.cwiseAbs().minCoeff();
  const double cond = (min_abs > 0.0) ? max_abs / min_abs : std::numeric_limits<double>::infinity();
  if (!std::isfinite(cond) || cond > kConditionLimit)
    throw degenerate_design_error(what + ": normal-equation matrix is numerically singular "
                                  "(condition number " + std::to_string(cond) + ")");
  SolvedSystem out;
  out.beta = eig.eigenvectors() * (eig.eigenvectors().transpose() * b).cwiseQuotient(vals);
  out.condition = cond;
  return out;
}

// Dataset rows outside the given folds, in ascending row order.
std::vector<std::size_t> rows_excluding(const FoldPartition& partition,
                                        std::initializer_list<std::size_t> excluded) {
  std::vector<std::size_t> rows;
  rows.reserve(partition.n());
  for (std::size_t i = 0; i < partition.n(); ++i) {
    const std::size_t f = partition.fold_of(i);
    bool skip = false;
    for (std::size_t e : excluded) skip = skip || (f == e);
    if (!skip) rows.push_back(i);
  }
  return rows;
}

PropensityModel fit_forest_on_rows(const Dataset& data, const std::vector<std::size_t>& rows,
                                   const ForestHyperparams& hp, const EstimatorConfig& config,
                                   Rng rng) {
  MatRM x(rows.size(), data.dim_x());
  Eigen::VectorXi d(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = data.x_row(rows[i]);
    d[static_cast<Eigen::Index>(i)] = data.d_at(rows[i]);
  }
  return fit_random_forest(x, d, hp, rng, config.clip_lo, config.clip_hi);
}

std::size_t count_clipped(const std::vector<double>& p, double lo, double hi) {
  std::size_t count = 0;
  for (double v : p)
    if (v == lo || v == hi) ++count;
  return count;
}

Mat targets_for_rows(const Dataset& data, const std::vector<std::size_t>& rows) {
  const int k = data.dim_x();
  Mat t(rows.size(), k + 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.block(static_cast<Eigen::Index>(i), 0, 1, k) = data.x_row(rows[i]);
    t(static_cast<Eigen::Index>(i), k) = data.y_at(rows[i]);
  }
  return t;
}

// Plain partialling-out normal equations: J = (1/n) sum p² r r',
// b = (1/n) sum p r (y - mu_y), r = x - mu_x.
NormalEquations robinson_equations(const Dataset& data, const std::vector<NuisanceValues>& nvs) {
  const int k = data.dim_x();
  NormalEquations eq{Mat::Zero(k, k), Vec::Zero(k)};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const NuisanceValues& nv = nvs[i];
    const Vec resid = data.x_row(i).transpose() - nv.mu_x;
    eq.J += nv.p * nv.p * resid * resid.transpose();
    eq.b += nv.p * (data.y_at(i) - nv.mu_y) * resid;
  }
  eq.J /= static_cast<double>(data.size());
  eq.b /= static_cast<double>(data.size());
  return eq;
}

void check_preconditions(const Dataset& data, const EstimatorConfig& config) {
  if (data.size() < 10 * static_cast<std::size_t>(data.dim_x()))
    throw std::invalid_argument("estimate: need n >= 10 K");
  if (config.folds < 2 || data.size() < 2 * config.folds)
    throw std::invalid_argument("estimate: need 2 <= L and n >= 2 L");
  if (!(config.clip_lo > 0.0 && config.clip_lo < config.clip_hi && config.clip_hi < 1.0))
    throw std::invalid_argument("estimate: need 0 < clip_lo < clip_hi < 1");
}

FitResult finalize(const Dataset& data, EstimatorTag tag, const NormalEquations& eq,
                   const std::vector<NuisanceValues>& nvs, bool orthogonal_moment,
                   const Vec& beta, double condition) {
  const auto n = data.size();
  const int k = data.dim_x();
  Mat moments(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const Observation obs = data.observation(i);
    moments.row(static_cast<Eigen::Index>(i)) =
        (orthogonal_moment ? psi_contribution(obs, nvs[i], beta)
                           : robinson_contribution(obs, nvs[i], beta))
            .transpose();
  }
  FitResult result;
  result.estimator_tag = tag;
  result.beta = beta;
  result.covariance = sandwich_covariance(eq.J, moments);
  result.standard_errors = result.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  result.diagnostics["condition_number"] = condition;
  result.diagnostics["n"] = static_cast<double>(n);
  result.diagnostics["selection_rate"] = data.selection_rate();
  Eigen::SelfAdjointEigenSolver<Mat> eig(result.covariance);
  result.diagnostics["cov_min_eig_over_trace"] =
      eig.eigenvalues().minCoeff() / std::max(result.covariance.trace(), 1e-300);
  return result;
}

void merge_crossfit_diagnostics(FitResult& result, const NuisanceSet& ns) {
  result.diagnostics["clip_count"] = static_cast<double>(ns.clip_count);
  result.diagnostics["kernel_fallback_count"] = static_cast<double>(ns.kernel_fallbacks);
  result.diagnostics["bandwidth_min"] = ns.bandwidth_min;
  result.diagnostics["bandwidth_max"] = ns.bandwidth_max;
  result.diagnostics["min_leaf"] = static_cast<double>(ns.hp.min_leaf);
  result.diagnostics["max_features"] = static_cast<double>(ns.hp.max_features);
}

void merge_full_diagnostics(FitResult& result, const FullSampleNuisances& ns) {
  result.diagnostics["clip_count"] = static_cast<double>(ns.clip_count);
  result.diagnostics["bandwidth_min"] = ns.bandwidth;
  result.diagnostics["bandwidth_max"] = ns.bandwidth;
  result.diagnostics["min_leaf"] = static_cast<double>(ns.hp.min_leaf);
  result.diagnostics["max_features"] = static_cast<double>(ns.hp.max_features);
}

}  // namespace

std::size_t pair_index(std::size_t l, std::size_t lp, std::size_t L) {
  if (l > lp) std::swap(l, lp);
  return l * L - l * (l + 1) / 2 + (lp - l - 1);
}

ForestHyperparams choose_hyperparams(const Dataset& data, const EstimatorConfig& config, Rng rng) {
  if (!config.tune_per_fit && config.fixed_hp.has_value()) return *config.fixed_hp;
  const std::vector<ForestHyperparams> grid =
      config.forest_grid.empty() ? default_forest_grid(data.dim_x()) : config.forest_grid;
  return tune_forest_cv(data.x(), data.d(), grid, 5, rng);
}

NuisanceSet fit_nuisances(const Dataset& data, const FoldPartition& partition,
                          const EstimatorConfig& config, Rng rng, const ForestHyperparams& hp) {
  const std::size_t L = partition.fold_count();
  const auto n = data.size();
  const int k = data.dim_x();

  NuisanceSet ns{partition, hp, {}, {}, {}, {}, std::vector<double>(n, 0.0), 0, 0, 0.0, 0.0};
  ns.fold_models.resize(L);
  ns.pair_models.resize(L * (L - 1) / 2);
  ns.fold_kernels.resize(L);
  ns.beta_init.resize(L);

  // Per-fold propensity forests, trained off the fold.
  for (std::size_t l = 0; l < L; ++l)
    ns.fold_models[l] =
        fit_forest_on_rows(data, rows_excluding(partition, {l}), hp, config, rng.split(100 + l));

  for (std::size_t l = 0; l < L; ++l) {
    std::vector<double> fold_p(partition.fold(l).size());
    MatRM x_fold(partition.fold(l).size(), k);
    for (std::size_t idx = 0; idx < partition.fold(l).size(); ++idx)
      x_fold.row(static_cast<Eigen::Index>(idx)) = data.x_row(partition.fold(l)[idx]);
    fold_p = predict_propensity_rows(ns.fold_models[l], x_fold);
    for (std::size_t idx = 0; idx < partition.fold(l).size(); ++idx)
      ns.p_hat[partition.fold(l)[idx]] = fold_p[idx];
  }
  ns.clip_count += count_clipped(ns.p_hat, config.clip_lo, config.clip_hi);

  // Pair forests and their predictions on every row. At L = 2 excluding both
  // folds leaves nothing, so the pair model degrades to a full-sample fit
  // (the only symmetric choice).
  std::vector<std::vector<double>> pair_pred(ns.pair_models.size());
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t lp = l + 1; lp < L; ++lp) {
      const std::size_t pi = pair_index(l, lp, L);
      std::vector<std::size_t> train = rows_excluding(partition, {l, lp});
      if (train.empty()) train = rows_excluding(partition, {});
      ns.pair_models[pi] = fit_forest_on_rows(data, train, hp, config, rng.split(200 + pi));
      pair_pred[pi] = predict_propensity_rows(ns.pair_models[pi], data.x());
      ns.clip_count += count_clipped(pair_pred[pi], config.clip_lo, config.clip_hi);
    }

  // Fold kernels: training rows are all observations off the fold, with
  // generated regressors from the pair forest excluding both folds involved.
  ns.bandwidth_min = std::numeric_limits<double>::infinity();
  ns.bandwidth_max = 0.0;
  for (std::size_t l = 0; l < L; ++l) {
    const std::vector<std::size_t> rows = rows_excluding(partition, {l});
    std::vector<double> inputs(rows.size());
    for (std::size_t idx = 0; idx < rows.size(); ++idx) {
      const std::size_t j = rows[idx];
      inputs[idx] = pair_pred[pair_index(l, partition.fold_of(j), L)][j];
    }
    ns.fold_kernels[l] = KernelRegressor(std::move(inputs), targets_for_rows(data, rows));
    ns.bandwidth_min = std::min(ns.bandwidth_min, ns.fold_kernels[l].bandwidth());
    ns.bandwidth_max = std::max(ns.bandwidth_max, ns.fold_kernels[l].bandwidth());
  }

  // Pair kernels (training off both folds) feed the initial cross-fitted
  // partialling-out coefficients beta_l.
  std::vector<KernelRegressor> pair_kernels(ns.pair_models.size());
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t lp = l + 1; lp < L; ++lp) {
      const std::size_t pi = pair_index(l, lp, L);
      std::vector<std::size_t> rows = rows_excluding(partition, {l, lp});
      if (rows.empty()) rows = rows_excluding(partition, {});
      std::vector<double> inputs(rows.size());
      for (std::size_t idx = 0; idx < rows.size(); ++idx) inputs[idx] = pair_pred[pi][rows[idx]];
      pair_kernels[pi] = KernelRegressor(std::move(inputs), targets_for_rows(data, rows));
    }

  for (std::size_t l = 0; l < L; ++l) {
    Mat j_l = Mat::Zero(k, k);
    Vec b_l = Vec::Zero(k);
    Vec values(k + 1), derivs(k + 1);
    for (std::size_t lp = 0; lp < L; ++lp) {
      if (lp == l) continue;
      const std::size_t pi = pair_index(l, lp, L);
      for (std::size_t j : partition.fold(lp)) {
        const double p = pair_pred[pi][j];
        ns.kernel_fallbacks += static_cast<std::size_t>(pair_kernels[pi].eval_all(p, values, derivs));
        const Vec resid = data.x_row(j).transpose() - values.head(k);
        j_l += p * p * resid * resid.transpose();
        b_l += p * (data.y_at(j) - values[k]) * resid;
      }
    }
    ns.beta_init[l] =
        solve_symmetric(j_l, b_l, "fit_nuisances: initial coefficients for fold " +
                                      std::to_string(l)).beta;
  }
  return ns;
}

FullSampleNuisances fit_full_nuisances(const Dataset& data, const EstimatorConfig& config,
                                       Rng rng, const ForestHyperparams& hp) {
  FullSampleNuisances ns;
  ns.hp = hp;
  ns.model = fit_random_forest(data.x(), data.d(), hp, rng.split(0), config.clip_lo,
                               config.clip_hi);
  ns.p_hat = predict_propensity_rows(ns.model, data.x());
  ns.clip_count = count_clipped(ns.p_hat, config.clip_lo, config.clip_hi);

  std::vector<std::size_t> all_rows(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) all_rows[i] = i;
  ns.kernel = KernelRegressor(ns.p_hat, targets_for_rows(data, all_rows));
  ns.bandwidth = ns.kernel.bandwidth();
  return ns;
}

std::vector<NuisanceValues> nuisance_values(const Dataset& data, const NuisanceSet& ns) {
  const int k = data.dim_x();
  const auto n = data.size();
  std::vector<NuisanceValues> nvs(n);
  parallel_for(n, [&](std::size_t i) {
    const std::size_t l = ns.partition.fold_of(i);
    NuisanceValues nv;
    nv.p = ns.p_hat[i];
    Vec values(k + 1), derivs(k + 1);
    ns.fold_kernels[l].eval_all(nv.p, values, derivs);
    nv.mu_x = values.head(k);
    nv.mu_y = values[k];
    nv.dmu_x = derivs.head(k);
    nv.dmu_y = derivs[k];
    nv.beta_init = ns.beta_init[l];
    nvs[i] = std::move(nv);
  });
  return nvs;
}

std::vector<NuisanceValues> nuisance_values(const Dataset& data, const FullSampleNuisances& ns,
                                            const Vec& beta_init) {
  const int k = data.dim_x();
  const auto n = data.size();
  std::vector<NuisanceValues> nvs(n);
  parallel_for(n, [&](std::size_t i) {
    NuisanceValues nv;
    nv.p = ns.p_hat[i];
    Vec values(k + 1), derivs(k + 1);
    ns.kernel.eval_all(nv.p, values, derivs);
    nv.mu_x = values.head(k);
    nv.mu_y = values[k];
    nv.dmu_x = derivs.head(k);
    nv.dmu_y = derivs[k];
    nv.beta_init = beta_init;
    nvs[i] = std::move(nv);
  });
  return nvs;
}

Mat sandwich_covariance(const Mat& jacobian, const Mat& moment_rows) {
  const auto n = static_cast<double>(moment_rows.rows());
  const Mat sigma = moment_rows.transpose() * moment_rows / n;

  Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (jacobian + jacobian.transpose()));
  const Vec& vals = eig.eigenvalues();
  const double max_abs = vals.cwiseAbs().maxCoeff();
  const double min_abs = vals.cwiseAbs().minCoeff();
  if (!(min_abs > 0.0) || max_abs / min_abs > kConditionLimit)
    throw degenerate_design_error("sandwich_covariance: Jacobian is numerically singular");
  const Mat j_inv =
      eig.eigenvectors() * vals.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  const Mat cov = j_inv * sigma * j_inv / n;
  return 0.5 * (cov + cov.transpose());
}

FitResult locally_robust_from(const Dataset& data, const NuisanceSet& ns) {
  const std::vector<NuisanceValues> nvs = nuisance_values(data, ns);
  const NormalEquations eq = assemble_normal_equations(data, nvs, Formulation::F3);
  const SolvedSystem sol = solve_symmetric(eq.J, eq.b, "estimate_locally_robust");
  FitResult result =
      finalize(data, EstimatorTag::LocallyRobust, eq, nvs, /*orthogonal=*/true, sol.beta,
               sol.condition);
  merge_crossfit_diagnostics(result, ns);
  return result;
}

FitResult robinson_crossfit_from(const Dataset& data, const NuisanceSet& ns) {
  const std::vector<NuisanceValues> nvs = nuisance_values(data, ns);
  const NormalEquations eq = robinson_equations(data, nvs);
  const SolvedSystem sol = solve_symmetric(eq.J, eq.b, "estimate_robinson_crossfit");
  FitResult result = finalize(data, EstimatorTag::RobinsonCrossfit, eq, nvs,
                              /*orthogonal=*/false, sol.beta, sol.condition);
  merge_crossfit_diagnostics(result, ns);
  return result;
}

FitResult robinson_from(const Dataset& data, const FullSampleNuisances& ns) {
  const std::vector<NuisanceValues> nvs = nuisance_values(data, ns, Vec::Zero(data.dim_x()));
  const NormalEquations eq = robinson_equations(data, nvs);
  const SolvedSystem sol = solve_symmetric(eq.J, eq.b, "estimate_robinson");
  FitResult result = finalize(data, EstimatorTag::Robinson, eq, nvs, /*orthogonal=*/false,
                              sol.beta, sol.condition);
  merge_full_diagnostics(result, ns);
  return result;
}

FitResult robinson_orthogonal_from(const Dataset& data, const FullSampleNuisances& ns) {
  // Initial coefficients for the correction term come from the plain
  // full-sample partialling-out fit on the same nuisances.
  std::vector<NuisanceValues> nvs = nuisance_values(data, ns, Vec::Zero(data.dim_x()));
  const NormalEquations plain = robinson_equations(data, nvs);
  const SolvedSystem initial = solve_symmetric(plain.J, plain.b, "estimate_robinson_orthogonal");
  for (auto& nv : nvs) nv.beta_init = initial.beta;

  const NormalEquations eq = assemble_normal_equations(data, nvs, Formulation::F3);
  const SolvedSystem sol = solve_symmetric(eq.J, eq.b, "estimate_robinson_orthogonal");
  FitResult result = finalize(data, EstimatorTag::RobinsonOrthogonal, eq, nvs,
                              /*orthogonal=*/true, sol.beta, sol.condition);
  merge_full_diagnostics(result, ns);
  return result;
}

FitResult estimate_locally_robust(const Dataset& data, const EstimatorConfig& config) {
  check_preconditions(data, config);
  const Rng rng(config.seed);
  const ForestHyperparams hp = choose_hyperparams(data, config, rng.split(kSeedTune));
  const FoldPartition partition = partition_folds(data.size(), config.folds, rng.split(kSeedFolds));
  const NuisanceSet ns = fit_nuisances(data, partition, config, rng.split(kSeedCrossfit), hp);
  return locally_robust_from(data, ns);
}

FitResult estimate_robinson_crossfit(const Dataset& data, const EstimatorConfig& config) {
  check_preconditions(data, config);
  const Rng rng(config.seed);
  const ForestHyperparams hp = choose_hyperparams(data, config, rng.split(kSeedTune));
  const FoldPartition partition = partition_folds(data.size(), config.folds, rng.split(kSeedFolds));
  const NuisanceSet ns = fit_nuisances(data, partition, config, rng.split(kSeedCrossfit), hp);
  return robinson_crossfit_from(data, ns);
}

FitResult estimate_robinson(const Dataset& data, const EstimatorConfig& config) {
  check_preconditions(data, config);
  const Rng rng(config.seed);
  const ForestHyperparams hp = choose_hyperparams(data, config, rng.split(kSeedTune));
  const FullSampleNuisances ns =
      fit_full_nuisances(data, config, rng.split(kSeedFullSample), hp);
  return robinson_from(data, ns);
}

FitResult estimate_robinson_orthogonal(const Dataset& data, const EstimatorConfig& config) {
  check_preconditions(data, config);
  const Rng rng(config.seed);
  const ForestHyperparams hp = choose_hyperparams(data, config, rng.split(kSeedTune));
  const FullSampleNuisances ns =
      fit_full_nuisances(data, config, rng.split(kSeedFullSample), hp);
  return robinson_orthogonal_from(data, ns);
}

}  // namespace selcorr
