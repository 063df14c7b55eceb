#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "selcorr/dataset.hpp"
#include "selcorr/forest.hpp"
#include "selcorr/kernel.hpp"
#include "selcorr/moments.hpp"
#include "selcorr/rng.hpp"

namespace selcorr {

struct EstimatorConfig {
  std::size_t folds = 5;
  std::vector<ForestHyperparams> forest_grid;  // empty: default grid for the dataset's K
  bool tune_per_fit = true;
  std::optional<ForestHyperparams> fixed_hp;  // used when tune_per_fit is false
  double clip_lo = 0.001;
  double clip_hi = 0.999;
  std::uint64_t seed = 1;
};

// Cross-fitted nuisance estimates: per-fold propensity forests (trained off
// the fold), per-pair forests (trained off both folds) feeding the generated
// regressors of the second-step kernel fits, and per-fold initial coefficients
// from the cross-fitted partialling-out normal equations.
struct NuisanceSet {
  FoldPartition partition;
  ForestHyperparams hp;
  std::vector<PropensityModel> fold_models;   // L entries
  std::vector<PropensityModel> pair_models;   // L(L-1)/2 entries, see pair_index
  std::vector<KernelRegressor> fold_kernels;  // L entries; targets [X1..XK, Y]
  std::vector<Vec> beta_init;                 // L entries
  std::vector<double> p_hat;                  // n entries, clipped fold-model predictions
  std::size_t clip_count = 0;
  std::size_t kernel_fallbacks = 0;
  double bandwidth_min = 0.0;
  double bandwidth_max = 0.0;
};

std::size_t pair_index(std::size_t l, std::size_t lp, std::size_t L);

// Full-sample (non-cross-fitted) nuisances for the naive comparators.
struct FullSampleNuisances {
  ForestHyperparams hp;
  PropensityModel model;
  KernelRegressor kernel;  // targets [X1..XK, Y]
  std::vector<double> p_hat;
  std::size_t clip_count = 0;
  double bandwidth = 0.0;
};

NuisanceSet fit_nuisances(const Dataset& data, const FoldPartition& partition,
                          const EstimatorConfig& config, Rng rng, const ForestHyperparams& hp);

FullSampleNuisances fit_full_nuisances(const Dataset& data, const EstimatorConfig& config,
                                       Rng rng, const ForestHyperparams& hp);

// Per-observation nuisance values at the cross-fitted / full-sample estimates.
std::vector<NuisanceValues> nuisance_values(const Dataset& data, const NuisanceSet& ns);
std::vector<NuisanceValues> nuisance_values(const Dataset& data, const FullSampleNuisances& ns,
                                            const Vec& beta_init);

// Sandwich covariance J^{-1} (1/n sum m m') J^{-1} / n, symmetrized.
// moment_rows holds one per-observation moment contribution per row.
// Throws degenerate_design_error when cond(J) exceeds 1e12.
Mat sandwich_covariance(const Mat& jacobian, const Mat& moment_rows);

// End-to-end pipelines. Deterministic given (dataset, config.seed), independent
// of worker count. Preconditions: n >= 10 K and n >= 2 L.
FitResult estimate_locally_robust(const Dataset& data, const EstimatorConfig& config);
FitResult estimate_robinson(const Dataset& data, const EstimatorConfig& config);
FitResult estimate_robinson_orthogonal(const Dataset& data, const EstimatorConfig& config);
FitResult estimate_robinson_crossfit(const Dataset& data, const EstimatorConfig& config);

// Shared-nuisance entry points used by the Monte Carlo driver (all four
// estimators of a replication reuse one sample, one partition, one tuned
// hyperparameter set, and the same fitted nuisances where they coincide).
FitResult locally_robust_from(const Dataset& data, const NuisanceSet& ns);
FitResult robinson_crossfit_from(const Dataset& data, const NuisanceSet& ns);
FitResult robinson_from(const Dataset& data, const FullSampleNuisances& ns);
FitResult robinson_orthogonal_from(const Dataset& data, const FullSampleNuisances& ns);

// Hyperparameter choice for one estimation sample: the configured fixed set,
// a single-member grid, or 5-fold cross-validated tuning.
ForestHyperparams choose_hyperparams(const Dataset& data, const EstimatorConfig& config, Rng rng);

// Seed-derivation tags shared by the wrappers and the Monte Carlo driver.
inline constexpr std::uint64_t kSeedTune = 1;
inline constexpr std::uint64_t kSeedFolds = 2;
inline constexpr std::uint64_t kSeedCrossfit = 3;
inline constexpr std::uint64_t kSeedFullSample = 4;

}  // namespace selcorr
