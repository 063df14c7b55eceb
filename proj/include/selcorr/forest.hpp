#pragma once

#include <cstddef>
#include <vector>

#include "selcorr/dataset.hpp"
#include "selcorr/rng.hpp"

namespace selcorr {

struct ForestHyperparams {
  int n_trees = 200;
  int min_leaf = 5;
  int max_features = 0;  // features sampled per split; 0 = all
  double bootstrap_fraction = 1.0;
};

// One CART regression tree on squared-error splits, stored as a flat node array.
struct RegressionTree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  std::vector<Node> nodes;

  double predict(const double* x) const {
    int idx = 0;
    while (nodes[idx].feature >= 0)
      idx = (x[nodes[idx].feature] <= nodes[idx].threshold) ? nodes[idx].left : nodes[idx].right;
    return nodes[idx].value;
  }
};

// Regression random forest on the binary selection target, predicting the
// propensity of selection. Predictions are clipped to [clip_lo, clip_hi] to
// keep the second-step denominators away from 0 and 1.
class PropensityModel {
 public:
  PropensityModel() = default;
  PropensityModel(std::vector<RegressionTree> trees, int dim_x, double clip_lo, double clip_hi);

  double clip_lo() const { return clip_lo_; }
  double clip_hi() const { return clip_hi_; }
  int dim_x() const { return dim_x_; }
  std::size_t tree_count() const { return trees_.size(); }
  const RegressionTree& tree(std::size_t t) const { return trees_[t]; }

  // Plain tree-ensemble mean, before clipping.
  double predict_raw(const Vec& x) const;
  double predict_raw_ptr(const double* x) const;

 private:
  std::vector<RegressionTree> trees_;
  int dim_x_ = 0;
  double clip_lo_ = 0.001;
  double clip_hi_ = 0.999;
};

// Ensemble mean clipped to [clip_lo, clip_hi].
double predict_propensity(const PropensityModel& model, const Vec& x);

// Fits the forest; per-tree randomness comes from rng.split(tree_index) so the
// result does not depend on how tree fitting is scheduled across workers.
PropensityModel fit_random_forest(const MatRM& x_rows, const Eigen::VectorXi& d,
                                  const ForestHyperparams& hp, Rng rng, double clip_lo = 0.001,
                                  double clip_hi = 0.999);

// Clipped predictions for every row of a matrix (parallel over rows).
std::vector<double> predict_propensity_rows(const PropensityModel& model, const MatRM& x_rows);

// Picks the grid member minimizing cross-validated MSE of d-prediction;
// ties broken by grid order. A single-member grid is returned directly.
ForestHyperparams tune_forest_cv(const MatRM& x_rows, const Eigen::VectorXi& d,
                                 const std::vector<ForestHyperparams>& grid, std::size_t folds,
                                 Rng rng);

// Default tuning grid: 200 trees, min_leaf in {1,5,10,25},
// max_features in {ceil(K/3), K}, bootstrap fraction 1 with replacement.
std::vector<ForestHyperparams> default_forest_grid(int dim_x);

}  // namespace selcorr
