#include "selcorr/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "selcorr/parallel.hpp"

namespace selcorr {

namespace {

struct TreeBuilder {
  const MatRM& x;
  const std::vector<double>& targets;      // bootstrap targets, aligned with sample
  std::vector<std::size_t>& sample;        // bootstrap row indices, partitioned in place
  int min_leaf;
  int max_features;
  Rng& rng;
  RegressionTree& tree;
  std::vector<int> feature_pool;           // scratch for per-node feature sampling
  std::vector<std::pair<double, double>> scratch;  // (value, target) pairs

  int build(std::size_t begin, std::size_t end) {
    const std::size_t m = end - begin;
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const double t = targets[sample[i]];
      sum += t;
      sumsq += t * t;
    }
    const double node_mean = sum / static_cast<double>(m);

    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    tree.nodes[node_id].value = node_mean;

    if (m < 2 * static_cast<std::size_t>(min_leaf)) return node_id;
    // Constant target: nothing to gain from splitting.
    if (sumsq - sum * node_mean <= 1e-12 * (1.0 + sumsq)) return node_id;

    const int k = static_cast<int>(x.cols());
    const int mtry = std::min(max_features > 0 ? max_features : k, k);
    // Partial Fisher-Yates over the feature pool.
    for (int f = 0; f < k; ++f) feature_pool[f] = f;
    for (int f = 0; f < mtry; ++f) {
      const int j = f + static_cast<int>(rng.below(static_cast<std::uint64_t>(k - f)));
      std::swap(feature_pool[f], feature_pool[j]);
    }

    double best_score = -std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;

    for (int fi = 0; fi < mtry; ++fi) {
      const int f = feature_pool[fi];
      scratch.resize(m);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t row = sample[begin + i];
        scratch[i] = {x(static_cast<Eigen::Index>(row), f), targets[row]};
      }
      std::sort(scratch.begin(), scratch.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double left_sum = 0.0;
      for (std::size_t i = 1; i < m; ++i) {
        left_sum += scratch[i - 1].second;
        if (scratch[i].first <= scratch[i - 1].first) continue;
        const auto nl = static_cast<double>(i);
        const auto nr = static_cast<double>(m - i);
        if (i < static_cast<std::size_t>(min_leaf) || m - i < static_cast<std::size_t>(min_leaf))
          continue;
        const double right_sum = sum - left_sum;
        const double score = left_sum * left_sum / nl + right_sum * right_sum / nr;
        if (score > best_score) {
          best_score = score;
          best_feature = f;
          best_threshold = 0.5 * (scratch[i - 1].first + scratch[i].first);
        }
      }
    }

    if (best_feature < 0) return node_id;

    const auto mid = std::partition(sample.begin() + static_cast<std::ptrdiff_t>(begin),
                                    sample.begin() + static_cast<std::ptrdiff_t>(end),
                                    [&](std::size_t row) {
                                      return x(static_cast<Eigen::Index>(row), best_feature) <=
                                             best_threshold;
                                    });
    const auto split = static_cast<std::size_t>(mid - sample.begin());
    if (split == begin || split == end) return node_id;  // numeric ties; keep as leaf

    tree.nodes[node_id].feature = best_feature;
    tree.nodes[node_id].threshold = best_threshold;
    const int left = build(begin, split);
    tree.nodes[node_id].left = left;
    const int right = build(split, end);
    tree.nodes[node_id].right = right;
    return node_id;
  }
};

RegressionTree fit_tree(const MatRM& x, const Eigen::VectorXi& d, const ForestHyperparams& hp,
                        Rng rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  auto boot_n = static_cast<std::size_t>(std::lround(hp.bootstrap_fraction * static_cast<double>(n)));
  if (boot_n == 0) boot_n = 1;

  std::vector<double> targets(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) targets[i] = static_cast<double>(d[static_cast<Eigen::Index>(i)]);

  std::vector<std::size_t> sample(boot_n);
  for (std::size_t i = 0; i < boot_n; ++i) sample[i] = rng.below(n);

  RegressionTree tree;
  tree.nodes.reserve(2 * boot_n / std::max(hp.min_leaf, 1) + 4);
  TreeBuilder builder{x, targets, sample, std::max(hp.min_leaf, 1), hp.max_features, rng, tree,
                      std::vector<int>(static_cast<std::size_t>(x.cols())), {}};
  builder.build(0, boot_n);
  return tree;
}

}  // namespace

PropensityModel::PropensityModel(std::vector<RegressionTree> trees, int dim_x, double clip_lo,
                                 double clip_hi)
    : trees_(std::move(trees)), dim_x_(dim_x), clip_lo_(clip_lo), clip_hi_(clip_hi) {
  if (!(clip_lo_ > 0.0 && clip_lo_ < clip_hi_ && clip_hi_ < 1.0))
    throw std::invalid_argument("PropensityModel: need 0 < clip_lo < clip_hi < 1");
}

double PropensityModel::predict_raw_ptr(const double* x) const {
  double sum = 0.0;
  for (const auto& tree : trees_) sum += tree.predict(x);
  return sum / static_cast<double>(trees_.size());
}

double PropensityModel::predict_raw(const Vec& x) const {
  if (x.size() != dim_x_) throw std::invalid_argument("PropensityModel: dimension mismatch");
  return predict_raw_ptr(x.data());
}

double predict_propensity(const PropensityModel& model, const Vec& x) {
  return std::clamp(model.predict_raw(x), model.clip_lo(), model.clip_hi());
}

PropensityModel fit_random_forest(const MatRM& x_rows, const Eigen::VectorXi& d,
                                  const ForestHyperparams& hp, Rng rng, double clip_lo,
                                  double clip_hi) {
  if (x_rows.rows() == 0 || x_rows.rows() != d.size())
    throw std::invalid_argument("fit_random_forest: empty or mismatched data");
  if (hp.n_trees < 1) throw std::invalid_argument("fit_random_forest: n_trees must be >= 1");
  std::vector<RegressionTree> trees(static_cast<std::size_t>(hp.n_trees));
  parallel_for(trees.size(), [&](std::size_t t) {
    trees[t] = fit_tree(x_rows, d, hp, rng.split(t));
  });
  return PropensityModel(std::move(trees), static_cast<int>(x_rows.cols()), clip_lo, clip_hi);
}

std::vector<double> predict_propensity_rows(const PropensityModel& model, const MatRM& x_rows) {
  std::vector<double> out(static_cast<std::size_t>(x_rows.rows()));
  parallel_for(out.size(), [&](std::size_t i) {
    const double raw = model.predict_raw_ptr(x_rows.row(static_cast<Eigen::Index>(i)).data());
    out[i] = std::clamp(raw, model.clip_lo(), model.clip_hi());
  });
  return out;
}

ForestHyperparams tune_forest_cv(const MatRM& x_rows, const Eigen::VectorXi& d,
                                 const std::vector<ForestHyperparams>& grid, std::size_t folds,
                                 Rng rng) {
  if (grid.empty()) throw std::invalid_argument("tune_forest_cv: empty grid");
  if (grid.size() == 1) return grid.front();
  if (folds < 2) throw std::invalid_argument("tune_forest_cv: need folds >= 2");

  const auto n = static_cast<std::size_t>(x_rows.rows());
  const FoldPartition cv = partition_folds(n, folds, rng.split(0));

  // One work unit per (grid member, fold); slot-written so scheduling is irrelevant.
  std::vector<double> sse(grid.size() * folds, 0.0);
  parallel_for(grid.size() * folds, [&](std::size_t unit) {
    const std::size_t g = unit / folds, fold = unit % folds;
    const auto& holdout = cv.fold(fold);
    std::vector<std::size_t> train;
    train.reserve(n - holdout.size());
    for (std::size_t ell = 0; ell < folds; ++ell)
      if (ell != fold) train.insert(train.end(), cv.fold(ell).begin(), cv.fold(ell).end());
    std::sort(train.begin(), train.end());

    MatRM xt(train.size(), x_rows.cols());
    Eigen::VectorXi dt(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
      xt.row(static_cast<Eigen::Index>(i)) = x_rows.row(static_cast<Eigen::Index>(train[i]));
      dt[static_cast<Eigen::Index>(i)] = d[static_cast<Eigen::Index>(train[i])];
    }
    const PropensityModel model = fit_random_forest(xt, dt, grid[g], rng.split(1 + unit));
    double err = 0.0;
    for (std::size_t i : holdout) {
      const double pred = model.predict_raw_ptr(x_rows.row(static_cast<Eigen::Index>(i)).data());
      const double diff = pred - static_cast<double>(d[static_cast<Eigen::Index>(i)]);
      err += diff * diff;
    }
    sse[unit] = err;
  });

  std::size_t best = 0;
  double best_mse = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double total = 0.0;
    for (std::size_t fold = 0; fold < folds; ++fold) total += sse[g * folds + fold];
    const double mse = total / static_cast<double>(n);
    if (mse < best_mse) {
      best_mse = mse;
      best = g;
    }
  }
  return grid[best];
}

std::vector<ForestHyperparams> default_forest_grid(int dim_x) {
  const int third = (dim_x + 2) / 3;
  std::vector<int> feature_counts{third};
  if (dim_x != third) feature_counts.push_back(dim_x);
  std::vector<ForestHyperparams> grid;
  for (int min_leaf : {1, 5, 10, 25})
    for (int max_features : feature_counts) {
      ForestHyperparams hp;
      hp.n_trees = 200;
      hp.min_leaf = min_leaf;
      hp.max_features = max_features;
      hp.bootstrap_fraction = 1.0;
      grid.push_back(hp);
    }
  return grid;
}

}  // namespace selcorr
