#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "selcorr/rng.hpp"

namespace selcorr {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
// Row-major so each observation's covariates are contiguous.
using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One observation (y, d, x). y is the observed outcome, already zeroed where d = 0.
struct Observation {
  double y = 0.0;
  int d = 0;
  Vec x;
};

// Immutable sample of n observations with K covariates (no intercept column:
// an outcome-equation intercept is not separable from the selectivity term,
// so the estimators target slopes only).
class Dataset {
 public:
  Dataset(MatRM x, Vec y, Eigen::VectorXi d, std::vector<std::string> column_names);

  std::size_t size() const { return static_cast<std::size_t>(x_.rows()); }
  int dim_x() const { return static_cast<int>(x_.cols()); }

  const MatRM& x() const { return x_; }
  const Vec& y() const { return y_; }
  const Eigen::VectorXi& d() const { return d_; }
  const std::vector<std::string>& column_names() const { return names_; }

  double y_at(std::size_t i) const { return y_[static_cast<Eigen::Index>(i)]; }
  int d_at(std::size_t i) const { return d_[static_cast<Eigen::Index>(i)]; }
  auto x_row(std::size_t i) const { return x_.row(static_cast<Eigen::Index>(i)); }

  Observation observation(std::size_t i) const {
    return Observation{y_at(i), d_at(i), x_row(i).transpose()};
  }

  double selection_rate() const {
    return size() == 0 ? 0.0 : d_.cast<double>().sum() / static_cast<double>(size());
  }

 private:
  MatRM x_;
  Vec y_;
  Eigen::VectorXi d_;
  std::vector<std::string> names_;
};

// Raw ingestion row: y may be missing (allowed only where d = 0).
struct RawRow {
  double d = 0.0;
  std::optional<double> y;
  std::vector<double> x;
};

struct IngestOptions {
  bool strict = false;  // strict: d = 0 with y != 0 is an error instead of a coercion
};

struct IngestReport {
  std::size_t coerced_y = 0;  // rows where y was forced to 0 because d = 0
};

// Validates rows against the schema and builds a Dataset. Enforces y = y*·d at
// ingestion: lenient mode coerces y to 0 where d = 0 and counts, strict mode throws.
Dataset validate_dataset(const std::vector<RawRow>& rows,
                         const std::vector<std::string>& column_names,
                         const IngestOptions& options = {}, IngestReport* report = nullptr);

// Disjoint index sets I_1..I_L covering 0..n-1, sizes differing by at most one.
class FoldPartition {
 public:
  FoldPartition(std::vector<std::vector<std::size_t>> folds, std::size_t n);

  std::size_t n() const { return n_; }
  std::size_t fold_count() const { return folds_.size(); }
  const std::vector<std::size_t>& fold(std::size_t ell) const { return folds_[ell]; }
  std::size_t fold_of(std::size_t i) const { return fold_of_[i]; }

 private:
  std::vector<std::vector<std::size_t>> folds_;
  std::vector<std::size_t> fold_of_;
  std::size_t n_ = 0;
};

// Uniformly random partition into L folds of size floor(n/L) or ceil(n/L);
// deterministic given the rng seed.
FoldPartition partition_folds(std::size_t n, std::size_t L, Rng rng);

enum class EstimatorTag { LocallyRobust, Robinson, RobinsonOrthogonal, RobinsonCrossfit };

const char* estimator_name(EstimatorTag tag);
std::optional<EstimatorTag> estimator_from_name(const std::string& name);

// Coefficient estimates with sandwich covariance and per-run diagnostics.
struct FitResult {
  Vec beta;
  Mat covariance;
  Vec standard_errors;
  EstimatorTag estimator_tag = EstimatorTag::LocallyRobust;
  std::map<std::string, double> diagnostics;
};

}  // namespace selcorr
