#include "selcorr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "selcorr/errors.hpp"

namespace selcorr {

Dataset::Dataset(MatRM x, Vec y, Eigen::VectorXi d, std::vector<std::string> column_names)
    : x_(std::move(x)), y_(std::move(y)), d_(std::move(d)), names_(std::move(column_names)) {
  if (x_.rows() != y_.size() || x_.rows() != d_.size())
    throw std::invalid_argument("Dataset: row count mismatch");
  if (static_cast<Eigen::Index>(names_.size()) != x_.cols())
    throw std::invalid_argument("Dataset: column name count mismatch");
}

Dataset validate_dataset(const std::vector<RawRow>& rows,
                         const std::vector<std::string>& column_names,
                         const IngestOptions& options, IngestReport* report) {
  if (rows.empty()) throw schema_error("validate_dataset: no rows");
  const std::size_t k = column_names.size();
  if (k == 0) throw schema_error("validate_dataset: no covariate columns");

  const std::size_t n = rows.size();
  MatRM x(n, k);
  Vec y(n);
  Eigen::VectorXi d(n);
  IngestReport rep;

  for (std::size_t i = 0; i < n; ++i) {
    const RawRow& row = rows[i];
    if (row.x.size() != k)
      throw schema_error("row " + std::to_string(i) + ": expected " + std::to_string(k) +
                         " covariates, got " + std::to_string(row.x.size()));
    if (!(row.d == 0.0 || row.d == 1.0))
      throw schema_error("row " + std::to_string(i) + ": d must be 0 or 1, got " +
                         std::to_string(row.d));
    const int di = static_cast<int>(row.d);

    double yi;
    if (di == 0) {
      // Y = Y*·D forces y = 0 on unselected rows.
      if (!row.y.has_value() || *row.y == 0.0) {
        if (!row.y.has_value()) ++rep.coerced_y;
        yi = 0.0;
      } else if (options.strict) {
        throw consistency_error("row " + std::to_string(i) + ": d = 0 but y = " +
                                std::to_string(*row.y) + " (strict mode)");
      } else {
        ++rep.coerced_y;
        yi = 0.0;
      }
    } else {
      if (!row.y.has_value() || !std::isfinite(*row.y))
        throw schema_error("row " + std::to_string(i) + ": selected row needs a finite y");
      yi = *row.y;
    }

    for (std::size_t j = 0; j < k; ++j) {
      if (!std::isfinite(row.x[j]))
        throw schema_error("row " + std::to_string(i) + ", column " + column_names[j] +
                           ": non-finite covariate");
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row.x[j];
    }
    y[static_cast<Eigen::Index>(i)] = yi;
    d[static_cast<Eigen::Index>(i)] = di;
  }

  if (report) *report = rep;
  return Dataset(std::move(x), std::move(y), std::move(d), column_names);
}

FoldPartition::FoldPartition(std::vector<std::vector<std::size_t>> folds, std::size_t n)
    : folds_(std::move(folds)), n_(n) {
  fold_of_.assign(n_, folds_.size());
  std::size_t total = 0;
  for (std::size_t ell = 0; ell < folds_.size(); ++ell) {
    if (folds_[ell].empty()) throw std::invalid_argument("FoldPartition: empty fold");
    for (std::size_t i : folds_[ell]) {
      if (i >= n_ || fold_of_[i] != folds_.size())
        throw std::invalid_argument("FoldPartition: folds not a disjoint cover");
      fold_of_[i] = ell;
    }
    total += folds_[ell].size();
  }
  if (total != n_) throw std::invalid_argument("FoldPartition: folds do not cover 0..n-1");
}

FoldPartition partition_folds(std::size_t n, std::size_t L, Rng rng) {
  if (L <= 1 || L > n)
    throw std::invalid_argument("partition_folds: need 1 < L <= n, got L = " + std::to_string(L) +
                                ", n = " + std::to_string(n));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.below(i + 1);
    std::swap(perm[i], perm[j]);
  }
  const std::size_t base = n / L, extra = n % L;
  std::vector<std::vector<std::size_t>> folds(L);
  std::size_t pos = 0;
  for (std::size_t ell = 0; ell < L; ++ell) {
    const std::size_t sz = base + (ell < extra ? 1 : 0);
    folds[ell].assign(perm.begin() + static_cast<std::ptrdiff_t>(pos),
                      perm.begin() + static_cast<std::ptrdiff_t>(pos + sz));
    pos += sz;
  }
  return FoldPartition(std::move(folds), n);
}

const char* estimator_name(EstimatorTag tag) {
  switch (tag) {
    case EstimatorTag::LocallyRobust: return "locally_robust";
    case EstimatorTag::Robinson: return "robinson";
    case EstimatorTag::RobinsonOrthogonal: return "robinson_orthogonal";
    case EstimatorTag::RobinsonCrossfit: return "robinson_crossfit";
  }
  return "unknown";
}

std::optional<EstimatorTag> estimator_from_name(const std::string& name) {
  if (name == "locally_robust" || name == "lr") return EstimatorTag::LocallyRobust;
  if (name == "robinson") return EstimatorTag::Robinson;
  if (name == "robinson_orthogonal" || name == "robinson-orth") return EstimatorTag::RobinsonOrthogonal;
  if (name == "robinson_crossfit" || name == "robinson-cf") return EstimatorTag::RobinsonCrossfit;
  return std::nullopt;
}

}  // namespace selcorr
