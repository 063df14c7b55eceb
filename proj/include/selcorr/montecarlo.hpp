#pragma once

#include <optional>
#include <string>
#include <vector>

#include "selcorr/dgp.hpp"
#include "selcorr/estimators.hpp"

namespace selcorr {

// Outcome of one estimator on one replication. Failures carry a reason and are
// kept in the record stream rather than dropped.
struct ReplicationRecord {
  std::size_t rep_id = 0;
  EstimatorTag estimator_tag = EstimatorTag::LocallyRobust;
  bool ok = false;
  std::string failure_reason;
  Vec beta_hat;
  Vec se;
  double elapsed_seconds = 0.0;
  bool covariance_psd = true;
};

struct EstimatorSummary {
  EstimatorTag tag = EstimatorTag::LocallyRobust;
  std::size_t successes = 0;
  std::size_t failures = 0;
  double average_bias = 0.0;
  double average_sd = 0.0;
  double average_coverage = 0.0;
  double max_coverage = 0.0;
  double min_coverage = 0.0;
};

struct SummaryTable {
  std::string panel_label;
  std::size_t n = 0;
  std::vector<EstimatorSummary> rows;  // fixed order: LR, Robinson, Robinson+Orth, Robinson+CF
};

struct RunOptions {
  bool repeated_sample = false;  // duplicate-rows experiment
  bool tune_per_replication = true;
};

// Runs R replications of a design. Replication b derives its stream from
// split(master_seed, b); all requested estimators share the replication's
// sample and fold partition. Records are slot-written, so the result is
// independent of how replications are scheduled across workers.
std::vector<ReplicationRecord> run_design(const SimulationDesign& design,
                                          const std::vector<EstimatorTag>& estimators,
                                          std::size_t replications, EstimatorConfig config,
                                          std::uint64_t master_seed, const RunOptions& options = {});

// Sample metrics per estimator and coefficient: mean absolute deviation from
// the truth, replication standard deviation, and the share of replications
// whose z-interval covers the truth; aggregated over coefficients.
std::vector<EstimatorSummary> summarize(const std::vector<ReplicationRecord>& records,
                                        const Vec& true_beta, double z = 1.96);

enum class TableFormat { Markdown, Csv };

std::string render_table(const std::vector<SummaryTable>& panels, TableFormat format);

// Raw record export, full precision (17 significant digits), one row per
// (replication, estimator, coefficient).
std::string records_to_csv(const std::vector<ReplicationRecord>& records);
std::string failures_to_csv(const std::vector<ReplicationRecord>& records);

}  // namespace selcorr
