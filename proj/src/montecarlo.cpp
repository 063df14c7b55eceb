#include "selcorr/montecarlo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "selcorr/parallel.hpp"

namespace selcorr {

namespace {

const std::vector<EstimatorTag> kTableOrder = {
    EstimatorTag::LocallyRobust, EstimatorTag::Robinson, EstimatorTag::RobinsonOrthogonal,
    EstimatorTag::RobinsonCrossfit};

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

ReplicationRecord run_one(const Dataset& sample, EstimatorTag tag, std::size_t rep,
                          const NuisanceSet* crossfit, const FullSampleNuisances* full) {
  ReplicationRecord rec;
  rec.rep_id = rep;
  rec.estimator_tag = tag;
  const auto start = std::chrono::steady_clock::now();
  try {
    FitResult fit;
    switch (tag) {
      case EstimatorTag::LocallyRobust: fit = locally_robust_from(sample, *crossfit); break;
      case EstimatorTag::RobinsonCrossfit: fit = robinson_crossfit_from(sample, *crossfit); break;
      case EstimatorTag::Robinson: fit = robinson_from(sample, *full); break;
      case EstimatorTag::RobinsonOrthogonal: fit = robinson_orthogonal_from(sample, *full); break;
    }
    rec.ok = true;
    rec.beta_hat = fit.beta;
    rec.se = fit.standard_errors;
    const auto it = fit.diagnostics.find("cov_min_eig_over_trace");
    rec.covariance_psd = it == fit.diagnostics.end() || it->second >= -1e-10;
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.failure_reason = e.what();
  }
  rec.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

}  // namespace

std::vector<ReplicationRecord> run_design(const SimulationDesign& design,
                                          const std::vector<EstimatorTag>& estimators,
                                          std::size_t replications, EstimatorConfig config,
                                          std::uint64_t master_seed, const RunOptions& options) {
  if (replications < 1) throw std::invalid_argument("run_design: need R >= 1");
  SimulationDesign calibrated = design;
  if (!calibrated.c.has_value())
    calibrated.c = calibrate_constant(calibrated, Rng(calibrated.seed).split(999));

  // One tuned hyperparameter set per run when tuning per replication is off:
  // tune on a pilot sample drawn from the design itself.
  if (!options.tune_per_replication && !config.fixed_hp.has_value()) {
    const Dataset pilot = generate_sample(calibrated, Rng(master_seed).split(777));
    EstimatorConfig pilot_config = config;
    pilot_config.tune_per_fit = true;
    config.fixed_hp =
        choose_hyperparams(pilot, pilot_config, Rng(master_seed).split(778));
    config.tune_per_fit = false;
  }

  const bool needs_crossfit =
      std::any_of(estimators.begin(), estimators.end(), [](EstimatorTag t) {
        return t == EstimatorTag::LocallyRobust || t == EstimatorTag::RobinsonCrossfit;
      });
  const bool needs_full =
      std::any_of(estimators.begin(), estimators.end(), [](EstimatorTag t) {
        return t == EstimatorTag::Robinson || t == EstimatorTag::RobinsonOrthogonal;
      });

  std::vector<ReplicationRecord> records(replications * estimators.size());
  parallel_for(replications, [&](std::size_t rep) {
    const Rng rep_rng = Rng(master_seed).split(rep);
    const Dataset sample = options.repeated_sample
                               ? generate_repeated_sample(calibrated, rep_rng.split(0))
                               : generate_sample(calibrated, rep_rng.split(0));
    EstimatorConfig rep_config = config;
    rep_config.seed = rep_rng.split(1).key();
    const Rng est_rng(rep_config.seed);

    ForestHyperparams hp;
    std::optional<NuisanceSet> crossfit;
    std::optional<FullSampleNuisances> full;
    std::string setup_failure;
    try {
      hp = choose_hyperparams(sample, rep_config, est_rng.split(kSeedTune));
      if (needs_crossfit) {
        const FoldPartition partition =
            partition_folds(sample.size(), rep_config.folds, est_rng.split(kSeedFolds));
        crossfit = fit_nuisances(sample, partition, rep_config, est_rng.split(kSeedCrossfit), hp);
      }
      if (needs_full)
        full = fit_full_nuisances(sample, rep_config, est_rng.split(kSeedFullSample), hp);
    } catch (const std::exception& e) {
      setup_failure = e.what();
    }

    for (std::size_t e = 0; e < estimators.size(); ++e) {
      const std::size_t slot = rep * estimators.size() + e;
      if (!setup_failure.empty()) {
        records[slot].rep_id = rep;
        records[slot].estimator_tag = estimators[e];
        records[slot].ok = false;
        records[slot].failure_reason = setup_failure;
        continue;
      }
      records[slot] = run_one(sample, estimators[e], rep, crossfit ? &*crossfit : nullptr,
                              full ? &*full : nullptr);
    }
  });
  return records;
}

std::vector<EstimatorSummary> summarize(const std::vector<ReplicationRecord>& records,
                                        const Vec& true_beta, double z) {
  std::vector<EstimatorSummary> out;
  const auto k = static_cast<std::size_t>(true_beta.size());
  for (EstimatorTag tag : kTableOrder) {
    std::vector<const ReplicationRecord*> ok_records;
    std::size_t failures = 0;
    for (const auto& rec : records) {
      if (rec.estimator_tag != tag) continue;
      if (rec.ok)
        ok_records.push_back(&rec);
      else
        ++failures;
    }
    if (ok_records.empty() && failures == 0) continue;  // estimator not in this run

    EstimatorSummary s;
    s.tag = tag;
    s.successes = ok_records.size();
    s.failures = failures;
    if (!ok_records.empty()) {
      const auto r = static_cast<double>(ok_records.size());
      double bias_total = 0.0, sd_total = 0.0, cov_total = 0.0;
      double cov_max = 0.0, cov_min = 1.0;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const auto ki = static_cast<Eigen::Index>(kk);
        double abs_dev = 0.0, mean_hat = 0.0, coverage = 0.0;
        for (const auto* rec : ok_records) {
          abs_dev += std::fabs(rec->beta_hat[ki] - true_beta[ki]);
          mean_hat += rec->beta_hat[ki];
        }
        mean_hat /= r;
        double variance = 0.0;
        for (const auto* rec : ok_records) {
          variance += (rec->beta_hat[ki] - mean_hat) * (rec->beta_hat[ki] - mean_hat);
          if (std::fabs(rec->beta_hat[ki] - true_beta[ki]) <= z * rec->se[ki]) coverage += 1.0;
        }
        const double bias_k = abs_dev / r;
        const double sd_k = std::sqrt(variance / r);
        const double cov_k = coverage / r;
        bias_total += bias_k;
        sd_total += sd_k;
        cov_total += cov_k;
        cov_max = std::max(cov_max, cov_k);
        cov_min = std::min(cov_min, cov_k);
      }
      s.average_bias = bias_total / static_cast<double>(k);
      s.average_sd = sd_total / static_cast<double>(k);
      s.average_coverage = cov_total / static_cast<double>(k);
      s.max_coverage = cov_max;
      s.min_coverage = cov_min;
    }
    out.push_back(s);
  }
  return out;
}

std::string render_table(const std::vector<SummaryTable>& panels, TableFormat format) {
  if (panels.empty()) throw std::invalid_argument("render_table: no panels");
  std::ostringstream os;
  const char* metric_names[5] = {"Average Bias", "Average SD", "Average Coverage", "Max Coverage",
                                 "Min Coverage"};
  const char* column_names[4] = {"Locally Robust", "Robinson", "Robinson+Orth", "Robinson+CF"};

  auto metric_of = [](const EstimatorSummary& s, int metric) {
    switch (metric) {
      case 0: return s.average_bias;
      case 1: return s.average_sd;
      case 2: return s.average_coverage;
      case 3: return s.max_coverage;
      default: return s.min_coverage;
    }
  };
  auto row_for = [](const SummaryTable& panel, EstimatorTag tag) -> const EstimatorSummary* {
    for (const auto& s : panel.rows)
      if (s.tag == tag) return &s;
    return nullptr;
  };

  if (format == TableFormat::Markdown) {
    for (const auto& panel : panels) {
      os << "### " << panel.panel_label << " (n = " << panel.n << ")\n\n";
      os << "| Metric |";
      for (const char* c : column_names) os << ' ' << c << " |";
      os << "\n|---|---|---|---|---|\n";
      for (int metric = 0; metric < 5; ++metric) {
        os << "| " << metric_names[metric] << " |";
        for (EstimatorTag tag : kTableOrder) {
          const EstimatorSummary* s = row_for(panel, tag);
          if (s && s->successes > 0)
            os << ' ' << format3(metric_of(*s, metric)) << " |";
          else if (s)
            os << " failed(" << s->failures << ") |";
          else
            os << " - |";
        }
        os << '\n';
      }
      bool any_failures = false;
      for (const auto& s : panel.rows) any_failures = any_failures || s.failures > 0;
      if (any_failures) {
        os << "\nFailures:";
        for (const auto& s : panel.rows)
          if (s.failures > 0) os << ' ' << estimator_name(s.tag) << "=" << s.failures;
        os << '\n';
      }
      os << '\n';
    }
  } else {
    os << "panel,n,estimator,average_bias,average_sd,average_coverage,max_coverage,min_coverage,"
          "successes,failures\n";
    for (const auto& panel : panels)
      for (const auto& s : panel.rows) {
        os << panel.panel_label << ',' << panel.n << ',' << estimator_name(s.tag) << ','
           << format3(s.average_bias) << ',' << format3(s.average_sd) << ','
           << format3(s.average_coverage) << ',' << format3(s.max_coverage) << ','
           << format3(s.min_coverage) << ',' << s.successes << ',' << s.failures << '\n';
      }
  }
  return os.str();
}

std::string records_to_csv(const std::vector<ReplicationRecord>& records) {
  std::ostringstream os;
  os << "rep_id,estimator,k,beta_hat_k,se_k\n";
  for (const auto& rec : records) {
    if (!rec.ok) continue;
    for (Eigen::Index k = 0; k < rec.beta_hat.size(); ++k)
      os << rec.rep_id << ',' << estimator_name(rec.estimator_tag) << ',' << (k + 1) << ','
         << format_full(rec.beta_hat[k]) << ',' << format_full(rec.se[k]) << '\n';
  }
  return os.str();
}

std::string failures_to_csv(const std::vector<ReplicationRecord>& records) {
  std::ostringstream os;
  os << "rep_id,estimator,reason\n";
  for (const auto& rec : records) {
    if (rec.ok) continue;
    std::string reason = rec.failure_reason;
    std::replace(reason.begin(), reason.end(), ',', ';');
    std::replace(reason.begin(), reason.end(), '\n', ' ');
    os << rec.rep_id << ',' << estimator_name(rec.estimator_tag) << ',' << reason << '\n';
  }
  return os.str();
}

}  // namespace selcorr
