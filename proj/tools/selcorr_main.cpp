// selcorr: locally robust estimation of linear outcome coefficients under
// sample selection, with naive partialling-out comparators and a Monte Carlo
// simulation driver.
//
// Exit codes: 0 ok, 2 input schema error, 3 degenerate design, 4 calibration failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "selcorr/errors.hpp"
#include "selcorr/montecarlo.hpp"
#include "selcorr/parallel.hpp"
#include "selcorr/serialize.hpp"

namespace {

using namespace selcorr;

constexpr int kExitSchema = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitCalibration = 4;

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = -1;
};

void apply_threads(const RunConfig& config, const CommonFlags& flags) {
  int threads = config.threads;
  if (flags.threads >= 0) threads = flags.threads;
  if (threads == 0) {
    if (const char* env = std::getenv("SELCORR_THREADS")) threads = std::atoi(env);
  }
  set_thread_cap(threads > 0 ? threads : 0);
}

std::string format3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void print_coefficient_table(const Dataset& data, const FitResult& fit) {
  std::printf("%-18s %12s %12s\n", "covariate", "estimate", "SE");
  for (int k = 0; k < data.dim_x(); ++k) {
    const std::string se = "(" + format3(fit.standard_errors[k]) + ")";
    std::printf("%-18s %12s %12s\n", data.column_names()[static_cast<std::size_t>(k)].c_str(),
                format3(fit.beta[k]).c_str(), se.c_str());
  }
  std::printf("\nestimator: %s   n: %.0f   selected: %.3f\n", estimator_name(fit.estimator_tag),
              fit.diagnostics.at("n"), fit.diagnostics.at("selection_rate"));
}

std::string default_cache_path(const std::string& out_dir) {
  if (out_dir.empty()) return "selcorr_calibration_cache.json";
  return (std::filesystem::path(out_dir) / "selcorr_calibration_cache.json").string();
}

double calibrated_constant(RunConfig& config, const std::string& cache_path, bool* from_cache) {
  if (config.design.c.has_value()) {
    if (from_cache) *from_cache = false;
    return *config.design.c;
  }
  const std::uint64_t calib_seed = Rng(config.design.seed).split(999).key();
  const std::uint64_t key = calibration_key(config.design, calib_seed);
  CalibrationCache cache(cache_path);
  if (const auto hit = cache.lookup(key)) {
    if (from_cache) *from_cache = true;
    return *hit;
  }
  const double c = calibrate_constant(config.design, Rng(config.design.seed).split(999));
  cache.store(key, c);
  if (from_cache) *from_cache = false;
  return c;
}

int cmd_estimate(const std::string& csv_path, RunConfig config, const CommonFlags& flags,
                 const std::string& estimator, const std::string& out_json, bool strict) {
  apply_threads(config, flags);
  if (flags.seed_set) config.estimator.seed = flags.seed;

  IngestOptions ingest;
  ingest.strict = strict;
  IngestReport report;
  Dataset data = read_dataset_csv(csv_path, ingest, &report);
  if (report.coerced_y > 0)
    std::fprintf(stderr, "note: coerced y to 0 on %zu unselected rows\n", report.coerced_y);

  const auto tag = estimator_from_name(estimator);
  if (!tag) throw CLI::ValidationError("--estimator", "unknown estimator '" + estimator + "'");

  FitResult fit;
  switch (*tag) {
    case EstimatorTag::LocallyRobust: fit = estimate_locally_robust(data, config.estimator); break;
    case EstimatorTag::Robinson: fit = estimate_robinson(data, config.estimator); break;
    case EstimatorTag::RobinsonOrthogonal:
      fit = estimate_robinson_orthogonal(data, config.estimator);
      break;
    case EstimatorTag::RobinsonCrossfit:
      fit = estimate_robinson_crossfit(data, config.estimator);
      break;
  }
  print_coefficient_table(data, fit);
  if (!out_json.empty()) write_text_file(out_json, fit_result_to_json(fit));
  return 0;
}

int cmd_calibrate(RunConfig config, const CommonFlags& flags, const std::string& cache_path) {
  apply_threads(config, flags);
  if (flags.seed_set) config.design.seed = flags.seed;
  bool from_cache = false;
  const double c = calibrated_constant(config, cache_path, &from_cache);
  std::printf("c = %.10g%s\n", c, from_cache ? "  (cache hit)" : "");
  return 0;
}

int cmd_simulate(RunConfig config, const CommonFlags& flags, const std::string& out_dir,
                 const std::vector<std::size_t>& panel_sizes) {
  apply_threads(config, flags);
  if (flags.seed_set) config.seed = flags.seed;
  if (!out_dir.empty()) config.out_dir = out_dir;
  if (!config.out_dir.empty()) std::filesystem::create_directories(config.out_dir);

  config.design.c = calibrated_constant(config, default_cache_path(config.out_dir), nullptr);

  const std::vector<EstimatorTag> estimators = {
      EstimatorTag::LocallyRobust, EstimatorTag::Robinson, EstimatorTag::RobinsonOrthogonal,
      EstimatorTag::RobinsonCrossfit};
  RunOptions options;
  options.repeated_sample = config.repeated;
  options.tune_per_replication = config.estimator.tune_per_fit;

  const std::vector<std::size_t> sizes =
      panel_sizes.empty() ? std::vector<std::size_t>{config.design.n} : panel_sizes;

  std::vector<SummaryTable> panels;
  std::vector<std::pair<std::size_t, std::vector<ReplicationRecord>>> all_records;
  for (std::size_t n : sizes) {
    SimulationDesign design = config.design;
    design.n = n;
    const auto records =
        run_design(design, estimators, config.reps, config.estimator, config.seed, options);
    SummaryTable panel;
    panel.panel_label = std::string(selection_form_name(design.h_form)) +
                        (config.repeated ? " repeated" : "") + ", " +
                        error_law_name(design.error_law) + ", rho=" + format3(design.rho) +
                        ", censoring=" + format3(design.censor_target);
    panel.n = n;
    panel.rows = summarize(records, design.beta);
    panels.push_back(std::move(panel));
    all_records.emplace_back(n, records);
  }

  const std::string markdown = render_table(panels, TableFormat::Markdown);
  const std::string csv = render_table(panels, TableFormat::Csv);
  std::printf("%s", markdown.c_str());

  if (!config.out_dir.empty()) {
    const std::filesystem::path dir(config.out_dir);
    for (const auto& [n, records] : all_records) {
      const std::string suffix = all_records.size() > 1 ? "_n" + std::to_string(n) : "";
      write_text_file((dir / ("records" + suffix + ".csv")).string(), records_to_csv(records));
      write_text_file((dir / ("failures" + suffix + ".csv")).string(), failures_to_csv(records));
    }
    write_text_file((dir / "summary.md").string(), markdown);
    write_text_file((dir / "summary.csv").string(), csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally robust sample-selection estimation"};
  app.require_subcommand(1);

  CommonFlags flags;
  RunConfig base;

  std::string csv_path, estimator = "locally_robust", out_json, out_dir, cache_path;
  bool strict = false;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", flags.config_path, "config file with [design]/[estimator]/[run] sections");
    cmd->add_option("--seed", flags.seed, "random seed override")->each([&](const std::string&) {
      flags.seed_set = true;
    });
    cmd->add_option("--threads", flags.threads,
                    "worker cap (0 = all cores; falls back to SELCORR_THREADS)");
  };

  auto add_design_flags = [&](CLI::App* cmd) {
    cmd->add_option("--n", base.design.n, "sample size per replication");
    cmd->add_option("--rho", base.design.rho, "error correlation in (-1,1)");
    cmd->add_option("--censor", base.design.censor_target, "target censoring rate Pr(d=0)");
    cmd->add_option_function<std::string>(
        "--law",
        [&](const std::string& v) {
          const auto law = error_law_from_name(v);
          if (!law) throw CLI::ValidationError("--law", "unknown error law '" + v + "'");
          base.design.error_law = *law;
        },
        "selection error law: normal|logistic|t3|t2");
    cmd->add_option_function<std::string>(
        "--h-form",
        [&](const std::string& v) {
          const auto form = selection_form_from_name(v);
          if (!form) throw CLI::ValidationError("--h-form", "unknown h form '" + v + "'");
          base.design.h_form = *form;
        },
        "selection index form: benchmark|log|exp|logexp");
  };

  CLI::App* estimate = app.add_subcommand("estimate", "estimate coefficients from a CSV dataset");
  estimate->add_option("csv", csv_path, "input CSV (header: d,y,<covariates>)")->required();
  estimate->add_option("--estimator", estimator,
                       "locally_robust|robinson|robinson_orthogonal|robinson_crossfit");
  estimate->add_option("--out", out_json, "write the fit as JSON to this path");
  estimate->add_flag("--strict", strict, "reject d=0 rows with nonzero y instead of coercing");
  estimate->add_option("--folds", base.estimator.folds, "cross-fitting fold count");
  estimate->add_flag("!--no-tune", base.estimator.tune_per_fit,
                     "skip hyperparameter tuning (use the default forest settings)");
  add_common(estimate);

  std::string n_list;
  CLI::App* simulate = app.add_subcommand("simulate", "run a Monte Carlo experiment");
  simulate->add_option("--reps", base.reps, "replication count");
  simulate->add_option("--n-panels", n_list,
                       "comma list of sample sizes; renders one table panel per size");
  simulate->add_option("--out", out_dir, "output directory for records/summary files");
  simulate->add_flag("--repeated", base.repeated, "duplicate-rows experiment (copy of a half sample)");
  simulate->add_flag("!--no-tune", base.estimator.tune_per_fit,
                     "tune hyperparameters once per design instead of per replication");
  simulate->add_option("--folds", base.estimator.folds, "cross-fitting fold count");
  add_design_flags(simulate);
  add_common(simulate);

  CLI::App* calibrate = app.add_subcommand("calibrate", "calibrate the censoring constant c");
  calibrate->add_option("--cache", cache_path, "calibration cache file");
  add_design_flags(calibrate);
  add_common(calibrate);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = flags.config_path.empty() ? RunConfig{} : load_config(flags.config_path);
    // Explicit CLI flags override config-file values.
    if (estimate->parsed() || simulate->parsed() || calibrate->parsed()) {
      auto merge_design = [&](CLI::App* cmd) {
        if (cmd->count("--n")) config.design.n = base.design.n;
        if (cmd->count("--rho")) config.design.rho = base.design.rho;
        if (cmd->count("--censor")) config.design.censor_target = base.design.censor_target;
        if (cmd->count("--law")) config.design.error_law = base.design.error_law;
        if (cmd->count("--h-form")) config.design.h_form = base.design.h_form;
      };
      if (simulate->parsed()) {
        merge_design(simulate);
        if (simulate->count("--reps")) config.reps = base.reps;
        if (simulate->count("--repeated")) config.repeated = base.repeated;
        if (simulate->count("--no-tune")) config.estimator.tune_per_fit = false;
        if (simulate->count("--folds")) config.estimator.folds = base.estimator.folds;
      }
      if (calibrate->parsed()) merge_design(calibrate);
      if (estimate->parsed()) {
        if (estimate->count("--no-tune")) config.estimator.tune_per_fit = false;
        if (estimate->count("--folds")) config.estimator.folds = base.estimator.folds;
      }
    }

    if (estimate->parsed())
      return cmd_estimate(csv_path, config, flags, estimator, out_json, strict);
    if (simulate->parsed()) {
      std::vector<std::size_t> sizes;
      std::istringstream ss(n_list);
      std::string tok;
      while (std::getline(ss, tok, ','))
        if (!tok.empty()) sizes.push_back(std::stoull(tok));
      return cmd_simulate(config, flags, out_dir, sizes);
    }
    if (calibrate->parsed())
      return cmd_calibrate(config, flags,
                           cache_path.empty() ? default_cache_path("") : cache_path);
  } catch (const schema_error& e) {
    std::fprintf(stderr, "schema error: %s\n", e.what());
    return kExitSchema;
  } catch (const consistency_error& e) {
    std::fprintf(stderr, "consistency error: %s\n", e.what());
    return kExitSchema;
  } catch (const degenerate_design_error& e) {
    std::fprintf(stderr, "degenerate design: %s\n", e.what());
    return kExitDegenerate;
  } catch (const calibration_error& e) {
    std::fprintf(stderr, "calibration error: %s\n", e.what());
    return kExitCalibration;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
