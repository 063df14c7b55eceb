#include <doctest.h>

#include <cmath>
#include <sstream>

#include "selcorr/montecarlo.hpp"
#include "selcorr/parallel.hpp"

using namespace selcorr;

namespace {

SimulationDesign small_design(std::size_t n = 150) {
  SimulationDesign design;
  design.n = n;
  design.c = 0.0938;
  return design;
}

EstimatorConfig fast_config() {
  EstimatorConfig config;
  config.tune_per_fit = false;
  config.fixed_hp = ForestHyperparams{40, 10, 4, 1.0};
  return config;
}

const std::vector<EstimatorTag> kAll = {EstimatorTag::LocallyRobust, EstimatorTag::Robinson,
                                        EstimatorTag::RobinsonOrthogonal,
                                        EstimatorTag::RobinsonCrossfit};

ReplicationRecord make_record(std::size_t rep, EstimatorTag tag, std::vector<double> beta,
                              std::vector<double> se) {
  ReplicationRecord r;
  r.rep_id = rep;
  r.estimator_tag = tag;
  r.ok = true;
  r.beta_hat = Eigen::Map<Vec>(beta.data(), static_cast<Eigen::Index>(beta.size()));
  r.se = Eigen::Map<Vec>(se.data(), static_cast<Eigen::Index>(se.size()));
  return r;
}

}  // namespace

TEST_CASE("run_design produces one record per estimator per replication") {
  RunOptions options;
  options.tune_per_replication = false;
  const auto records = run_design(small_design(), kAll, 1, fast_config(), 7, options);
  CHECK(records.size() == 4);
  for (const auto& r : records) {
    CHECK(r.rep_id == 0);
    CHECK(r.ok);
    CHECK(r.beta_hat.size() == 10);
    CHECK(r.se.size() == 10);
    CHECK(r.covariance_psd);
  }
}

TEST_CASE("run_design is deterministic across worker counts") {
  RunOptions options;
  options.tune_per_replication = false;
  set_thread_cap(1);
  const auto serial = run_design(small_design(), kAll, 4, fast_config(), 99, options);
  set_thread_cap(2);
  const auto two = run_design(small_design(), kAll, 4, fast_config(), 99, options);
  set_thread_cap(0);
  const auto all = run_design(small_design(), kAll, 4, fast_config(), 99, options);

  REQUIRE(serial.size() == two.size());
  REQUIRE(serial.size() == all.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].ok == two[i].ok);
    CHECK(serial[i].beta_hat == two[i].beta_hat);
    CHECK(serial[i].beta_hat == all[i].beta_hat);
    CHECK(serial[i].se == all[i].se);
  }
}

TEST_CASE("summarize hand cases") {
  const Vec truth = Vec::Ones(1);

  SUBCASE("exact estimates give zero bias and full coverage") {
    std::vector<ReplicationRecord> records;
    for (std::size_t b = 0; b < 5; ++b)
      records.push_back(make_record(b, EstimatorTag::LocallyRobust, {1.0}, {0.2}));
    const auto summary = summarize(records, truth);
    REQUIRE(summary.size() == 1);
    CHECK(summary[0].average_bias == 0.0);
    CHECK(summary[0].average_sd == 0.0);
    CHECK(summary[0].average_coverage == 1.0);
  }

  SUBCASE("two symmetric replications") {
    // beta_hat in {0, 2} around truth 1: bias 1, sd 1; coverage flips on the SE.
    for (double se : {10.0, 0.1}) {
      std::vector<ReplicationRecord> records;
      records.push_back(make_record(0, EstimatorTag::Robinson, {0.0}, {se}));
      records.push_back(make_record(1, EstimatorTag::Robinson, {2.0}, {se}));
      const auto summary = summarize(records, truth);
      REQUIRE(summary.size() == 1);
      CHECK(summary[0].average_bias == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(summary[0].average_sd == doctest::Approx(1.0).epsilon(1e-14));
      CHECK(summary[0].average_coverage == (se > 1.0 ? 1.0 : 0.0));
    }
  }

  SUBCASE("failures are counted, not averaged") {
    std::vector<ReplicationRecord> records;
    records.push_back(make_record(0, EstimatorTag::Robinson, {1.0}, {0.1}));
    ReplicationRecord failed;
    failed.rep_id = 1;
    failed.estimator_tag = EstimatorTag::Robinson;
    failed.ok = false;
    failed.failure_reason = "singular";
    records.push_back(failed);
    const auto summary = summarize(records, truth);
    REQUIRE(summary.size() == 1);
    CHECK(summary[0].successes == 1);
    CHECK(summary[0].failures == 1);
  }
}

TEST_CASE("metric formulas match an independent recomputation from exported records") {
  RunOptions options;
  options.tune_per_replication = false;
  const auto records = run_design(small_design(), kAll, 5, fast_config(), 31, options);
  const auto summaries = summarize(records, Vec::Ones(10));

  // Parse records.csv back and recompute each metric from scratch.
  std::istringstream csv(records_to_csv(records));
  std::string line;
  std::getline(csv, line);  // header
  std::map<std::string, std::map<int, std::vector<std::pair<double, double>>>> parsed;
  while (std::getline(csv, line)) {
    std::istringstream ls(line);
    std::string rep, est, k, beta, se;
    std::getline(ls, rep, ',');
    std::getline(ls, est, ',');
    std::getline(ls, k, ',');
    std::getline(ls, beta, ',');
    std::getline(ls, se, ',');
    parsed[est][std::stoi(k)].push_back({std::stod(beta), std::stod(se)});
  }

  for (const auto& s : summaries) {
    const auto& per_k = parsed.at(estimator_name(s.tag));
    double bias = 0, sd = 0, cov = 0;
    for (int k = 1; k <= 10; ++k) {
      const auto& vals = per_k.at(k);
      double abs_dev = 0, m1 = 0, m2 = 0, c = 0;
      for (const auto& [b, e] : vals) {
        abs_dev += std::fabs(b - 1.0);
        m1 += b;
        m2 += b * b;
        c += std::fabs(b - 1.0) <= 1.96 * e ? 1.0 : 0.0;
      }
      const double r = static_cast<double>(vals.size());
      bias += abs_dev / r / 10.0;
      sd += std::sqrt(m2 / r - (m1 / r) * (m1 / r)) / 10.0;
      cov += c / r / 10.0;
    }
    CHECK(std::fabs(s.average_bias - bias) < 1e-12);
    CHECK(std::fabs(s.average_sd - sd) < 1e-9);
    CHECK(std::fabs(s.average_coverage - cov) < 1e-12);
  }
}

TEST_CASE("render_table layouts") {
  EstimatorSummary lr;
  lr.tag = EstimatorTag::LocallyRobust;
  lr.successes = 100;
  lr.average_bias = 0.099;
  lr.average_sd = 0.095;
  lr.average_coverage = 0.948;
  lr.max_coverage = 1.0;
  lr.min_coverage = 0.88;
  SummaryTable panel;
  panel.panel_label = "benchmark";
  panel.n = 1000;
  panel.rows = {lr};

  const std::string md = render_table({panel}, TableFormat::Markdown);
  CHECK(md.find("benchmark (n = 1000)") != std::string::npos);
  CHECK(md.find("0.099") != std::string::npos);
  CHECK(md.find("Average Coverage") != std::string::npos);
  CHECK(md.find("Locally Robust") != std::string::npos);

  const std::string csv = render_table({panel}, TableFormat::Csv);
  std::istringstream in(csv);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header ==
        "panel,n,estimator,average_bias,average_sd,average_coverage,max_coverage,min_coverage,"
        "successes,failures");
  CHECK(row.find("benchmark,1000,locally_robust,0.099,0.095,0.948,1.000,0.880,100,0") == 0);

  CHECK_THROWS_AS(render_table({}, TableFormat::Csv), std::invalid_argument);
}

TEST_CASE("records csv round trips at full precision") {
  std::vector<ReplicationRecord> records;
  records.push_back(make_record(3, EstimatorTag::Robinson, {0.12345678901234567, -2.0},
                                {1e-7, 0.25}));
  const std::string csv = records_to_csv(records);
  std::istringstream in(csv);
  std::string header, row1;
  std::getline(in, header);
  CHECK(header == "rep_id,estimator,k,beta_hat_k,se_k");
  std::getline(in, row1);
  std::istringstream ls(row1);
  std::string rep, est, k, beta, se;
  std::getline(ls, rep, ',');
  std::getline(ls, est, ',');
  std::getline(ls, k, ',');
  std::getline(ls, beta, ',');
  std::getline(ls, se, ',');
  CHECK(std::stod(beta) == 0.12345678901234567);
  CHECK(std::stod(se) == 1e-7);
}
