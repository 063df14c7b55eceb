// Benchmark comparing the serial reference path against the OpenMP kernels on
// the three hot spots: forest fitting, forest prediction, and a full
// cross-fitted estimate. Also checks that both paths agree exactly.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#include "selcorr/dgp.hpp"
#include "selcorr/estimators.hpp"
#include "selcorr/parallel.hpp"

using namespace selcorr;

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <class F>
double timed(F&& f) {
  const double start = now_seconds();
  f();
  return now_seconds() - start;
}

void report(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-28s serial %8.3fs   parallel %8.3fs   speedup %5.2fx   identical %s\n", name,
              serial, parallel, parallel > 0 ? serial / parallel : 0.0,
              identical ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t n = 4000;
  if (argc > 1) n = static_cast<std::size_t>(std::stoull(argv[1]));

  SimulationDesign design;
  design.n = n;
  design.c = 0.0;
  const Dataset data = generate_sample(design, Rng(7).split(0));
  std::printf("benchmark sample: n = %zu, K = %d, threads available = %d\n\n", data.size(),
              data.dim_x(), effective_threads());

  ForestHyperparams hp;
  hp.n_trees = 200;
  hp.min_leaf = 10;
  hp.max_features = 4;

  // Forest fit.
  PropensityModel serial_model, parallel_model;
  set_thread_cap(1);
  const double fit_serial = timed([&] { serial_model = fit_random_forest(data.x(), data.d(), hp, Rng(3)); });
  set_thread_cap(0);
  const double fit_parallel = timed([&] { parallel_model = fit_random_forest(data.x(), data.d(), hp, Rng(3)); });

  // Forest prediction over all rows.
  std::vector<double> pred_serial, pred_parallel;
  set_thread_cap(1);
  const double pred_serial_t = timed([&] { pred_serial = predict_propensity_rows(serial_model, data.x()); });
  set_thread_cap(0);
  const double pred_parallel_t = timed([&] { pred_parallel = predict_propensity_rows(parallel_model, data.x()); });
  report("forest fit + predict", fit_serial + pred_serial_t, fit_parallel + pred_parallel_t,
         pred_serial == pred_parallel);

  // Full cross-fitted estimate (tuning off to keep the benchmark focused).
  EstimatorConfig config;
  config.tune_per_fit = false;
  config.fixed_hp = hp;
  config.seed = 11;
  FitResult lr_serial, lr_parallel;
  set_thread_cap(1);
  const double est_serial = timed([&] { lr_serial = estimate_locally_robust(data, config); });
  set_thread_cap(0);
  const double est_parallel = timed([&] { lr_parallel = estimate_locally_robust(data, config); });
  bool identical = lr_serial.beta.size() == lr_parallel.beta.size();
  for (Eigen::Index k = 0; identical && k < lr_serial.beta.size(); ++k)
    identical = lr_serial.beta[k] == lr_parallel.beta[k];
  report("locally robust estimate", est_serial, est_parallel, identical);

  return 0;
}
