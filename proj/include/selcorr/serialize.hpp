#pragma once

#include <map>
#include <optional>
#include <string>

#include "selcorr/dataset.hpp"
#include "selcorr/dgp.hpp"
#include "selcorr/estimators.hpp"

namespace selcorr {

// CSV schema: header row required, columns `d`, `y`, then covariates in file
// order. Empty y cells are permitted only where d = 0 (lenient ingestion
// coerces them to 0 and counts).
Dataset read_dataset_csv(const std::string& path, const IngestOptions& options = {},
                         IngestReport* report = nullptr);

void write_dataset_csv(const std::string& path, const Dataset& data);

// Round trip through the textual schema, used by the ingestion-idempotence check.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv_text(const std::string& text, const IngestOptions& options = {},
                              IngestReport* report = nullptr);

std::string fit_result_to_json(const FitResult& result);

// Flat key/value config with [design], [estimator], [run] sections. Unknown
// keys are rejected. Every key has a CLI flag override.
struct RunConfig {
  SimulationDesign design;
  EstimatorConfig estimator;
  std::size_t reps = 100;
  std::uint64_t seed = 42;
  int threads = 0;
  bool repeated = false;
  std::string out_dir;
  std::string format = "markdown";
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Sidecar cache of calibrated censoring constants keyed by design hash.
class CalibrationCache {
 public:
  explicit CalibrationCache(std::string path);
  std::optional<double> lookup(std::uint64_t key) const;
  void store(std::uint64_t key, double c);

 private:
  std::string path_;
  std::map<std::uint64_t, double> entries_;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace selcorr
