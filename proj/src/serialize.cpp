#include "selcorr/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "selcorr/errors.hpp"

namespace selcorr {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& token, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw schema_error(context + ": cannot parse number '" + token + "'");
  }
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

Dataset dataset_from_csv_text(const std::string& text, const IngestOptions& options,
                              IngestReport* report) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw schema_error("csv: empty file");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 3 || trim(header[0]) != "d" || trim(header[1]) != "y")
    throw schema_error("csv: header must be 'd,y,<covariates...>'");
  std::vector<std::string> names(header.begin() + 2, header.end());
  for (auto& n : names) n = trim(n);

  std::vector<RawRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw schema_error("csv row " + std::to_string(line_no) + ": expected " +
                         std::to_string(header.size()) + " fields, got " +
                         std::to_string(fields.size()));
    RawRow row;
    row.d = parse_double(trim(fields[0]), "csv row " + std::to_string(line_no) + " column d");
    const std::string y_token = trim(fields[1]);
    if (!y_token.empty())
      row.y = parse_double(y_token, "csv row " + std::to_string(line_no) + " column y");
    row.x.reserve(names.size());
    for (std::size_t j = 2; j < fields.size(); ++j)
      row.x.push_back(parse_double(trim(fields[j]), "csv row " + std::to_string(line_no) +
                                                         " column " + names[j - 2]));
    rows.push_back(std::move(row));
  }
  return validate_dataset(rows, names, options, report);
}

Dataset read_dataset_csv(const std::string& path, const IngestOptions& options,
                         IngestReport* report) {
  return dataset_from_csv_text(read_text_file(path), options, report);
}

std::string dataset_to_csv(const Dataset& data) {
  std::ostringstream os;
  os << "d,y";
  for (const auto& name : data.column_names()) os << ',' << name;
  os << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    os << data.d_at(i) << ',' << format_full(data.y_at(i));
    for (int j = 0; j < data.dim_x(); ++j)
      os << ',' << format_full(data.x_row(i)[j]);
    os << '\n';
  }
  return os.str();
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  write_text_file(path, dataset_to_csv(data));
}

std::string fit_result_to_json(const FitResult& result) {
  nlohmann::ordered_json j;
  j["beta"] = std::vector<double>(result.beta.data(), result.beta.data() + result.beta.size());
  std::vector<std::vector<double>> cov;
  for (Eigen::Index r = 0; r < result.covariance.rows(); ++r) {
    std::vector<double> row(result.covariance.cols());
    for (Eigen::Index c = 0; c < result.covariance.cols(); ++c) row[c] = result.covariance(r, c);
    cov.push_back(std::move(row));
  }
  j["covariance"] = cov;
  j["standard_errors"] = std::vector<double>(
      result.standard_errors.data(), result.standard_errors.data() + result.standard_errors.size());
  j["estimator_tag"] = estimator_name(result.estimator_tag);
  j["diagnostics"] = result.diagnostics;
  return j.dump(2) + "\n";
}

namespace {

struct ConfigKv {
  std::string section;
  std::string key;
  std::string value;
  std::size_t line;
};

bool parse_bool(const std::string& v, const std::string& context) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument(context + ": expected boolean, got '" + v + "'");
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig config;
  std::istringstream in(text);
  std::string line, section;
  std::size_t line_no = 0;
  std::vector<ConfigKv> entries;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      if (section != "design" && section != "estimator" && section != "run")
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    entries.push_back({section, trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no});
  }

  // Grid keys assemble a cross product after all entries are read.
  std::optional<int> grid_trees;
  std::vector<int> grid_leaves, grid_features;

  for (const auto& kv : entries) {
    const std::string context = "config line " + std::to_string(kv.line) + " (" + kv.key + ")";
    if (kv.section == "design") {
      if (kv.key == "n") config.design.n = static_cast<std::size_t>(std::stoull(kv.value));
      else if (kv.key == "rho") config.design.rho = std::stod(kv.value);
      else if (kv.key == "censor_target") config.design.censor_target = std::stod(kv.value);
      else if (kv.key == "error_law") {
        const auto law = error_law_from_name(kv.value);
        if (!law) throw std::invalid_argument(context + ": unknown error law '" + kv.value + "'");
        config.design.error_law = *law;
      } else if (kv.key == "h_form") {
        const auto form = selection_form_from_name(kv.value);
        if (!form) throw std::invalid_argument(context + ": unknown h form '" + kv.value + "'");
        config.design.h_form = *form;
      } else if (kv.key == "c") config.design.c = std::stod(kv.value);
      else if (kv.key == "seed") config.design.seed = std::stoull(kv.value);
      else throw std::invalid_argument(context + ": unknown [design] key");
    } else if (kv.section == "estimator") {
      if (kv.key == "folds") config.estimator.folds = std::stoull(kv.value);
      else if (kv.key == "tune_per_fit")
        config.estimator.tune_per_fit = parse_bool(kv.value, context);
      else if (kv.key == "clip_lo") config.estimator.clip_lo = std::stod(kv.value);
      else if (kv.key == "clip_hi") config.estimator.clip_hi = std::stod(kv.value);
      else if (kv.key == "n_trees" || kv.key == "min_leaf_grid" || kv.key == "max_features_grid") {
        std::vector<int> values;
        std::istringstream vs(kv.value);
        std::string tok;
        while (std::getline(vs, tok, ','))
          values.push_back(static_cast<int>(std::stol(trim(tok))));
        if (values.empty()) throw std::invalid_argument(context + ": empty list");
        if (kv.key == "n_trees") grid_trees = values.front();
        else if (kv.key == "min_leaf_grid") grid_leaves = values;
        else grid_features = values;
      } else if (kv.key == "seed") config.estimator.seed = std::stoull(kv.value);
      else throw std::invalid_argument(context + ": unknown [estimator] key");
    } else if (kv.section == "run") {
      if (kv.key == "reps") config.reps = std::stoull(kv.value);
      else if (kv.key == "seed") config.seed = std::stoull(kv.value);
      else if (kv.key == "threads") config.threads = static_cast<int>(std::stol(kv.value));
      else if (kv.key == "repeated") config.repeated = parse_bool(kv.value, context);
      else if (kv.key == "out") config.out_dir = kv.value;
      else if (kv.key == "format") {
        if (kv.value != "markdown" && kv.value != "csv")
          throw std::invalid_argument(context + ": format must be markdown or csv");
        config.format = kv.value;
      } else throw std::invalid_argument(context + ": unknown [run] key");
    } else {
      throw std::invalid_argument(context + ": key outside any section");
    }
  }

  if (grid_trees || !grid_leaves.empty() || !grid_features.empty()) {
    if (grid_leaves.empty()) grid_leaves = {1, 5, 10, 25};
    if (grid_features.empty())
      grid_features = {(config.design.dim_x() + 2) / 3, config.design.dim_x()};
    std::vector<ForestHyperparams> grid;
    for (int leaf : grid_leaves)
      for (int mf : grid_features) {
        ForestHyperparams hp;
        hp.n_trees = grid_trees.value_or(200);
        hp.min_leaf = leaf;
        hp.max_features = mf;
        grid.push_back(hp);
      }
    config.estimator.forest_grid = grid;
  }
  return config;
}

RunConfig load_config(const std::string& path) { return parse_config_text(read_text_file(path)); }

CalibrationCache::CalibrationCache(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in) return;
  try {
    nlohmann::json j;
    in >> j;
    for (auto it = j.begin(); it != j.end(); ++it)
      entries_[std::stoull(it.key())] = it.value().get<double>();
  } catch (const std::exception&) {
    entries_.clear();  // unreadable cache is treated as empty
  }
}

std::optional<double> CalibrationCache::lookup(std::uint64_t key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void CalibrationCache::store(std::uint64_t key, double c) {
  entries_[key] = c;
  nlohmann::json j;
  for (const auto& [k, v] : entries_) j[std::to_string(k)] = v;
  write_text_file(path_, j.dump(2) + "\n");
}

}  // namespace selcorr
