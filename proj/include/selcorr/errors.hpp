#pragma once

#include <stdexcept>
#include <string>

namespace selcorr {

// Malformed input data: bad CSV rows, non-binary d, ragged rows.
class schema_error : public std::runtime_error {
public:
  explicit schema_error(const std::string& msg) : std::runtime_error(msg) {}
};

// d = 0 with nonzero y under strict ingestion.
class consistency_error : public std::runtime_error {
public:
  explicit consistency_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A normal-equation matrix is numerically singular (condition number past threshold).
class degenerate_design_error : public std::runtime_error {
public:
  explicit degenerate_design_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Censoring-constant bisection failed to bracket or converge.
class calibration_error : public std::runtime_error {
public:
  explicit calibration_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A point pair violates the functional-form rank condition of the identification oracle.
class assumption_violation_error : public std::runtime_error {
public:
  explicit assumption_violation_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace selcorr
