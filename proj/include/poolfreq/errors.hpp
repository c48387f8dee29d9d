#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace poolfreq {

// Input violates a documented precondition (bad dimensions, malformed file, ...).
struct InvalidInputError : std::runtime_error {
  explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Observed counts are mutually contradictory (e.g. duplicated rows that disagree).
struct DataInconsistencyError : std::runtime_error {
  explicit DataInconsistencyError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numerical routine failed beyond recovery (Cholesky breakdown after stabilization, ...).
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Enumeration of a feasible set exceeded its solution or time budget.
struct EnumerationOverflowError : std::runtime_error {
  EnumerationOverflowError(const std::string& msg, std::uint64_t found)
      : std::runtime_error(msg), solutions_found(found) {}
  std::uint64_t solutions_found = 0;
};

}  // namespace poolfreq
