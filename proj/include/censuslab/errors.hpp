#pragma once

#include <stdexcept>
#include <string>

namespace censuslab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Unknown attribute names, mismatched attribute subsets, bad projections.
struct SchemaError : Error {
  using Error::Error;
};

// Out-of-domain values, malformed rows, broken multiset algebra.
struct DataError : Error {
  using Error::Error;
};

// Invalid or incomplete run configuration.
struct ConfigError : Error {
  using Error::Error;
};

// Published tables that violate their defining identities (negative
// differences, infeasible marginals).
struct TablesError : Error {
  using Error::Error;
};

struct SamplingError : Error {
  using Error::Error;
};

// Metric preconditions (degenerate variance and the like).
struct MetricError : Error {
  using Error::Error;
};

// Pipeline stage invoked without the artifacts of its predecessor.
struct StageError : Error {
  using Error::Error;
};

}  // namespace censuslab
