#pragma once

#include <stdexcept>
#include <string>

namespace sigfolio {

/**
 * Raised for malformed or inconsistent inputs: missing files, bad CSV rows,
 * shape mismatches, unknown configuration keys, windows longer than the
 * available history.  The command-line tool maps this to exit code 2.
 *
 * Messages start with a stable identifier (e.g. "MissingFile", "MalformedRow",
 * "ShapeMismatch") followed by context, so callers can match on the prefix.
 */
class data_error : public std::runtime_error {
 public:
  explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

/**
 * Raised when a numerical routine cannot produce a trustworthy result:
 * non-positive-definite covariance, infeasible constraint sets, degenerate
 * (zero-variance) series.  The command-line tool maps this to exit code 3.
 */
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sigfolio
