#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace permsync {

/// Bad caller input: dimension mismatch, out-of-range parameter, NaN entry.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed file or CSV content.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The eigensolver ran out of budget. Carries the best residuals reached so
/// the caller can decide whether to retry with a larger budget.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> residuals)
      : std::runtime_error(what), residuals_(std::move(residuals)) {}

  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace detail
}  // namespace permsync
