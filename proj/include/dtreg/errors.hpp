#ifndef DTREG_ERRORS_HPP
#define DTREG_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dtreg {

/// Error categories map one-to-one onto CLI process exit codes.
enum class ErrorCategory : int {
  config = 2,
  data = 3,
  numeric = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

/// Bad configuration: unknown link, malformed spec, missing seed, ...
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error(ErrorCategory::config, message) {}
};

/// Bad data: non-finite values, empty arms, unparsable CSV cells, ...
class DataError : public Error {
 public:
  explicit DataError(const std::string& message)
      : Error(ErrorCategory::data, message) {}
};

/// Numerical failure that the solver guards could not absorb.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message)
      : Error(ErrorCategory::numeric, message) {}
};

}  // namespace dtreg

#endif  // DTREG_ERRORS_HPP
