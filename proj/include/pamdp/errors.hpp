#pragma once

#include <stdexcept>
#include <string>

namespace pamdp {

// Bad configuration or malformed input. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Episode budget too small for the requested schedule. CLI exit code 3.
class BudgetError : public std::runtime_error {
 public:
  BudgetError(const std::string& what, long long minimum_episodes)
      : std::runtime_error(what), minimum_episodes_(minimum_episodes) {}
  long long minimum_episodes() const { return minimum_episodes_; }

 private:
  long long minimum_episodes_;
};

// Filesystem failure, reported with the offending path. CLI exit code 4.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Regression fit could not be performed (fewer than 2 usable points).
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pamdp
