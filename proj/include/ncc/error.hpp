#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ncc {

// Invalid trial, trend, model or run configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dataset contents do not satisfy an operation's precondition.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A fit that cannot produce inference (zero standard error, no random columns, ...).
class DegenerateFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RankDeficientError : public std::runtime_error {
 public:
  RankDeficientError(const std::string& what, std::vector<std::string> columns)
      : std::runtime_error(what), columns_(std::move(columns)) {}

  // Columns found to be linear combinations of the retained ones.
  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::string> columns_;
};

}  // namespace ncc
