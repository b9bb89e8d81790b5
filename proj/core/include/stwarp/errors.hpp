#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stwarp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data. `line` is the 1-based line of the
// offending row in the source file (0 when not file-backed).
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string key = {})
      : Error(what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Covariate matrix without full column rank.
class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

// Factorization failures and non-finite values. `index` is the ordered
// observation the failure was detected at, when applicable.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, std::size_t index = kNoIndex)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }
  static constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

 private:
  std::size_t index_;
};

}  // namespace stwarp
