#pragma once

#include <stdexcept>
#include <string>

namespace subat {

// Every failure the library reports derives from Error. The CLI maps the
// concrete type onto its exit-code contract.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

// Requested subspace dimension exceeds the numerical rank of the trajectory.
class RankError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row)
      : Error(what + " (row " + std::to_string(row) + ")"), row_(row) {}

  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace subat
