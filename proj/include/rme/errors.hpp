#pragma once

#include <stdexcept>
#include <string>

namespace rme {

// Every failure raised by the library derives from Error so callers can
// catch one type at the process boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class RankDeficiencyError : public Error {
 public:
  using Error::Error;
};

class DegenerateKernelError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class PluginProtocolError : public Error {
 public:
  using Error::Error;
};

class UnsupportedDenoiserError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error("config key '" + key + "': " + what), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

}  // namespace rme
