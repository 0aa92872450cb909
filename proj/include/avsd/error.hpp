#pragma once

#include <stdexcept>
#include <string>

namespace avsd {

// Base of every error thrown by the library. The CLI maps the category to an
// exit code.
class Error : public std::runtime_error {
 public:
  enum class Kind { kInput, kDimension, kConfig, kFormat, kIo, kDivergence, kRange };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }
  const char* kind_name() const {
    switch (kind_) {
      case Kind::kInput: return "input";
      case Kind::kDimension: return "dimension";
      case Kind::kConfig: return "config";
      case Kind::kFormat: return "format";
      case Kind::kIo: return "io";
      case Kind::kDivergence: return "divergence";
      case Kind::kRange: return "range";
    }
    return "unknown";
  }

 private:
  Kind kind_;
};

struct InputError : Error {
  explicit InputError(const std::string& w) : Error(Kind::kInput, w) {}
};
struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(Kind::kDimension, w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(Kind::kConfig, w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(Kind::kFormat, w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(Kind::kIo, w) {}
};
struct DivergenceError : Error {
  DivergenceError(const std::string& w, long step) : Error(Kind::kDivergence, w), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};
struct RangeError : Error {
  explicit RangeError(const std::string& w) : Error(Kind::kRange, w) {}
};

}  // namespace avsd
