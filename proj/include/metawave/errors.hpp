#pragma once

#include <stdexcept>
#include <string>

namespace metawave {

/// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string & what) : std::runtime_error(what) {}
};

class DimensionMismatch : public Error {
  public:
    explicit DimensionMismatch(const std::string & what) : Error("dimension mismatch: " + what) {}
};

class NotPositiveDefinite : public Error {
  public:
    explicit NotPositiveDefinite(const std::string & what) : Error("not positive definite: " + what) {}
};

class NonPositiveVariance : public Error {
  public:
    explicit NonPositiveVariance(const std::string & what) : Error("non-positive variance: " + what) {}
};

class NonPositiveRange : public Error {
  public:
    explicit NonPositiveRange(const std::string & what) : Error("non-positive range: " + what) {}
};

class ShapeMismatch : public Error {
  public:
    explicit ShapeMismatch(const std::string & what) : Error("shape mismatch: " + what) {}
};

class ConfigError : public Error {
  public:
    explicit ConfigError(const std::string & what) : Error("config error: " + what) {}
};

}
