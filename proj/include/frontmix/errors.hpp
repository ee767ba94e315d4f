#pragma once

#include <stdexcept>
#include <string>

namespace frontmix {

// Base class for all library errors so callers can catch one type.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Configuration / validation errors (CLI exit code 2).
struct ConfigError : Error {
  using Error::Error;
};

struct OverlapError : ConfigError {
  using ConfigError::ConfigError;
};

struct SeparationError : ConfigError {
  using ConfigError::ConfigError;
};

struct NegativeDensityError : ConfigError {
  using ConfigError::ConfigError;
};

struct DivergentFluxError : ConfigError {
  using ConfigError::ConfigError;
};

struct DomainError : Error {
  using Error::Error;
};

// Laplace-domain criteria signals.
struct LocusOutOfGap : Error {
  double y;
  LocusOutOfGap(const std::string& what, double y_) : Error(what), y(y_) {}
};

struct ArctanhDomainError : Error {
  using Error::Error;
};

struct ZeroDenominator : Error {
  using Error::Error;
};

// Inversion errors.
struct AbscissaError : Error {
  using Error::Error;
};

struct NonEvenTerms : Error {
  using Error::Error;
};

struct CriteriaFailedAtAbscissa : Error {
  double s;
  CriteriaFailedAtAbscissa(const std::string& what, double s_) : Error(what), s(s_) {}
};

// Simulator / audit errors.
struct UndefinedFront : Error {
  using Error::Error;
};

// Network errors.
struct SingularSystem : Error {
  using Error::Error;
};

// The interval generating expression has no real value at this s: the
// transformed field has no zero inside the requested interval.
struct NegativeRadicand : Error {
  double radicand;
  NegativeRadicand(const std::string& what, double r) : Error(what), radicand(r) {}
};

}  // namespace frontmix
