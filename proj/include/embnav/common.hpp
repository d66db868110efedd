#pragma once

#include <numbers>
#include <stdexcept>
#include <string>

namespace embnav {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (e.g. stepping a finished episode).
class ContractViolation : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// Malformed or truncated file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

inline constexpr double kPi = std::numbers::pi;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

inline constexpr double deg_to_rad(double degrees) { return degrees * kPi / 180.0; }

}  // namespace embnav
