#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace fvv {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Color = Eigen::Vector3f;

// Error classes. Every failure that crosses a module boundary is one of these.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class BehindCameraError : public Error {
 public:
  using Error::Error;
};

class InvalidDepthError : public Error {
 public:
  using Error::Error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

class EmptyHullError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NoCrossingError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// Wraps a module error with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string &what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string &stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

inline constexpr double kPi = 3.14159265358979323846;

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double degrees(double radians) { return radians * 180.0 / kPi; }
inline double radians(double degrees) { return degrees * kPi / 180.0; }

/// Worker count: FVV_WORKERS if set and positive, else hardware concurrency.
unsigned default_worker_count();

/// Runs body(begin, end) over disjoint contiguous chunks of [0, count).
/// Output written by body must be indexed by position so that results do not
/// depend on the number of workers.
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)> &body,
                  unsigned workers = 0);

}  // namespace fvv
