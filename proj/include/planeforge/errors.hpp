#pragma once

#include <stdexcept>
#include <string>

namespace planeforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or raster-size disagreement between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Pixel or voxel coordinate outside the valid domain.
class BoundsError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented type invariant (non-unit normal, bad intrinsics, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

class NoIntersection : public Error {
 public:
  NoIntersection() : Error("ray is parallel to the plane") {}
};

class BehindRay : public Error {
 public:
  BehindRay() : Error("plane intersection lies behind the ray origin") {}
};

class DegenerateAxis : public Error {
 public:
  using Error::Error;
};

class DegenerateFit : public Error {
 public:
  using Error::Error;
};

/// Operation called in the wrong state (e.g. backward without a recorded forward).
class StateError : public Error {
 public:
  using Error::Error;
};

class InitError : public Error {
 public:
  using Error::Error;
};

/// Non-finite cost matrix entries or other malformed numeric input.
class InputError : public Error {
 public:
  using Error::Error;
};

class TooFewVoxels : public Error {
 public:
  using Error::Error;
};

class DegenerateNormal : public Error {
 public:
  using Error::Error;
};

/// Fragment indices must be strictly increasing.
class OrderingError : public Error {
 public:
  using Error::Error;
};

class EmptySurface : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing or unreadable input file; carries the offending path in the message.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Gradient refinement produced a non-finite loss.
class RefineDiverged : public Error {
 public:
  using Error::Error;
};

}  // namespace planeforge
