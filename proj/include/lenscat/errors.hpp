#pragma once

#include <stdexcept>
#include <string>

namespace lenscat {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed spec files or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class NonPositiveDefinite : public Error {
 public:
  using Error::Error;
};

class SupportViolation : public Error {
 public:
  using Error::Error;
};

class DegeneratePlane : public Error {
 public:
  using Error::Error;
};

class ZeroMomentum : public Error {
 public:
  using Error::Error;
};

class StepFailure : public Error {
 public:
  using Error::Error;
};

// Boundary data that violate BoundaryRay or CuspBoundaryPoint invariants.
class InvalidRay : public Error {
 public:
  using Error::Error;
};

class MissesBall : public Error {
 public:
  using Error::Error;
};

// A ray that failed to satisfy its exit stop within the arc-length cap.
class TrappedRay : public Error {
 public:
  TrappedRay(const std::string& what, double length) : Error(what), length_(length) {}
  double length() const { return length_; }

 private:
  double length_;
};

}  // namespace lenscat
