#ifndef PKATLAS_ERROR_HPP
#define PKATLAS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace pkatlas {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateTriangle : public Error {
 public:
  using Error::Error;
};

class CollapsedLeg : public Error {
 public:
  using Error::Error;
};

/// A direct-kinematics root sits on a branch tangency and could not be
/// polished below the residual tolerance.
class SolverDegeneracy : public Error {
 public:
  using Error::Error;
};

class DepthOutOfRange : public Error {
 public:
  using Error::Error;
};

class UnknownId : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class OutOfBox : public Error {
 public:
  using Error::Error;
};

/// A basic region's joint-space image straddles several joint regions.
class InconsistentImage : public Error {
 public:
  using Error::Error;
};

/// Query pose lies on a barrier leaf (limit boundary or singular layer).
class BoundaryAmbiguity : public Error {
 public:
  using Error::Error;
};

class TrackingAmbiguity : public Error {
 public:
  TrackingAmbiguity(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class TrackingLost : public Error {
 public:
  TrackingLost(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

}  // namespace pkatlas

#endif  // PKATLAS_ERROR_HPP
