#pragma once

#include <stdexcept>
#include <string>

namespace inpipe {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed document (wrong type, missing or unknown key).
class SchemaError : public Error {
 public:
  SchemaError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Well-formed document whose values break a domain invariant.
class InvariantError : public Error {
 public:
  InvariantError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

class OutOfRoute : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class NonFinite : public Error {
 public:
  using Error::Error;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class NotStabilizable : public Error {
 public:
  using Error::Error;
};

class DegenerateWeights : public Error {
 public:
  using Error::Error;
};

class NotNormalized : public Error {
 public:
  using Error::Error;
};

class DegeneratePosterior : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Raised by the simulation driver when the state stops being finite.
class SimulationDiverged : public Error {
 public:
  SimulationDiverged(long tick, const std::string& what)
      : Error("tick " + std::to_string(tick) + ": " + what), tick_(tick) {}
  long tick() const { return tick_; }

 private:
  long tick_;
};

}  // namespace inpipe
