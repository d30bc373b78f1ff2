#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace magicpig {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite or shape-inconsistent input data.
class InputError : public Error {
 public:
  using Error::Error;
};

/// An argument outside its documented range (k > n, index out of range, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A probability vector that is negative or not normalized.
class DistributionError : public Error {
 public:
  using Error::Error;
};

/// The computation has no meaningful result (zero-norm reference, empty set).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary file. Carries the byte offset at which decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Invalid experiment configuration. Carries the offending field name.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : Error("config field '" + field + "': " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace magicpig
