#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lmc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value. `field()` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)), reason_(what) {}
  const std::string& field() const { return field_; }
  const std::string& reason() const { return reason_; }

 private:
  std::string field_;
  std::string reason_;
};

// Violated precondition on shapes or dimensions.
class ContractError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(std::uint64_t offset, const std::string& what)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

class SamplingError : public Error {
 public:
  SamplingError(std::size_t required, std::size_t actual)
      : Error("sequence too short for sampling: need at least " +
              std::to_string(required) + " frames, got " +
              std::to_string(actual)),
        required_(required) {}
  std::size_t required_length() const { return required_; }

 private:
  std::size_t required_;
};

class CheckpointError : public Error {
 public:
  CheckpointError(std::string component, const std::string& what)
      : Error("checkpoint " + component + ": " + what),
        component_(std::move(component)) {}
  const std::string& component() const { return component_; }

 private:
  std::string component_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace lmc
