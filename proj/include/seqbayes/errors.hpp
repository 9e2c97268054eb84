#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace seqbayes {

/// Sequences of mismatched truncation length were combined.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An input that makes the requested construction meaningless (all-zero
/// representer, zero spread).
class DegenerateInputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A finite truncation is too short for the requested quantity.
class TruncationError : public std::runtime_error {
 public:
  TruncationError(const std::string& what, std::size_t required)
      : std::runtime_error(what), required_(required) {}

  /// Smallest truncation level that would have been accepted (0 if unknown).
  std::size_t required_trunc() const noexcept { return required_; }

 private:
  std::size_t required_;
};

/// Parameters fall outside the regime where a formula is defined.
class RegimeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid experiment or demo configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace seqbayes
