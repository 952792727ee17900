#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace gmmn {

/// Operand shapes do not conform.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// An argument or configuration value is out of its allowed range.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A loss, gradient or parameter went non-finite.
class NumericalError : public std::runtime_error {
public:
  NumericalError(const std::string& what, std::int64_t step = -1)
      : std::runtime_error(what), step_(step) {}

  /// Training step at which the failure happened, or -1 outside a training loop.
  std::int64_t step() const noexcept { return step_; }

private:
  std::int64_t step_;
};

enum class DataErrorCode {
  io,
  bad_magic,
  truncated,
  dimension_overflow,
  version_mismatch,
  corrupt_length,
  row_count,
};

/// Malformed or unreadable on-disk data (IDX corpora, checkpoints, matrix files).
class DataError : public std::runtime_error {
public:
  DataError(DataErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  DataErrorCode code() const noexcept { return code_; }

private:
  DataErrorCode code_;
};

} // namespace gmmn
