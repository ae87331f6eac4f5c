// Copyright 2026 The hsbinn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace hsbinn {

/// Invalid argument or configuration (non-positive IC50, shape mismatch, ...).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The adaptive integrator could not continue (step size underflow).
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double last_good_time)
      : std::runtime_error(what), last_good_time_(last_good_time) {}
  double last_good_time() const noexcept { return last_good_time_; }

 private:
  double last_good_time_;
};

class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite loss or gradient during training.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed, truncated or version-mismatched files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hsbinn
