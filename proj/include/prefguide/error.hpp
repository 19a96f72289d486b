// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace prefguide {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidIdError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class UnknownDimensionError : public Error {
 public:
  explicit UnknownDimensionError(std::string dim)
      : Error("unknown preference dimension: " + dim), dim_(std::move(dim)) {}
  const std::string& dim() const noexcept { return dim_; }

 private:
  std::string dim_;
};

class CorruptCheckpointError : public Error {
 public:
  using Error::Error;
};

class UnsupportedVersionError : public Error {
 public:
  using Error::Error;
};

class MissingTraceError : public Error {
 public:
  using Error::Error;
};

// Raised when training produces a non-finite loss.
class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(double lr, std::size_t epoch, std::size_t batch_index)
      : Error("non-finite loss (lr=" + std::to_string(lr) + ", epoch=" + std::to_string(epoch) +
              ", batch=" + std::to_string(batch_index) + ")"),
        lr_(lr),
        epoch_(epoch),
        batch_index_(batch_index) {}
  double lr() const noexcept { return lr_; }
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch_index() const noexcept { return batch_index_; }

 private:
  double lr_;
  std::size_t epoch_;
  std::size_t batch_index_;
};

// Non-fatal conditions recorded by operations that recover on their own
// (normalized weights, skipped examples).
struct Warnings {
  std::vector<std::string> messages;
  void add(std::string message) { messages.push_back(std::move(message)); }
};

}  // namespace prefguide
