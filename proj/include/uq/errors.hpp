#pragma once

#include <stdexcept>
#include <string>

namespace uq {

// Root of all library errors. Catching uq::Error distinguishes structured
// failures from genuine crashes (std::bad_alloc, logic bugs, ...).
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration: dimension mismatches, invalid hyperparameters,
// malformed generator or suite blocks.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Invalid runtime state, e.g. non-finite weights or a corrupted prediction.
class StateError : public Error {
public:
  using Error::Error;
};

// Argument outside its mathematical domain (sigma <= 0, alpha >= 1, ...).
class DomainError : public Error {
public:
  using Error::Error;
};

// The estimator cannot provide what was asked for (e.g. no decomposition).
class CapabilityError : public Error {
public:
  using Error::Error;
};

// An estimator produced invalid output mid-evaluation. Feeds the technical
// test level of the harness.
class EstimatorFault : public Error {
public:
  using Error::Error;
};

// File or document parsing failure; carries a line/row locator when known.
class ParseError : public Error {
public:
  explicit ParseError(const std::string& msg, long row = -1)
      : Error(row >= 0 ? msg + " (row " + std::to_string(row) + ")" : msg),
        row_(row) {}
  long row() const { return row_; }

private:
  long row_ = -1;
};

// Training produced a NaN loss; names the epoch it happened in.
class TrainingDiverged : public Error {
public:
  TrainingDiverged(const std::string& msg, int epoch)
      : Error(msg + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  int epoch() const { return epoch_; }

private:
  int epoch_ = 0;
};

// A data selection resolved to zero rows. A test must never pass on nothing.
class EmptySelection : public Error {
public:
  using Error::Error;
};

// Malformed logic tree or unresolved references between suite objects.
class StructuralError : public Error {
public:
  using Error::Error;
};

}  // namespace uq
