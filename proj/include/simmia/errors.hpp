#ifndef SIMMIA_ERRORS_HPP
#define SIMMIA_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace simmia {

// Base of every error the toolkit throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed file contents: bad header, dimension mismatch, non-finite value.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Shape or range mismatch in a caller-supplied argument.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// The data does not satisfy an operation's precondition (missing labels,
// single-class input, empty pool, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Not enough rows to satisfy a sampling request.
class CapacityError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

// API misuse such as replaying a tape against a modified network.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or parameters during optimization.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace simmia

#endif  // SIMMIA_ERRORS_HPP
