#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace camab {

// Base for every error raised by the library. Callers that only need a
// message can catch this; the subclasses let drivers decide between
// skipping an instance and aborting a run.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (JSON syntax and the like).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  size_t line() const { return line_; }

 private:
  size_t line_;
};

// Input is well-formed but violates a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A caller broke a precondition (dimension mismatch, bad argument).
class ContractError : public Error {
 public:
  using Error::Error;
};

// The oracle ledger has no remaining budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// Remote transport failed (HTTP status, timeout, malformed body).
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int attempts)
      : Error(what + " [attempts=" + std::to_string(attempts) + "]"),
        attempts_(attempts) {}
  int attempts() const { return attempts_; }

 private:
  int attempts_;
};

// The server's tokenization of the response does not line up with the
// instance's frozen response tokens.
class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& what, std::vector<std::string> expected,
                 std::vector<std::string> received)
      : Error(what),
        expected_(std::move(expected)),
        received_(std::move(received)) {}
  const std::vector<std::string>& expected() const { return expected_; }
  const std::vector<std::string>& received() const { return received_; }

 private:
  std::vector<std::string> expected_;
  std::vector<std::string> received_;
};

// A persisted replay store could not be read back.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// The full context does not raise the response likelihood over the empty
// context, so the normalized reward is undefined for this instance.
class UninformativeContextError : public Error {
 public:
  using Error::Error;
};

// A regression over sampled masks is rank deficient.
class DegenerateSampleError : public Error {
 public:
  using Error::Error;
};

// An operation needs a capability (e.g. text generation) that is not
// configured.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace camab
