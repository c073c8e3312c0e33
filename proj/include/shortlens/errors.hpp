#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace shortlens {

/// Process exit codes used by the command-line front end.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDependency = 2,
  kBackend = 3,
  kDataIntegrity = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ExitCode::kUsage, what) {}
};

/// A pipeline stage was run before the stages it consumes.
class DependencyError : public Error {
 public:
  DependencyError(const std::string& what, std::vector<std::string> required)
      : Error(ExitCode::kDependency, what), required_(std::move(required)) {}
  const std::vector<std::string>& required() const noexcept { return required_; }

 private:
  std::vector<std::string> required_;
};

/// Network-level failure talking to the model backend. Retryable.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what) : Error(ExitCode::kBackend, what) {}
};

/// The backend answered, but with something outside the wire contract.
class ContractViolation : public Error {
 public:
  ContractViolation(const std::string& what, std::string raw)
      : Error(ExitCode::kBackend, what), raw_(std::move(raw)) {}
  const std::string& raw_payload() const noexcept { return raw_; }

 private:
  std::string raw_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::kDataIntegrity, what) {}
};

/// Malformed input file. `line` is 1-based; 0 when not line-oriented.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConflictError : public DataError {
 public:
  using DataError::DataError;
};

class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

class PreconditionError : public DataError {
 public:
  using DataError::DataError;
};

/// Input is missing values that an upstream step should have resolved.
class IncompleteInputError : public DataError {
 public:
  IncompleteInputError(const std::string& what, std::vector<std::string> offenders)
      : DataError(what + format_offenders(offenders)), offenders_(std::move(offenders)) {}
  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  static std::string format_offenders(const std::vector<std::string>& ids) {
    std::string out = " [";
    for (std::size_t i = 0; i < ids.size() && i < 20; ++i) {
      if (i) out += ", ";
      out += ids[i];
    }
    if (ids.size() > 20) out += ", ... (" + std::to_string(ids.size()) + " total)";
    return out + "]";
  }
  std::vector<std::string> offenders_;
};

class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace shortlens
