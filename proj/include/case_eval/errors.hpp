#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace case_eval {

// Root of every error the toolkit raises. Callers that only care about
// "something in the pipeline failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : Error("line " + std::to_string(line) + ": " + reason), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UnparseableResponse : public Error {
 public:
  using Error::Error;
};

// Raised when the judge endpoint could not be reached or kept failing after
// all retries. Transient failures inside the retry loop use TransientError.
class TransportError : public Error {
 public:
  using Error::Error;
};

class TransientError : public TransportError {
 public:
  using TransportError::TransportError;
};

class AspectJudgmentFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace case_eval
