#pragma once

#include <stdexcept>
#include <string>

namespace etriage {

// Bad parameter supplied by the caller (maps to CLI exit code 2).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent input data, I/O failures (exit code 1).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric or procedure cannot be applied to the given input,
// e.g. VAR with a single ensemble member.
class MetricUndefined : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace etriage
