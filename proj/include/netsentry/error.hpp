#pragma once

#include <stdexcept>
#include <string>

namespace netsentry {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (incomplete flow, wrong label, ...).
class PreconditionError : public Error {
public:
  using Error::Error;
};

// Bad on-disk input: unreadable capture, malformed CSV/JSON, unknown label.
class FormatError : public Error {
public:
  using Error::Error;
};

// Inconsistent configuration, e.g. overlapping label rules.
class ConfigError : public Error {
public:
  using Error::Error;
};

// Non-finite values inside the numeric core.
class NumericError : public Error {
public:
  using Error::Error;
};

inline void require(bool cond, const std::string &what) {
  if (!cond) throw PreconditionError(what);
}

} // namespace netsentry
