#ifndef BSS_ERRORS_HPP
#define BSS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bss {

// Base class for all toolkit errors. Subclasses mark the failure category;
// the CLI maps them to exit codes (config -> 2, numerical -> 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- I/O and format ---
class IoFailure : public Error {
 public:
  using Error::Error;
};
class CorruptHeader : public Error {
 public:
  using Error::Error;
};
class UnsupportedFormat : public Error {
 public:
  using Error::Error;
};

// --- Signal / configuration ---
class SignalTooShort : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};

// --- Numerical ---
class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};
class SingularMatrix : public Error {
 public:
  using Error::Error;
};
class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

// --- Metrics ---
class LengthMismatch : public Error {
 public:
  using Error::Error;
};
class ZeroReference : public Error {
 public:
  using Error::Error;
};

}  // namespace bss

#endif  // BSS_ERRORS_HPP
