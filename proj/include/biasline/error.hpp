#pragma once

#include <stdexcept>
#include <string>

namespace biasline {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input or configuration (bad lexicon file, bad flag, digest mismatch).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filesystem or stream failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// The generation endpoint rejected our credentials.
class AuthError : public Error {
 public:
  using Error::Error;
};

}  // namespace biasline
