#pragma once

#include <stdexcept>
#include <string>

namespace descry {

/// Base class for everything the library throws on purpose.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (bad tolerance, out-of-bounds rectangle, ...).
class config_error : public error {
 public:
  using error::error;
};

/// Filesystem trouble: missing input, unwritable output.
class io_error : public error {
 public:
  using error::error;
};

/// Content that parses wrong or violates a schema (malformed PGM, bad KB file, ...).
class data_error : public error {
 public:
  using error::error;
};

}  // namespace descry
