#pragma once

#include <stdexcept>
#include <string>

namespace ssqp {

// Precondition violations on caller-supplied values (sizes, ranges, flags).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// File could not be opened or ended before the expected payload.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File was readable but its content is not something we decode.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structured text (model JSON, CSV) could not be parsed.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IncompatibleVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical routine could not produce a result from the given data.
class DegenerateDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ssqp
