#pragma once

#include <stdexcept>
#include <string>

namespace eim {

// Exceptions map one-to-one onto the status codes of the C API.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace eim
