#pragma once

#include <stdexcept>
#include <string>

namespace loctomo {

// Every failure raised by the library derives from Error. The subclasses map
// onto the CLI exit codes (usage 2, data/format 3, numerical 4).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace loctomo
