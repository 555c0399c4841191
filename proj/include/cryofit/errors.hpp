#pragma once

#include <stdexcept>
#include <string>

namespace cryofit {

// Malformed or inconsistent input data (bad files, violated data invariants).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A computation left the finite regime or diverged.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cryofit
