#ifndef CROWDSR_ERRORS_HPP
#define CROWDSR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace crowdsr {

// Tensor or model extents disagree with what an operation requires.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or missing input data (files, records, config values).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation not available in the object's current state, e.g. running the
// super-resolution head after it has been detached.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace crowdsr

#endif  // CROWDSR_ERRORS_HPP
