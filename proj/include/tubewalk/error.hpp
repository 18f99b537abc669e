#pragma once

#include <stdexcept>
#include <string>

namespace tubewalk {

/// A value object violates one of its invariants (bad spec, bad config).
class InvalidSpec : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An estimator cannot produce a result for otherwise valid input.
class EstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tubewalk
