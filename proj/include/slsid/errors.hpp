#pragma once

#include <stdexcept>
#include <string>

namespace slsid {

/// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or non-finite input.
class InvalidInputError : public Error {
  public:
    using Error::Error;
};

/// Matrix does not have the rank the operation requires.
class RankError : public Error {
  public:
    RankError(const std::string& msg, int measured_rank)
        : Error(msg + " (measured rank " + std::to_string(measured_rank) + ")"),
          measured_rank(measured_rank) {}
    int measured_rank;
};

/// (A, c^T) pair is not observable.
class ObservabilityError : public Error {
  public:
    explicit ObservabilityError(const std::string& msg, int state_index = -1)
        : Error(msg), state_index(state_index) {}
    int state_index;
};

/// Time or lag index outside the valid data window.
class RangeError : public Error {
  public:
    using Error::Error;
};

/// Requested configuration cannot be satisfied (e.g. horizon too short).
class ConstraintError : public Error {
  public:
    using Error::Error;
};

/// Hankel numerical rank disagrees with the requested model order.
class OrderMismatchError : public Error {
  public:
    OrderMismatchError(const std::string& msg, int measured_rank)
        : Error(msg + " (measured rank " + std::to_string(measured_rank) + ")"),
          measured_rank(measured_rank) {}
    int measured_rank;
};

/// Estimated and true state-set cardinalities differ.
class CardinalityError : public Error {
  public:
    CardinalityError(const std::string& msg, int expected, int got)
        : Error(msg + " (expected " + std::to_string(expected) + ", got " +
                std::to_string(got) + ")"),
          expected(expected), got(got) {}
    int expected;
    int got;
};

/// Metric is undefined for the given inputs (e.g. zero-variance reference).
class UndefinedMetricError : public Error {
  public:
    using Error::Error;
};

/// Error from a named pipeline stage.
class StageError : public Error {
  public:
    StageError(const std::string& stage, const std::string& msg)
        : Error("[" + stage + "] " + msg), stage(stage) {}
    std::string stage;
};

}  // namespace slsid
