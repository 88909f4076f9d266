#pragma once

#include <stdexcept>
#include <string>

namespace phonox {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when inputs violate a documented precondition. The message names
/// the offending parameter first, e.g. "kappa: must be >= 0".
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Base for failures of the numerical machinery itself (as opposed to bad input).
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Too much population sits in the highest retained Fock level, so the
/// truncated evolution no longer represents the untruncated one.
class TruncationOverflow : public NumericalError {
public:
    TruncationOverflow(const std::string& what, double time, double tail)
        : NumericalError(what), time_(time), tail_(tail) {}

    double time() const noexcept { return time_; }
    double tail() const noexcept { return tail_; }

private:
    double time_;
    double tail_;
};

class StepFailure : public NumericalError {
public:
    StepFailure(const std::string& what, double time)
        : NumericalError(what), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

namespace detail {

[[noreturn]] inline void invalid(const std::string& key, const std::string& constraint)
{
    throw InvalidArgument(key + ": " + constraint);
}

} // namespace detail
} // namespace phonox
