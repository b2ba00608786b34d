#pragma once

#include <stdexcept>
#include <string>

namespace mcpe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
public:
    using Error::Error;
};

/// A direct solve hit a zero pivot.
class SingularMatrixError : public Error {
public:
    using Error::Error;
};

/// A least-squares system does not have full column rank.
class RankDeficientError : public Error {
public:
    RankDeficientError(const std::string& what, long rank, long required)
        : Error(what), rank_(rank), required_(required) {}

    long rank() const noexcept { return rank_; }
    long required() const noexcept { return required_; }

private:
    long rank_;
    long required_;
};

} // namespace mcpe
