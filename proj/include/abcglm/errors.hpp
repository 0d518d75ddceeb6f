#pragma once

#include <stdexcept>
#include <string>

namespace abcglm {

/// Bad arguments, malformed configs, broken preconditions. CLI exit code 1.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Singular matrices, degenerate fits, empty acceptance sets. CLI exit code 2.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem and parsing failures. CLI exit code 3.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Fixed-tolerance rejection run that accepted nothing.
class EmptyTableError : public NumericalError {
public:
    EmptyTableError(const std::string& what, long long proposals)
        : NumericalError(what), proposals_(proposals) {}
    long long proposals() const { return proposals_; }

private:
    long long proposals_;
};

}  // namespace abcglm
