#pragma once

#include <stdexcept>
#include <string>

namespace pushgp {

/// Invalid arguments: dimension mismatches, out-of-range values, bad indices.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A dataset row or field failed to parse or validate.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t row, std::string column)
        : std::runtime_error(what), row_(row), column_(std::move(column)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

/// File-level schema problems (header, units, version tags).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A covariance matrix could not be factorized even after jitter escalation.
class ConditioningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Objective evaluation produced non-finite values where they are not recoverable.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace pushgp
