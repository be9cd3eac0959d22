#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vaxopt {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition or argument-validation failure.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Integration blew up: NaN/Inf or a compartment overdrawn beyond tolerance.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based data row and the column name.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row, std::string column)
        : Error("row " + std::to_string(row) + ", column '" + column + "': " + what),
          row_(row), column_(std::move(column)) {}

    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

}  // namespace vaxopt
