#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mhdsc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: violated preconditions, out-of-range parameters, shape mismatches.
class ValidationError : public Error
{
public:
    using Error::Error;
};

/// Malformed text input. Carries the 1-based line and column of the problem
/// (0 when not applicable).
class ParseError : public ValidationError
{
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
        : ValidationError(format(what, line, column)), line_(line), column_(column)
    {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    static std::string format(const std::string& what, std::size_t line, std::size_t column)
    {
        std::string s = "line " + std::to_string(line);
        if (column > 0) s += ", column " + std::to_string(column);
        return s + ": " + what;
    }

    std::size_t line_;
    std::size_t column_;
};

/// Corrupted, truncated or unsupported binary model files.
class FormatError : public Error
{
public:
    using Error::Error;
};

/// Divergence, non-convergence or a broken numerical invariant.
class NumericalError : public Error
{
public:
    using Error::Error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

} // namespace mhdsc
