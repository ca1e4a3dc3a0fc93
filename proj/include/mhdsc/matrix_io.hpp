#pragma once

#include "mhdsc/common.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mhdsc {

/// Shortest text that round-trips the double exactly ("%.17g").
std::string format_real(double x);

/// Writes each row of `m` as one line of whitespace-separated decimals.
void write_rows(std::ostream& out, const Matrix& m);

/// Text matrix block: `MAT v1 rows=<r> cols=<c>` followed by r lines of c
/// decimals. Used for codes, scores and ground-truth dumps.
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in, std::size_t& line_no);

void save_matrix(const Matrix& m, const std::string& path);
Matrix load_matrix(const std::string& path);

void save_matrices(const std::vector<Matrix>& ms, const std::string& path);
std::vector<Matrix> load_matrices(const std::string& path);

namespace detail {

/// Reads one line of exactly `expected` decimals into `row`. Throws ParseError
/// with the line number and 1-based token column on any problem.
void parse_row(const std::string& text, std::size_t line_no, Index expected, double* row,
               Index stride);

/// Parses `key=value` into value; throws ParseError when the key differs.
long long parse_int_field(const std::string& token, const std::string& key, std::size_t line_no);

} // namespace detail
} // namespace mhdsc
