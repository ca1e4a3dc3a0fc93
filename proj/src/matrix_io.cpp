#include "mhdsc/matrix_io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace mhdsc {

std::string format_real(double x)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_rows(std::ostream& out, const Matrix& m)
{
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0) out << ' ';
            out << format_real(m(i, j));
        }
        out << '\n';
    }
}

void write_matrix(std::ostream& out, const Matrix& m)
{
    out << "MAT v1 rows=" << m.rows() << " cols=" << m.cols() << '\n';
    write_rows(out, m);
}

namespace detail {

void parse_row(const std::string& text, std::size_t line_no, Index expected, double* row,
               Index stride)
{
    const char* p = text.c_str();
    Index count = 0;
    while (true) {
        while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
        if (*p == '\0') break;
        const char* start = p;
        errno = 0;
        char* end = nullptr;
        const double value = std::strtod(start, &end);
        const auto column = static_cast<std::size_t>(count + 1);
        if (end == start || (*end != '\0' && *end != ' ' && *end != '\t' && *end != '\r')) {
            throw ParseError("not a decimal number", line_no, column);
        }
        if (!std::isfinite(value)) throw ParseError("non-finite value", line_no, column);
        if (count >= expected) {
            throw ParseError("dimension mismatch: more than " + std::to_string(expected) +
                                 " values on the line",
                             line_no, column);
        }
        row[count * stride] = value;
        ++count;
        p = end;
    }
    if (count != expected) {
        throw ParseError("dimension mismatch: expected " + std::to_string(expected) +
                             " values, found " + std::to_string(count),
                         line_no);
    }
}

long long parse_int_field(const std::string& token, const std::string& key, std::size_t line_no)
{
    const std::string prefix = key + "=";
    if (token.rfind(prefix, 0) != 0) {
        throw ParseError("malformed header: expected '" + prefix + "...' but found '" + token + "'",
                         line_no);
    }
    const std::string digits = token.substr(prefix.size());
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(digits.c_str(), &end, 10);
    if (digits.empty() || *end != '\0' || errno != 0 || v < 0) {
        throw ParseError("malformed header: bad integer in '" + token + "'", line_no);
    }
    return v;
}

} // namespace detail

Matrix read_matrix(std::istream& in, std::size_t& line_no)
{
    std::string line;
    do {
        if (!std::getline(in, line)) throw ParseError("missing MAT header", line_no + 1);
        ++line_no;
    } while (line.find_first_not_of(" \t\r") == std::string::npos);

    std::istringstream header(line);
    std::string magic, version, rows_tok, cols_tok, extra;
    header >> magic >> version >> rows_tok >> cols_tok;
    if (magic != "MAT" || version != "v1" || (header >> extra)) {
        throw ParseError("malformed header: expected 'MAT v1 rows=<r> cols=<c>'", line_no);
    }
    const auto rows = static_cast<Index>(detail::parse_int_field(rows_tok, "rows", line_no));
    const auto cols = static_cast<Index>(detail::parse_int_field(cols_tok, "cols", line_no));

    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw ParseError("unexpected end of file", line_no + 1);
        ++line_no;
        detail::parse_row(line, line_no, cols, m.data() + i, m.rows());
    }
    return m;
}

void save_matrix(const Matrix& m, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    write_matrix(out, m);
    if (!out) throw Error("write to '" + path + "' failed");
}

Matrix load_matrix(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::size_t line_no = 0;
    return read_matrix(in, line_no);
}

void save_matrices(const std::vector<Matrix>& ms, const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    for (const auto& m : ms) write_matrix(out, m);
    if (!out) throw Error("write to '" + path + "' failed");
}

std::vector<Matrix> load_matrices(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    std::vector<Matrix> out;
    std::size_t line_no = 0;
    while (true) {
        in >> std::ws;
        if (in.peek() == std::char_traits<char>::eof()) break;
        out.push_back(read_matrix(in, line_no));
    }
    return out;
}

} // namespace mhdsc
