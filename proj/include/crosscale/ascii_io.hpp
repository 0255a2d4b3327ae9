#pragma once

// ESRI ASCII grid reader/writer. Six header lines in fixed order (NCOLS,
// NROWS, XLLCORNER, YLLCORNER, CELLSIZE, NODATA_VALUE), then nrows lines of
// ncols whitespace-separated values, top row first. Integral values are
// written without a decimal point; everything else uses the shortest
// representation that parses back to the same double.

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "crosscale/concurrency.hpp"
#include "crosscale/grid.hpp"

namespace crosscale {

namespace detail {

inline constexpr double kMaxExactInt = 9007199254740992.0;  // 2^53

/// Appends v to out: integer digits when v is integral, else shortest
/// round-trip form. v must be finite.
inline void append_double(std::string& out, double v) {
    char buf[32];
    if (v == static_cast<double>(static_cast<std::int64_t>(v)) &&
        v >= -kMaxExactInt && v <= kMaxExactInt) {
        auto res = std::to_chars(buf, buf + sizeof(buf), static_cast<std::int64_t>(v));
        out.append(buf, res.ptr);
        return;
    }
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    out.append(buf, res.ptr);
}

inline std::string format_double(double v) {
    std::string s;
    append_double(s, v);
    return s;
}

/// Token scanner over an in-memory buffer that tracks 1-based line numbers.
class TokenScanner {
public:
    TokenScanner(const char* data, std::size_t size) : cur_(data), end_(data + size) {}

    // Returns an empty view at end of input.
    std::string_view next() {
        while (cur_ != end_ && is_space(*cur_)) {
            if (*cur_ == '\n') ++line_;
            ++cur_;
        }
        const char* start = cur_;
        while (cur_ != end_ && !is_space(*cur_)) ++cur_;
        return {start, static_cast<std::size_t>(cur_ - start)};
    }

    long line() const { return line_; }

private:
    static bool is_space(char c) {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
    }

    const char* cur_;
    const char* end_;
    long line_ = 1;
};

inline double parse_double_token(std::string_view tok, const char* what, long line) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw ParseError(std::string("non-numeric ") + what + " '" + std::string(tok) + "'", line);
    return v;
}

inline std::int64_t parse_int_token(std::string_view tok, const char* what, long line) {
    std::int64_t v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw ParseError(std::string("malformed ") + what + " '" + std::string(tok) + "', expected an integer", line);
    return v;
}

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        char ca = a[i], cb = b[i];
        if (ca >= 'a' && ca <= 'z') ca = static_cast<char>(ca - 'a' + 'A');
        if (cb >= 'a' && cb <= 'z') cb = static_cast<char>(cb - 'a' + 'A');
        if (ca != cb) return false;
    }
    return true;
}

inline std::string read_all(std::istream& in) {
    std::string content;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        content.append(buf, static_cast<std::size_t>(in.gcount()));
    if (in.bad()) throw IoError("failed reading input stream");
    return content;
}

}  // namespace detail

inline CountGrid read_ascii_grid_text(std::string_view content) {
    detail::TokenScanner scan(content.data(), content.size());

    static constexpr const char* kKeys[6] = {"NCOLS",     "NROWS",    "XLLCORNER",
                                             "YLLCORNER", "CELLSIZE", "NODATA_VALUE"};
    double values[6] = {};
    for (int i = 0; i < 6; ++i) {
        const std::string_view key = scan.next();
        if (key.empty())
            throw ParseError(std::string("missing header key ") + kKeys[i], scan.line());
        if (!detail::iequals(key, kKeys[i]))
            throw ParseError(std::string("malformed header key '") + std::string(key) +
                                 "', expected " + kKeys[i],
                             scan.line());
        const std::string_view val = scan.next();
        if (val.empty())
            throw ParseError(std::string("missing value for header key ") + kKeys[i], scan.line());
        if (i < 2)
            values[i] = static_cast<double>(detail::parse_int_token(val, kKeys[i], scan.line()));
        else
            values[i] = detail::parse_double_token(val, kKeys[i], scan.line());
    }

    GridHeader header;
    header.ncols = static_cast<std::int64_t>(values[0]);
    header.nrows = static_cast<std::int64_t>(values[1]);
    header.xll = values[2];
    header.yll = values[3];
    header.cellsize = values[4];
    header.nodata_value = values[5];
    try {
        header.validate();
    } catch (const ValidationError& e) {
        throw ParseError(e.what(), scan.line());
    }

    CountGrid grid(header, 0.0);
    const std::int64_t total = header.cell_count();
    double* cells = grid.cells().data();
    for (std::int64_t i = 0; i < total; ++i) {
        const std::string_view tok = scan.next();
        if (tok.empty())
            throw ParseError("grid body ends after " + std::to_string(i) + " of " +
                                 std::to_string(total) + " cells",
                             scan.line());
        const double v = detail::parse_double_token(tok, "cell", scan.line());
        if (v == header.nodata_value) {
            cells[i] = count_nodata();
        } else {
            if (v < 0)
                throw ParseError("negative count " + detail::format_double(v), scan.line());
            cells[i] = v;
        }
    }
    const std::string_view extra = scan.next();
    if (!extra.empty())
        throw ParseError("trailing data after " + std::to_string(total) + " cells", scan.line());
    return grid;
}

inline CountGrid read_ascii_grid(std::istream& in) {
    const std::string content = detail::read_all(in);
    return read_ascii_grid_text(content);
}

namespace detail {

inline void append_header(std::string& out, const GridHeader& h) {
    out += "NCOLS ";
    append_double(out, static_cast<double>(h.ncols));
    out += "\nNROWS ";
    append_double(out, static_cast<double>(h.nrows));
    out += "\nXLLCORNER ";
    append_double(out, h.xll);
    out += "\nYLLCORNER ";
    append_double(out, h.yll);
    out += "\nCELLSIZE ";
    append_double(out, h.cellsize);
    out += "\nNODATA_VALUE ";
    append_double(out, h.nodata_value);
    out += '\n';
}

// Rows are formatted in parallel chunks and written in order, so the bytes
// do not depend on the thread count.
template <typename T, typename Project>
void write_rows(std::ostream& out, const Grid<T>& grid, Project&& project) {
    const std::int64_t nrows = grid.nrows();
    const std::int64_t ncols = grid.ncols();
    const double nodata = grid.header().nodata_value;
    const std::int64_t max_chunk_rows =
        std::max<std::int64_t>(1, (1 << 22) / std::max<std::int64_t>(ncols, 1));
    for (std::int64_t chunk_begin = 0; chunk_begin < nrows; chunk_begin += max_chunk_rows * max_threads()) {
        const std::int64_t chunk_end =
            std::min<std::int64_t>(nrows, chunk_begin + max_chunk_rows * max_threads());
        const std::int64_t span = chunk_end - chunk_begin;
        std::vector<std::string> parts(static_cast<std::size_t>((span + max_chunk_rows - 1) / max_chunk_rows));
        parallel_chunks(static_cast<std::int64_t>(parts.size()), [&](std::int64_t pb, std::int64_t pe) {
            for (std::int64_t p = pb; p < pe; ++p) {
                std::string& buf = parts[static_cast<std::size_t>(p)];
                const std::int64_t rb = chunk_begin + p * max_chunk_rows;
                const std::int64_t re = std::min<std::int64_t>(chunk_end, rb + max_chunk_rows);
                buf.reserve(static_cast<std::size_t>((re - rb) * (ncols * 2 + 1)));
                for (std::int64_t r = rb; r < re; ++r) {
                    const T* row = grid.row_data(r);
                    for (std::int64_t c = 0; c < ncols; ++c) {
                        if (c != 0) buf += ' ';
                        const double v = project(row[c]);
                        if (std::isnan(v))
                            append_double(buf, nodata);
                        else
                            append_double(buf, v);
                    }
                    buf += '\n';
                }
            }
        });
        for (const std::string& part : parts) out.write(part.data(), static_cast<std::streamsize>(part.size()));
        if (!out) throw IoError("failed writing grid body");
    }
}

}  // namespace detail

inline void write_ascii_grid(std::ostream& out, const CountGrid& grid) {
    std::string head;
    detail::append_header(head, grid.header());
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    if (!out) throw IoError("failed writing grid header");
    detail::write_rows(out, grid, [](double v) {
        if (!std::isnan(v) && !std::isfinite(v))
            throw ValidationError("non-finite cell value");
        return v;
    });
    out.flush();
    if (!out) throw IoError("failed writing grid body");
}

/// Writes any grid whose cells project to a finite double (or NaN for
/// NoData, emitted as the header sentinel).
template <typename T, typename Project>
void write_ascii_grid_coded(std::ostream& out, const Grid<T>& grid, Project&& project) {
    std::string head;
    detail::append_header(head, grid.header());
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    if (!out) throw IoError("failed writing grid header");
    detail::write_rows(out, grid, project);
    out.flush();
    if (!out) throw IoError("failed writing grid body");
}

inline CountGrid read_ascii_grid_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    try {
        return read_ascii_grid(in);
    } catch (const ParseError& e) {
        throw ParseError(ParseError::Annotated{}, path + ": " + e.what(), e.line());
    }
}

inline void write_ascii_grid_file(const std::string& path, const CountGrid& grid) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    write_ascii_grid(out, grid);
}

template <typename T, typename Project>
void write_ascii_grid_coded_file(const std::string& path, const Grid<T>& grid, Project&& project) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    write_ascii_grid_coded(out, grid, project);
}

}  // namespace crosscale
