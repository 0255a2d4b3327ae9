#pragma once

// Point-to-count rasterization: drop weighted points onto a grid lattice by
// accumulating per-cell weight sums. Points outside the extent are dropped
// and accounted for rather than clamped, so callers can flag suspicious
// inputs without losing the run.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

#include "crosscale/ascii_io.hpp"
#include "crosscale/grid.hpp"

namespace crosscale {

struct PointRecord {
    double x = 0.0;
    double y = 0.0;
    double weight = 1.0;
};

struct RasterizeResult {
    CountGrid grid;
    std::uint64_t dropped_points = 0;  // outside the grid extent
    double dropped_weight = 0.0;
};

/// Accumulates point weights into cell counts. Cells are half-open: a point
/// on a cell's left or bottom edge belongs to that cell, one on the right or
/// top edge to the neighbor. Points exactly on the extent's top or right
/// boundary therefore fall outside and are dropped.
///
/// Accumulation order follows input order, so results are deterministic for
/// a given point sequence despite floating-point addition.
inline RasterizeResult points_to_counts(const std::vector<PointRecord>& points,
                                        const GridHeader& header) {
    header.validate();
    RasterizeResult result{CountGrid(header, 0.0), 0, 0.0};
    const double inv = 1.0 / header.cellsize;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const PointRecord& p = points[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw ValidationError("point " + std::to_string(i) + " has a non-finite coordinate");
        if (!std::isfinite(p.weight) || p.weight < 0.0)
            throw ValidationError("point " + std::to_string(i) + " has a negative or non-finite weight");
        const double fx = (p.x - header.xll) * inv;
        const double fy = (p.y - header.yll) * inv;
        if (fx < 0.0 || fy < 0.0) {
            ++result.dropped_points;
            result.dropped_weight += p.weight;
            continue;
        }
        const std::int64_t col = static_cast<std::int64_t>(std::floor(fx));
        const std::int64_t row_from_bottom = static_cast<std::int64_t>(std::floor(fy));
        if (col >= header.ncols || row_from_bottom >= header.nrows) {
            ++result.dropped_points;
            result.dropped_weight += p.weight;
            continue;
        }
        result.grid(header.nrows - 1 - row_from_bottom, col) += p.weight;
    }
    return result;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_csv_double(std::string_view field, std::int64_t line, const char* what) {
    const std::string_view token = trim(field);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc{} || ptr != token.data() + token.size() || !std::isfinite(value))
        throw ParseError(std::string("bad ") + what + " value '" + std::string(token) + "'", line);
    return value;
}

}  // namespace detail

/// Reads points from CSV with header `x,y` or `x,y,weight` (case-insensitive,
/// surrounding whitespace ignored). Without a weight column every point
/// counts as 1. Blank lines are skipped; anything else malformed is an error
/// naming the line.
inline std::vector<PointRecord> load_points_csv(std::istream& in) {
    const std::string buffer = detail::read_all(in);
    std::vector<PointRecord> points;
    std::string_view rest(buffer);
    std::int64_t line_no = 0;
    bool saw_header = false;
    bool has_weight = false;
    while (!rest.empty()) {
        const std::size_t nl = rest.find('\n');
        std::string_view line = nl == std::string_view::npos ? rest : rest.substr(0, nl);
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
        ++line_no;
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (!saw_header) {
            if (fields.size() != 2 && fields.size() != 3)
                throw ParseError("expected header 'x,y' or 'x,y,weight'", line_no);
            if (!detail::iequals(detail::trim(fields[0]), "x") ||
                !detail::iequals(detail::trim(fields[1]), "y") ||
                (fields.size() == 3 && !detail::iequals(detail::trim(fields[2]), "weight")))
                throw ParseError("expected header 'x,y' or 'x,y,weight'", line_no);
            has_weight = fields.size() == 3;
            saw_header = true;
            continue;
        }
        const std::size_t expected = has_weight ? 3 : 2;
        if (fields.size() != expected)
            throw ParseError("expected " + std::to_string(expected) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        PointRecord p;
        p.x = detail::parse_csv_double(fields[0], line_no, "x");
        p.y = detail::parse_csv_double(fields[1], line_no, "y");
        if (has_weight) {
            p.weight = detail::parse_csv_double(fields[2], line_no, "weight");
            if (p.weight < 0.0) throw ParseError("negative weight", line_no);
        }
        points.push_back(p);
    }
    if (!saw_header) throw ParseError("empty point file, expected a header line", 1);
    return points;
}

inline std::vector<PointRecord> load_points_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    try {
        return load_points_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(ParseError::Annotated{}, path + ": " + e.what(), e.line());
    }
}

}  // namespace crosscale
