#pragma once

// Grid data model shared by every stage of the pipeline: header geometry,
// dense row-major cell storage, alignment checks, and the error types
// thrown across the library.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace crosscale {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File or stream failure (missing file, short write, broken sink).
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed input content. Carries the 1-based line number of the offense.
class ParseError : public Error {
public:
    struct Annotated {};  // message already carries its line reference

    ParseError(const std::string& msg, long line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    ParseError(Annotated, const std::string& full_msg, long line)
        : Error(full_msg), line_(line) {}
    long line() const { return line_; }

private:
    long line_;
};

/// Arguments or inputs that violate an operation's preconditions.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Internal inconsistency that indicates a bug, not bad data.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct GridHeader {
    std::int64_t ncols = 0;
    std::int64_t nrows = 0;
    double xll = 0.0;       // x of the lower-left corner, map units
    double yll = 0.0;       // y of the lower-left corner, map units
    double cellsize = 0.0;  // map units per cell edge
    double nodata_value = -9999.0;

    std::int64_t cell_count() const { return ncols * nrows; }

    bool operator==(const GridHeader&) const = default;

    void validate() const {
        if (ncols < 1 || nrows < 1)
            throw ValidationError("grid dimensions must be at least 1x1, got " +
                                  std::to_string(ncols) + "x" + std::to_string(nrows));
        if (!(cellsize > 0.0) || !std::isfinite(cellsize))
            throw ValidationError("cellsize must be a positive finite number");
    }
};

/// Outcome of comparing two headers. Corner coordinates may differ by up to
/// cellsize * 1e-6; dimensions and cell size must match exactly.
struct AlignResult {
    bool aligned = true;
    std::vector<std::string> mismatched_fields;
    std::string description;  // empty when aligned

    explicit operator bool() const { return aligned; }
};

inline AlignResult align_check(const GridHeader& a, const GridHeader& b) {
    AlignResult res;
    auto flag = [&](const char* field, const std::string& detail) {
        res.aligned = false;
        res.mismatched_fields.emplace_back(field);
        if (!res.description.empty()) res.description += "; ";
        res.description += detail;
    };
    if (a.ncols != b.ncols)
        flag("ncols", "ncols " + std::to_string(a.ncols) + " vs " + std::to_string(b.ncols));
    if (a.nrows != b.nrows)
        flag("nrows", "nrows " + std::to_string(a.nrows) + " vs " + std::to_string(b.nrows));
    if (a.cellsize != b.cellsize)
        flag("cellsize", "cellsize " + std::to_string(a.cellsize) + " vs " + std::to_string(b.cellsize));
    const double tol = a.cellsize * 1e-6;
    if (!(std::fabs(a.xll - b.xll) < tol))
        flag("xll", "xll " + std::to_string(a.xll) + " vs " + std::to_string(b.xll));
    if (!(std::fabs(a.yll - b.yll) < tol))
        flag("yll", "yll " + std::to_string(a.yll) + " vs " + std::to_string(b.yll));
    return res;
}

inline bool headers_aligned(const GridHeader& a, const GridHeader& b) {
    return align_check(a, b).aligned;
}

/// Dense row-major raster. Row 0 is the top of the map, column 0 the left
/// edge; (xll, yll) anchor the lower-left corner in map coordinates.
template <typename T>
class Grid {
public:
    Grid() = default;

    Grid(const GridHeader& header, T fill)
        : header_(header), cells_(checked_size(header), fill) {}

    Grid(const GridHeader& header, std::vector<T> cells)
        : header_(header), cells_(std::move(cells)) {
        header_.validate();
        if (static_cast<std::int64_t>(cells_.size()) != header_.cell_count())
            throw ValidationError("cell buffer size " + std::to_string(cells_.size()) +
                                  " does not match " + std::to_string(header_.cell_count()) +
                                  " header cells");
    }

    const GridHeader& header() const { return header_; }
    std::int64_t ncols() const { return header_.ncols; }
    std::int64_t nrows() const { return header_.nrows; }
    std::int64_t size() const { return header_.cell_count(); }

    T& operator()(std::int64_t row, std::int64_t col) {
        return cells_[static_cast<std::size_t>(row * header_.ncols + col)];
    }
    const T& operator()(std::int64_t row, std::int64_t col) const {
        return cells_[static_cast<std::size_t>(row * header_.ncols + col)];
    }

    T& at(std::int64_t row, std::int64_t col) {
        check_index(row, col);
        return (*this)(row, col);
    }
    const T& at(std::int64_t row, std::int64_t col) const {
        check_index(row, col);
        return (*this)(row, col);
    }

    T* row_data(std::int64_t row) { return cells_.data() + row * header_.ncols; }
    const T* row_data(std::int64_t row) const { return cells_.data() + row * header_.ncols; }

    std::vector<T>& cells() { return cells_; }
    const std::vector<T>& cells() const { return cells_; }

    bool operator==(const Grid& other) const = default;

private:
    static std::size_t checked_size(const GridHeader& header) {
        header.validate();
        return static_cast<std::size_t>(header.cell_count());
    }

    void check_index(std::int64_t row, std::int64_t col) const {
        if (row < 0 || row >= header_.nrows || col < 0 || col >= header_.ncols)
            throw ValidationError("cell (" + std::to_string(row) + "," + std::to_string(col) +
                                  ") outside " + std::to_string(header_.nrows) + "x" +
                                  std::to_string(header_.ncols) + " grid");
    }

    GridHeader header_;
    std::vector<T> cells_;
};

// Count grids store NoData as quiet NaN; the file-level sentinel is applied
// only at the I/O boundary.
using CountGrid = Grid<double>;

inline double count_nodata() { return std::numeric_limits<double>::quiet_NaN(); }
inline bool is_count_nodata(double v) { return std::isnan(v); }

// Presence/absence cells: 0, 1, or the NoData sentinel.
using BinaryCell = std::uint8_t;
inline constexpr BinaryCell kBinaryNoData = 0xFF;
using BinaryGrid = Grid<BinaryCell>;

/// Cell-wise equality where NaN (NoData) compares equal to NaN.
inline bool same_values(const CountGrid& a, const CountGrid& b) {
    if (!headers_aligned(a.header(), b.header())) return false;
    const auto& ca = a.cells();
    const auto& cb = b.cells();
    for (std::size_t i = 0; i < ca.size(); ++i) {
        const bool na = std::isnan(ca[i]);
        const bool nb = std::isnan(cb[i]);
        if (na != nb) return false;
        if (!na && ca[i] != cb[i]) return false;
    }
    return true;
}

}  // namespace crosscale
