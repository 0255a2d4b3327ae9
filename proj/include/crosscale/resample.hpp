#pragma once

// Binarization and the presence-preserving resolution pyramid steps.
//
// Aggregation blocks anchor at the lower-left map corner: columns group from
// the left edge and rows from the bottom edge, so partial blocks sit along
// the top and right edges of grids whose dimensions do not divide by the
// factor. (xll, yll) are identical at every pyramid level.

#include <cstdint>

#include "crosscale/concurrency.hpp"
#include "crosscale/grid.hpp"

namespace crosscale {

inline std::int64_t coarse_extent(std::int64_t n, std::int64_t factor) {
    return (n + factor - 1) / factor;
}

/// Coarse row containing fine row `row` (both top-first indices).
inline std::int64_t block_row(std::int64_t row, std::int64_t nrows, std::int64_t factor) {
    return coarse_extent(nrows, factor) - 1 - (nrows - 1 - row) / factor;
}

/// Coarse column containing fine column `col`.
inline std::int64_t block_col(std::int64_t col, std::int64_t factor) {
    return col / factor;
}

/// Cell = 1 where count >= threshold, 0 where 0 <= count < threshold,
/// NoData where the count is NoData. Header is copied unchanged.
inline BinaryGrid binarize(const CountGrid& grid, double threshold = 1.0) {
    if (!(threshold > 0.0))
        throw ValidationError("binarize threshold must be positive");
    BinaryGrid out(grid.header(), 0);
    parallel_chunks(grid.nrows(), [&](std::int64_t rb, std::int64_t re) {
        for (std::int64_t r = rb; r < re; ++r) {
            const double* src = grid.row_data(r);
            BinaryCell* dst = out.row_data(r);
            for (std::int64_t c = 0; c < grid.ncols(); ++c) {
                if (is_count_nodata(src[c]))
                    dst[c] = kBinaryNoData;
                else
                    dst[c] = src[c] >= threshold ? 1 : 0;
            }
        }
    });
    return out;
}

/// Each coarse cell is 1 if any covered fine cell is 1, else 0 if any
/// covered fine cell is 0, else NoData (all covered cells NoData).
inline BinaryGrid or_downsample(const BinaryGrid& grid, std::int64_t factor = 2) {
    if (factor < 2)
        throw ValidationError("downsample factor must be at least 2");
    GridHeader out_header = grid.header();
    out_header.ncols = coarse_extent(grid.ncols(), factor);
    out_header.nrows = coarse_extent(grid.nrows(), factor);
    out_header.cellsize = grid.header().cellsize * static_cast<double>(factor);
    BinaryGrid out(out_header, 0);

    const std::int64_t fine_rows = grid.nrows();
    const std::int64_t fine_cols = grid.ncols();
    parallel_chunks(out_header.nrows, [&](std::int64_t rb, std::int64_t re) {
        for (std::int64_t rc = rb; rc < re; ++rc) {
            // Fine rows covered by coarse row rc, derived from the
            // bottom-anchored grouping.
            const std::int64_t from_bottom = out_header.nrows - 1 - rc;
            const std::int64_t r_end = fine_rows - from_bottom * factor;          // exclusive
            const std::int64_t r_begin = std::max<std::int64_t>(0, r_end - factor);
            BinaryCell* dst = out.row_data(rc);
            for (std::int64_t cc = 0; cc < out_header.ncols; ++cc) {
                const std::int64_t c_begin = cc * factor;
                const std::int64_t c_end = std::min(fine_cols, c_begin + factor);
                BinaryCell acc = kBinaryNoData;
                for (std::int64_t r = r_begin; r < r_end && acc != 1; ++r) {
                    const BinaryCell* src = grid.row_data(r);
                    for (std::int64_t c = c_begin; c < c_end; ++c) {
                        const BinaryCell v = src[c];
                        if (v == 1) {
                            acc = 1;
                            break;
                        }
                        if (v == 0) acc = 0;
                    }
                }
                dst[cc] = acc;
            }
        }
    });
    return out;
}

/// Block replication: each fine cell takes the value of its enclosing
/// coarse cell. target_header must describe a grid that aggregates to
/// `grid` under `factor` with the same lower-left anchor.
template <typename T>
Grid<T> upsample_nn(const Grid<T>& grid, std::int64_t factor, const GridHeader& target_header) {
    if (factor < 1) throw ValidationError("upsample factor must be at least 1");
    target_header.validate();
    if (coarse_extent(target_header.nrows, factor) != grid.nrows() ||
        coarse_extent(target_header.ncols, factor) != grid.ncols())
        throw ValidationError(
            "upsample dimension mismatch: " + std::to_string(target_header.nrows) + "x" +
            std::to_string(target_header.ncols) + " does not aggregate to " +
            std::to_string(grid.nrows()) + "x" + std::to_string(grid.ncols()) + " by factor " +
            std::to_string(factor));
    const double tol = grid.header().cellsize * 1e-6;
    if (!(std::fabs(target_header.xll - grid.header().xll) < tol) ||
        !(std::fabs(target_header.yll - grid.header().yll) < tol))
        throw ValidationError("upsample target is not anchored at the same lower-left corner");

    Grid<T> out(target_header, T{});
    parallel_chunks(target_header.nrows, [&](std::int64_t rb, std::int64_t re) {
        for (std::int64_t r = rb; r < re; ++r) {
            const std::int64_t rc = block_row(r, target_header.nrows, factor);
            const T* src = grid.row_data(rc);
            T* dst = out.row_data(r);
            for (std::int64_t c = 0; c < target_header.ncols; ++c)
                dst[c] = src[block_col(c, factor)];
        }
    });
    return out;
}

}  // namespace crosscale
