#pragma once

// Shared helpers for the unit and acceptance suites: seeded random grids,
// brute-force oracles kept deliberately independent of the library's index
// arithmetic, scratch directories, and a child-process runner for the CLI.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "crosscale/grid.hpp"
#include "crosscale/synth.hpp"

namespace testutil {

inline crosscale::GridHeader make_header(std::int64_t nrows, std::int64_t ncols,
                                         double cellsize = 250.0, double xll = 0.0,
                                         double yll = 0.0) {
    crosscale::GridHeader h;
    h.nrows = nrows;
    h.ncols = ncols;
    h.cellsize = cellsize;
    h.xll = xll;
    h.yll = yll;
    return h;
}

/// Integer-valued random count grid; a nodata_fraction of cells become NoData.
inline crosscale::CountGrid random_count_grid(crosscale::SeededRng& rng, std::int64_t nrows,
                                              std::int64_t ncols, std::uint64_t max_count,
                                              double nodata_fraction = 0.0) {
    crosscale::CountGrid grid(make_header(nrows, ncols), 0.0);
    for (double& cell : grid.cells()) {
        if (nodata_fraction > 0.0 && rng.unit() < nodata_fraction)
            cell = crosscale::count_nodata();
        else
            cell = static_cast<double>(rng.next_below(max_count + 1));
    }
    return grid;
}

inline crosscale::BinaryGrid random_binary_grid(crosscale::SeededRng& rng, std::int64_t nrows,
                                                std::int64_t ncols, double p_one,
                                                double nodata_fraction = 0.0) {
    crosscale::BinaryGrid grid(make_header(nrows, ncols), 0);
    for (crosscale::BinaryCell& cell : grid.cells()) {
        if (nodata_fraction > 0.0 && rng.unit() < nodata_fraction)
            cell = crosscale::kBinaryNoData;
        else
            cell = rng.unit() < p_one ? 1 : 0;
    }
    return grid;
}

/// The fine rows covered by coarse row R, derived from the lower-left anchor
/// by counting whole blocks from the bottom edge. This is intentionally a
/// different derivation from the library's per-cell block indexing.
inline std::pair<std::int64_t, std::int64_t> coarse_row_span(std::int64_t R,
                                                             std::int64_t coarse_nrows,
                                                             std::int64_t fine_nrows,
                                                             std::int64_t factor) {
    const std::int64_t from_bottom = coarse_nrows - 1 - R;
    const std::int64_t fb_begin = from_bottom * factor;
    const std::int64_t fb_end = std::min(fb_begin + factor, fine_nrows);
    // from-bottom range [fb_begin, fb_end) maps to top-indexed rows
    return {fine_nrows - fb_end, fine_nrows - fb_begin};
}

/// Block-sum oracle: per coarse cell, the sum of valid covered counts
/// (NoData skipped; all-NoData block stays NoData).
inline crosscale::CountGrid sum_downsample(const crosscale::CountGrid& grid, std::int64_t factor) {
    crosscale::GridHeader out_h = grid.header();
    out_h.nrows = (grid.nrows() + factor - 1) / factor;
    out_h.ncols = (grid.ncols() + factor - 1) / factor;
    out_h.cellsize = grid.header().cellsize * static_cast<double>(factor);
    crosscale::CountGrid out(out_h, 0.0);
    for (std::int64_t R = 0; R < out_h.nrows; ++R) {
        const auto [rb, re] = coarse_row_span(R, out_h.nrows, grid.nrows(), factor);
        for (std::int64_t C = 0; C < out_h.ncols; ++C) {
            double sum = 0.0;
            bool any_valid = false;
            for (std::int64_t r = rb; r < re; ++r) {
                for (std::int64_t c = C * factor; c < std::min((C + 1) * factor, grid.ncols());
                     ++c) {
                    const double v = grid(r, c);
                    if (crosscale::is_count_nodata(v)) continue;
                    sum += v;
                    any_valid = true;
                }
            }
            out(R, C) = any_valid ? sum : crosscale::count_nodata();
        }
    }
    return out;
}

/// Brute-force OR aggregation over explicitly enumerated blocks.
inline crosscale::BinaryGrid or_downsample_oracle(const crosscale::BinaryGrid& grid,
                                                  std::int64_t factor) {
    crosscale::GridHeader out_h = grid.header();
    out_h.nrows = (grid.nrows() + factor - 1) / factor;
    out_h.ncols = (grid.ncols() + factor - 1) / factor;
    out_h.cellsize = grid.header().cellsize * static_cast<double>(factor);
    crosscale::BinaryGrid out(out_h, 0);
    for (std::int64_t R = 0; R < out_h.nrows; ++R) {
        const auto [rb, re] = coarse_row_span(R, out_h.nrows, grid.nrows(), factor);
        for (std::int64_t C = 0; C < out_h.ncols; ++C) {
            bool any_one = false, any_zero = false;
            for (std::int64_t r = rb; r < re; ++r) {
                for (std::int64_t c = C * factor; c < std::min((C + 1) * factor, grid.ncols());
                     ++c) {
                    if (grid(r, c) == 1) any_one = true;
                    else if (grid(r, c) == 0) any_zero = true;
                }
            }
            out(R, C) = any_one ? 1 : (any_zero ? 0 : crosscale::kBinaryNoData);
        }
    }
    return out;
}

/// Scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "crosscale-XXXXXX").string();
        std::vector<char> buf(tmpl.begin(), tmpl.end());
        buf.push_back('\0');
        if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
        path_ = buf.data();
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot create " + path);
    out << text;
}

#ifdef CROSSCALE_CLI_PATH

struct CliResult {
    int exit_code = -1;
    std::string err;  // captured standard error
};

/// Runs the built CLI with the given argument string via the shell; stderr
/// is captured into a scratch file. The argument string must be shell-safe
/// (tests only use plain paths and flags).
inline CliResult run_cli(const std::string& args, const TempDir& scratch) {
    const std::string err_path = scratch.file("cli-stderr.txt");
    const std::string cmd = std::string(CROSSCALE_CLI_PATH) + " " + args + " 2> " + err_path;
    const int status = std::system(cmd.c_str());
    CliResult result;
    if (status == -1)
        result.exit_code = -1;
    else if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else
        result.exit_code = 128;
    std::ifstream err(err_path, std::ios::binary);
    if (err) {
        std::ostringstream ss;
        ss << err.rdbuf();
        result.err = ss.str();
    }
    return result;
}

#endif  // CROSSCALE_CLI_PATH

}  // namespace testutil
