#include <cmath>
#include <sstream>

#include <catch2/catch_amalgamated.hpp>

#include "crosscale/ascii_io.hpp"
#include "test_util.hpp"

using namespace crosscale;

namespace {

CountGrid parse(const std::string& text) {
    std::istringstream in(text);
    return read_ascii_grid(in);
}

std::string emit(const CountGrid& grid) {
    std::ostringstream out;
    write_ascii_grid(out, grid);
    return out.str();
}

}  // namespace

TEST_CASE("two-cell example from the format definition") {
    const CountGrid g = parse(
        "NCOLS 2\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 250\nNODATA_VALUE -9999\n"
        "3 -9999\n");
    REQUIRE(g.ncols() == 2);
    REQUIRE(g.nrows() == 1);
    REQUIRE(g(0, 0) == 3.0);
    REQUIRE(is_count_nodata(g(0, 1)));
}

TEST_CASE("all-zero body has no NoData") {
    const CountGrid g = parse(
        "NCOLS 3\nNROWS 2\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\nNODATA_VALUE -9999\n"
        "0 0 0\n0 0 0\n");
    for (double v : g.cells()) REQUIRE(v == 0.0);
}

TEST_CASE("header keys are case-insensitive and values can be decimal literals") {
    const CountGrid g = parse(
        "ncols 2\nNrows 2\nxllcorner 1.5\nYLLCORNER -2.25e1\ncellsize 0.5\nnodata_value -1\n"
        "1e2 0.25\n4 -1\n");
    REQUIRE(g.header().xll == 1.5);
    REQUIRE(g.header().yll == -22.5);
    REQUIRE(g.header().cellsize == 0.5);
    REQUIRE(g.header().nodata_value == -1.0);
    REQUIRE(g(0, 0) == 100.0);
    REQUIRE(g(0, 1) == 0.25);
    REQUIRE(g(1, 0) == 4.0);
    REQUIRE(is_count_nodata(g(1, 1)));
}

TEST_CASE("body order is top row first") {
    const CountGrid g = parse(
        "NCOLS 2\nNROWS 2\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\nNODATA_VALUE -9999\n"
        "1 2\n3 4\n");
    REQUIRE(g(0, 0) == 1.0);  // first token lands in the top-left cell
    REQUIRE(g(1, 1) == 4.0);
}

TEST_CASE("windows line endings parse identically") {
    const CountGrid a = parse(
        "NCOLS 2\r\nNROWS 1\r\nXLLCORNER 0\r\nYLLCORNER 0\r\nCELLSIZE 1\r\nNODATA_VALUE -9999\r\n"
        "5 6\r\n");
    REQUIRE(a(0, 0) == 5.0);
    REQUIRE(a(0, 1) == 6.0);
}

TEST_CASE("malformed inputs raise parse errors naming the line") {
    auto expect_parse_error = [](const std::string& text, const std::string& needle, long line) {
        try {
            parse(text);
            FAIL("expected ParseError for: " << needle);
        } catch (const ParseError& e) {
            INFO(e.what());
            REQUIRE(std::string(e.what()).find(needle) != std::string::npos);
            REQUIRE(e.line() == line);
        }
    };

    // header key out of order
    expect_parse_error(
        "NROWS 1\nNCOLS 2\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\nNODATA_VALUE -9999\n1 2\n",
        "NCOLS", 1);
    // non-numeric cell
    expect_parse_error(
        "NCOLS 2\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\nNODATA_VALUE -9999\n1 x\n",
        "cell", 7);
    // body ends early
    expect_parse_error(
        "NCOLS 2\nNROWS 2\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\nNODATA_VALUE -9999\n1 2 3",
        "ends after 3 of 4", 7);
    // trailing data
    expect_parse_error(
        "NCOLS 1\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\nNODATA_VALUE -9999\n1 2\n",
        "trailing", 7);
    // negative count
    expect_parse_error(
        "NCOLS 1\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\nNODATA_VALUE -9999\n-3\n",
        "negative count", 7);
    // degenerate lattice
    expect_parse_error(
        "NCOLS 0\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\nNODATA_VALUE -9999\n",
        "dimensions", 6);
}

TEST_CASE("writer emits integers without a decimal point") {
    CountGrid g(testutil::make_header(1, 1), 7.0);
    REQUIRE(emit(g) ==
            "NCOLS 1\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 250\nNODATA_VALUE -9999\n7\n");
}

TEST_CASE("writer encodes NoData with the header sentinel") {
    CountGrid g(testutil::make_header(1, 2), 2.0);
    g(0, 0) = count_nodata();
    REQUIRE(emit(g) ==
            "NCOLS 2\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 250\nNODATA_VALUE -9999\n"
            "-9999 2\n");
}

TEST_CASE("fractional values round-trip through shortest decimal form") {
    CountGrid g(testutil::make_header(1, 3), 0.0);
    g(0, 0) = 0.5;
    g(0, 1) = 0.1;
    g(0, 2) = 1.0 / 3.0;
    const CountGrid back = parse(emit(g));
    REQUIRE(back(0, 0) == 0.5);
    REQUIRE(back(0, 1) == 0.1);  // bit-exact, not just close
    REQUIRE(back(0, 2) == 1.0 / 3.0);
}

TEST_CASE("integer counts up to 2^53 survive a round-trip exactly") {
    CountGrid g(testutil::make_header(1, 2), 0.0);
    g(0, 0) = 9007199254740992.0;  // 2^53
    g(0, 1) = 9007199254740991.0;
    const std::string text = emit(g);
    REQUIRE(text.find("9007199254740992") != std::string::npos);
    REQUIRE(text.find(".") == std::string::npos);
    const CountGrid back = parse(text);
    REQUIRE(back(0, 0) == g(0, 0));
    REQUIRE(back(0, 1) == g(0, 1));
}

TEST_CASE("random integer grids round-trip exactly") {
    SeededRng rng(7101);
    for (int trial = 0; trial < 20; ++trial) {
        const std::int64_t nrows = rng.range(1, 16);
        const std::int64_t ncols = rng.range(1, 16);
        const CountGrid g = testutil::random_count_grid(rng, nrows, ncols, 12, 0.15);
        const CountGrid back = parse(emit(g));
        REQUIRE(back.header().ncols == g.header().ncols);
        REQUIRE(back.header().nrows == g.header().nrows);
        REQUIRE(same_values(back, g));
        // a second write of the parsed grid reproduces the bytes
        REQUIRE(emit(back) == emit(g));
    }
}

TEST_CASE("non-finite cells are rejected by the writer") {
    CountGrid g(testutil::make_header(1, 1), 0.0);
    g(0, 0) = std::numeric_limits<double>::infinity();
    std::ostringstream out;
    REQUIRE_THROWS_AS(write_ascii_grid(out, g), ValidationError);
}

TEST_CASE("file wrapper prefixes the path on parse failure") {
    testutil::TempDir tmp;
    testutil::write_file(tmp.file("bad.asc"), "NCOLS oops\n");
    try {
        read_ascii_grid_file(tmp.file("bad.asc"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find("bad.asc") != std::string::npos);
        // the line annotation appears exactly once
        REQUIRE(msg.find("(line") == msg.rfind("(line"));
    }
}

TEST_CASE("missing file raises IoError") {
    REQUIRE_THROWS_AS(read_ascii_grid_file("/nonexistent/nowhere.asc"), IoError);
}
