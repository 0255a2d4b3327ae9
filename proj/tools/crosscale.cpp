// Command-line front end: rasterize points, compare a test grid against a
// reference across an aggregation pyramid, or synthesize benchmark scenes.
//
// Exit codes are a scripting contract: 0 success, 1 I/O failure or internal
// error, 2 bad arguments or malformed/inconsistent input. Artifacts go to
// files; stdout stays empty on success and stderr carries diagnostics.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crosscale/agreement.hpp"
#include "crosscale/ascii_io.hpp"
#include "crosscale/concurrency.hpp"
#include "crosscale/grid.hpp"
#include "crosscale/metrics.hpp"
#include "crosscale/rasterize.hpp"
#include "crosscale/resample.hpp"
#include "crosscale/synth.hpp"

namespace fs = std::filesystem;
using namespace crosscale;

namespace {

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    return detail::read_all(in);
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

ProbabilityMapping parse_prob_map(const std::string& text, int levels) {
    if (text == "linear") return ProbabilityMapping::linear();
    if (text == "rank") return ProbabilityMapping::rank();
    constexpr std::string_view kPrefix = "table:";
    if (text.rfind(kPrefix, 0) == 0) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(text.substr(kPrefix.size()));
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError(std::string("--prob-map table is not valid JSON: ") + e.what());
        }
        if (!j.is_object()) throw ValidationError("--prob-map table must be a JSON object");
        std::map<int, double> by_level;
        double never = 0.0;
        bool have_never = false;
        for (const auto& [key, value] : j.items()) {
            if (!value.is_number())
                throw ValidationError("--prob-map table entry '" + key + "' must be a number");
            if (key == "never") {
                never = value.get<double>();
                have_never = true;
                continue;
            }
            int level = 0;
            try {
                std::size_t used = 0;
                level = std::stoi(key, &used);
                if (used != key.size()) throw std::invalid_argument(key);
            } catch (const std::exception&) {
                throw ValidationError("--prob-map table key '" + key +
                                      "' is neither a level number nor 'never'");
            }
            by_level[level] = value.get<double>();
        }
        if (!have_never) throw ValidationError("--prob-map table needs a 'never' entry");
        ProbabilityMapping mapping = ProbabilityMapping::table(by_level, never);
        mapping.validate(levels);
        return mapping;
    }
    throw ValidationError("unknown --prob-map '" + text + "', expected linear, rank, or table:<json>");
}

struct RasterizeArgs {
    std::string points;
    std::int64_t ncols = 0;
    std::int64_t nrows = 0;
    double xll = 0.0;
    double yll = 0.0;
    double cellsize = 0.0;
    std::string out;
};

int run_rasterize(const RasterizeArgs& args) {
    GridHeader header;
    header.ncols = args.ncols;
    header.nrows = args.nrows;
    header.xll = args.xll;
    header.yll = args.yll;
    header.cellsize = args.cellsize;
    header.validate();
    const std::vector<PointRecord> points = load_points_csv_file(args.points);
    const RasterizeResult result = points_to_counts(points, header);
    write_ascii_grid_file(args.out, result.grid);
    std::cerr << "rasterized " << (points.size() - result.dropped_points) << " of "
              << points.size() << " points; dropped " << result.dropped_points
              << " outside the extent (weight " << detail::format_double(result.dropped_weight)
              << ")\n";
    return 0;
}

struct CompareArgs {
    std::string test;
    std::string ref;
    std::string out_dir;
    int levels = 3;
    double threshold = 1.0;
    std::string prob_map = "linear";
    double theta = 0.5;
};

int run_compare(const CompareArgs& args) {
    if (args.levels < 1) throw ValidationError("--levels must be at least 1");
    if (!(args.theta >= 0.0 && args.theta <= 1.0))
        throw ValidationError("--theta must be in [0,1]");
    const ProbabilityMapping mapping = parse_prob_map(args.prob_map, args.levels);

    ReportConfig config;
    config.levels = args.levels;
    config.threshold = args.threshold;
    config.theta = args.theta;
    config.mapping = mapping;

    // Parse inputs from a single in-memory read each so the digests echoed
    // into the report are guaranteed to describe the bytes that were used.
    BinaryGrid test_bin, ref_bin;
    {
        const std::string test_bytes = read_file_bytes(args.test);
        config.inputs.push_back(
            {"test", fs::path(args.test).filename().string(), fnv1a64_hex(test_bytes)});
        CountGrid test_counts = [&] {
            try {
                return read_ascii_grid_text(test_bytes);
            } catch (const ParseError& e) {
                throw ParseError(ParseError::Annotated{}, args.test + ": " + e.what(), e.line());
            }
        }();
        test_bin = binarize(test_counts, args.threshold);
    }
    {
        const std::string ref_bytes = read_file_bytes(args.ref);
        config.inputs.push_back(
            {"ref", fs::path(args.ref).filename().string(), fnv1a64_hex(ref_bytes)});
        CountGrid ref_counts = [&] {
            try {
                return read_ascii_grid_text(ref_bytes);
            } catch (const ParseError& e) {
                throw ParseError(ParseError::Annotated{}, args.ref + ": " + e.what(), e.line());
            }
        }();
        ref_bin = binarize(ref_counts, args.threshold);
    }

    const Pyramid pyramid = build_pyramid(test_bin, ref_bin, args.levels);
    test_bin = BinaryGrid();
    ref_bin = BinaryGrid();
    const TrajectoryCube cube = build_cube(pyramid);
    const CompositeSurfaces surfaces = composite_surface(cube, mapping);
    const ComparisonReport report = build_report(pyramid, cube, config);

    const fs::path out_dir(args.out_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string());

    const double nodata = pyramid.native_header.nodata_value;
    auto class_code = [nodata](AgreementClass c) {
        return c == AgreementClass::NoData ? nodata : static_cast<double>(c);
    };
    auto family_code = [nodata](FamilyClass f) {
        return f == FamilyClass::NoData ? nodata : static_cast<double>(f);
    };
    write_ascii_grid_coded_file((out_dir / "class.asc").string(), surfaces.classes, class_code);
    write_ascii_grid_coded_file((out_dir / "family.asc").string(), surfaces.family, family_code);
    write_ascii_grid_file((out_dir / "probability.asc").string(), surfaces.probability);
    for (const PyramidLevel& lvl : pyramid.levels) {
        const fs::path path = out_dir / ("level" + std::to_string(lvl.level) + ".asc");
        write_ascii_grid_coded_file(path.string(), lvl.coarse, class_code);
    }
    write_text_file(out_dir / "report.json", report_to_json(report));
    write_text_file(out_dir / "report.csv", report_to_csv(report));
    return 0;
}

struct SynthArgs {
    std::string spec;
    int levels = 0;
    std::string out_dir;
};

int run_synth(const SynthArgs& args) {
    if (args.levels < 1) throw ValidationError("--levels must be at least 1");
    const std::string spec_bytes = read_file_bytes(args.spec);
    SceneSpec spec = [&] {
        try {
            return parse_scene_spec(spec_bytes);
        } catch (const ParseError& e) {
            throw ParseError(ParseError::Annotated{}, args.spec + ": " + e.what(), e.line());
        }
    }();
    if (spec.levels != 0 && spec.levels != args.levels)
        throw ValidationError("scene spec sets levels=" + std::to_string(spec.levels) +
                              " but --levels is " + std::to_string(args.levels));
    spec.levels = args.levels;

    const SceneSpec resolved = resolve_random(spec);
    const CountGrid expected = expected_surface(resolved);  // enforces isolation
    const SceneGrids scene = generate_scene(resolved);

    const fs::path out_dir(args.out_dir);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir.string());
    write_ascii_grid_file((out_dir / "test.asc").string(), scene.test);
    write_ascii_grid_file((out_dir / "ref.asc").string(), scene.ref);
    write_ascii_grid_file((out_dir / "expected.asc").string(), expected);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-scale grid agreement toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap, 0 = all hardware threads")
        ->capture_default_str();

    RasterizeArgs rast;
    CLI::App* rast_cmd = app.add_subcommand("rasterize", "Accumulate weighted points into a count grid");
    rast_cmd->add_option("--points", rast.points, "Input CSV with header x,y[,weight]")->required();
    rast_cmd->add_option("--ncols", rast.ncols, "Grid columns")->required();
    rast_cmd->add_option("--nrows", rast.nrows, "Grid rows")->required();
    rast_cmd->add_option("--xll", rast.xll, "X of the lower-left corner")->required();
    rast_cmd->add_option("--yll", rast.yll, "Y of the lower-left corner")->required();
    rast_cmd->add_option("--cellsize", rast.cellsize, "Cell edge length in map units")->required();
    rast_cmd->add_option("--out", rast.out, "Output ESRI ASCII grid path")->required();

    CompareArgs cmp;
    CLI::App* cmp_cmd = app.add_subcommand("compare", "Cross-scale agreement analysis of two grids");
    cmp_cmd->add_option("--test", cmp.test, "Test grid (ESRI ASCII)")->required();
    cmp_cmd->add_option("--ref", cmp.ref, "Reference grid (ESRI ASCII)")->required();
    cmp_cmd->add_option("--levels", cmp.levels, "Number of factor-2 aggregation levels")
        ->capture_default_str();
    cmp_cmd->add_option("--threshold", cmp.threshold, "Binarization threshold on cell counts")
        ->capture_default_str();
    cmp_cmd->add_option("--prob-map", cmp.prob_map, "linear, rank, or table:<json>")
        ->capture_default_str();
    cmp_cmd->add_option("--theta", cmp.theta, "Offset-probability cutoff for the adjusted summary")
        ->capture_default_str();
    cmp_cmd->add_option("--out-dir", cmp.out_dir, "Directory for result artifacts")->required();

    SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "Generate a benchmark scene from a JSON spec");
    synth_cmd->add_option("--spec", synth.spec, "Scene spec JSON path")->required();
    synth_cmd->add_option("--levels", synth.levels, "Number of factor-2 aggregation levels")
        ->required();
    synth_cmd->add_option("--out-dir", synth.out_dir, "Directory for test/ref/expected grids")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints the message naming the flag
        return 2;
    }

    set_max_threads(threads);
    try {
        if (rast_cmd->parsed()) return run_rasterize(rast);
        if (cmp_cmd->parsed()) return run_compare(cmp);
        if (synth_cmd->parsed()) return run_synth(synth);
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;  // unreachable with require_subcommand(1)
}
