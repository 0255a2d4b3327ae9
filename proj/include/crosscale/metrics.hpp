#pragma once

// Per-level confusion accounting, switch-level histograms, and the
// offset-adjusted disagreement summary, serialized as JSON and CSV.
//
// Per-level counts tally coarse-grid cells, not upsampled native pixels;
// native-pixel tallies would multiply-count each coarse decision by 4^s.

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "crosscale/agreement.hpp"
#include "crosscale/ascii_io.hpp"
#include "crosscale/concurrency.hpp"
#include "crosscale/grid.hpp"

namespace crosscale {

struct ConfusionCounts {
    int level = 0;
    double cellsize = 0.0;
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t nodata = 0;

    std::uint64_t valid() const { return tp + tn + fp + fn; }
    std::uint64_t total() const { return valid() + nodata; }
};

inline ConfusionCounts confusion_matrix(const AgreementGrid& grid, int level_index = 0) {
    ConfusionCounts counts;
    counts.level = level_index;
    counts.cellsize = grid.header().cellsize;
    std::atomic<std::uint64_t> tp{0}, tn{0}, fp{0}, fn{0}, nodata{0};
    parallel_chunks(grid.nrows(), [&](std::int64_t rb, std::int64_t re) {
        std::uint64_t l_tp = 0, l_tn = 0, l_fp = 0, l_fn = 0, l_nd = 0;
        for (std::int64_t r = rb; r < re; ++r) {
            const AgreementClass* row = grid.row_data(r);
            for (std::int64_t c = 0; c < grid.ncols(); ++c) {
                switch (row[c]) {
                    case AgreementClass::TP: ++l_tp; break;
                    case AgreementClass::TN: ++l_tn; break;
                    case AgreementClass::FP: ++l_fp; break;
                    case AgreementClass::FN: ++l_fn; break;
                    case AgreementClass::NoData: ++l_nd; break;
                }
            }
        }
        tp += l_tp; tn += l_tn; fp += l_fp; fn += l_fn; nodata += l_nd;
    });
    counts.tp = tp; counts.tn = tn; counts.fp = fp; counts.fn = fn; counts.nodata = nodata;
    return counts;
}

/// Standard accuracy measures. A zero denominator yields an empty optional,
/// never a silent zero.
struct DerivedMeasures {
    std::optional<double> percent_correct;
    std::optional<double> omission_rate;    // fn / (fn + tp)
    std::optional<double> commission_rate;  // fp / (fp + tp)
    std::optional<double> f_measure;        // 2tp / (2tp + fp + fn)
};

inline DerivedMeasures derived_measures(const ConfusionCounts& c) {
    DerivedMeasures m;
    auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.percent_correct = ratio(c.tp + c.tn, c.valid());
    m.omission_rate = ratio(c.fn, c.fn + c.tp);
    m.commission_rate = ratio(c.fp, c.fp + c.tp);
    m.f_measure = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    return m;
}

/// Switch-level tallies per disagreement family. Index 0 counts pixels that
/// never switch; index s counts switches at level s.
struct SwitchHistogram {
    int levels = 0;
    std::vector<std::uint64_t> fp;  // size levels + 1
    std::vector<std::uint64_t> fn;

    std::uint64_t fp_total() const {
        std::uint64_t t = 0;
        for (auto v : fp) t += v;
        return t;
    }
    std::uint64_t fn_total() const {
        std::uint64_t t = 0;
        for (auto v : fn) t += v;
        return t;
    }
};

inline SwitchHistogram switch_histogram(const TrajectoryCube& cube) {
    const int levels = cube.steps();
    SwitchHistogram hist;
    hist.levels = levels;
    hist.fp.assign(static_cast<std::size_t>(levels) + 1, 0);
    hist.fn.assign(static_cast<std::size_t>(levels) + 1, 0);
    // Tally per row, merge in row order.
    const std::int64_t nrows = cube.header.nrows;
    std::vector<std::vector<std::uint64_t>> rows_fp(static_cast<std::size_t>(nrows)),
        rows_fn(static_cast<std::size_t>(nrows));
    parallel_chunks(nrows, [&](std::int64_t rb, std::int64_t re) {
        std::vector<AgreementClass> seq(static_cast<std::size_t>(levels) + 1);
        for (std::int64_t r = rb; r < re; ++r) {
            auto& row_fp = rows_fp[static_cast<std::size_t>(r)];
            auto& row_fn = rows_fn[static_cast<std::size_t>(r)];
            row_fp.assign(static_cast<std::size_t>(levels) + 1, 0);
            row_fn.assign(static_cast<std::size_t>(levels) + 1, 0);
            for (std::int64_t c = 0; c < cube.header.ncols; ++c) {
                const AgreementClass base = cube.levels.front()(r, c);
                if (base != AgreementClass::FP && base != AgreementClass::FN) continue;
                for (int s = 0; s <= levels; ++s)
                    seq[static_cast<std::size_t>(s)] = cube.levels[static_cast<std::size_t>(s)](r, c);
                const auto res = switch_level(seq);
                const std::size_t slot = res->never() ? 0 : static_cast<std::size_t>(res->level);
                if (base == AgreementClass::FP)
                    ++row_fp[slot];
                else
                    ++row_fn[slot];
            }
        }
    });
    for (std::int64_t r = 0; r < nrows; ++r) {
        for (std::size_t s = 0; s <= static_cast<std::size_t>(levels); ++s) {
            hist.fp[s] += rows_fp[static_cast<std::size_t>(r)][s];
            hist.fn[s] += rows_fn[static_cast<std::size_t>(r)][s];
        }
    }
    return hist;
}

/// Level-0 FP/FN pixels split by whether their offset probability clears
/// the threshold; pixels at or above it are treated as offset-induced.
struct AdjustedDisagreement {
    double theta = 0.5;
    std::uint64_t offset_fp = 0;
    std::uint64_t offset_fn = 0;
    std::uint64_t true_fp = 0;
    std::uint64_t true_fn = 0;
    std::optional<double> unadjusted_percent_correct;
    std::optional<double> adjusted_percent_correct;

    std::uint64_t offset_total() const { return offset_fp + offset_fn; }
    std::uint64_t true_total() const { return true_fp + true_fn; }
};

inline AdjustedDisagreement adjusted_disagreement(const TrajectoryCube& cube,
                                                  const ProbabilityMapping& mapping,
                                                  double theta) {
    if (!(theta >= 0.0 && theta <= 1.0))
        throw ValidationError("theta must be in [0,1]");
    const int levels = cube.steps();
    mapping.validate(levels);

    AdjustedDisagreement adj;
    adj.theta = theta;
    const ConfusionCounts base = confusion_matrix(cube.levels.front(), 0);
    const SwitchHistogram hist = switch_histogram(cube);
    for (std::size_t s = 0; s < hist.fp.size(); ++s) {
        const int level = s == 0 ? SwitchResult::kNever : static_cast<int>(s);
        const bool offset_induced = mapping.value(level, levels) >= theta;
        if (offset_induced) {
            adj.offset_fp += hist.fp[s];
            adj.offset_fn += hist.fn[s];
        } else {
            adj.true_fp += hist.fp[s];
            adj.true_fn += hist.fn[s];
        }
    }
    if (base.valid() > 0) {
        const double total = static_cast<double>(base.valid());
        adj.unadjusted_percent_correct = static_cast<double>(base.tp + base.tn) / total;
        adj.adjusted_percent_correct =
            static_cast<double>(base.tp + base.tn + adj.offset_total()) / total;
    }
    return adj;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    char buf[17];
    static constexpr char kHex[] = "0123456789abcdef";
    for (int i = 15; i >= 0; --i) {
        buf[i] = kHex[h & 0xF];
        h >>= 4;
    }
    return std::string(buf, 16);
}

struct ReportInput {
    std::string role;    // "test" or "ref"
    std::string name;    // file base name, no directories
    std::string digest;  // fnv1a64 of the raw bytes
};

struct ReportConfig {
    int levels = 3;
    double threshold = 1.0;
    double theta = 0.5;
    ProbabilityMapping mapping = ProbabilityMapping::linear();
    std::vector<ReportInput> inputs;
};

struct LevelReport {
    ConfusionCounts counts;
    DerivedMeasures measures;
};

struct ComparisonReport {
    std::vector<LevelReport> levels;
    SwitchHistogram histogram;
    AdjustedDisagreement adjusted;
    ReportConfig config;
    double nodata_value = -9999.0;  // echoed in the coding legend
};

inline ComparisonReport build_report(const Pyramid& pyramid, const TrajectoryCube& cube,
                                     const ReportConfig& config) {
    ComparisonReport report;
    report.config = config;
    report.nodata_value = pyramid.native_header.nodata_value;
    report.levels.reserve(pyramid.levels.size());
    for (const PyramidLevel& lvl : pyramid.levels) {
        LevelReport lr;
        lr.counts = confusion_matrix(lvl.coarse, lvl.level);
        lr.measures = derived_measures(lr.counts);
        report.levels.push_back(std::move(lr));
    }
    report.histogram = switch_histogram(cube);
    report.adjusted = adjusted_disagreement(cube, config.mapping, config.theta);
    return report;
}

namespace detail {

inline nlohmann::json json_optional(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

inline nlohmann::json json_mapping(const ProbabilityMapping& mapping) {
    nlohmann::json j;
    switch (mapping.kind()) {
        case ProbabilityMapping::Kind::Linear: j["kind"] = "linear"; break;
        case ProbabilityMapping::Kind::Rank: j["kind"] = "rank"; break;
        case ProbabilityMapping::Kind::Table: {
            j["kind"] = "table";
            nlohmann::json tbl;
            for (const auto& [level, p] : mapping.level_table())
                tbl[std::to_string(level)] = p;
            tbl["never"] = mapping.never_value();
            j["table"] = tbl;
            break;
        }
    }
    return j;
}

inline nlohmann::json json_histogram_family(const std::vector<std::uint64_t>& counts) {
    nlohmann::json j;
    j["never"] = counts[0];
    for (std::size_t s = 1; s < counts.size(); ++s) j[std::to_string(s)] = counts[s];
    return j;
}

}  // namespace detail

inline std::string report_to_json(const ComparisonReport& report) {
    nlohmann::json j;

    nlohmann::json cfg;
    cfg["levels"] = report.config.levels;
    cfg["threshold"] = report.config.threshold;
    cfg["theta"] = report.config.theta;
    cfg["prob_map"] = detail::json_mapping(report.config.mapping);
    nlohmann::json inputs;
    for (const ReportInput& in : report.config.inputs)
        inputs[in.role] = {{"file", in.name}, {"fnv1a64", in.digest}};
    cfg["inputs"] = inputs;
    j["config"] = cfg;

    j["legend"] = {
        {"class", {{"TP", 1}, {"TN", 2}, {"FP", 3}, {"FN", 4}, {"NODATA", report.nodata_value}}},
        {"family", {{"FP", 3}, {"FN", 4}, {"NONE", 0}, {"NODATA", report.nodata_value}}},
    };

    nlohmann::json levels = nlohmann::json::array();
    for (const LevelReport& lr : report.levels) {
        nlohmann::json lvl;
        lvl["level"] = lr.counts.level;
        lvl["cellsize"] = lr.counts.cellsize;
        lvl["tp"] = lr.counts.tp;
        lvl["tn"] = lr.counts.tn;
        lvl["fp"] = lr.counts.fp;
        lvl["fn"] = lr.counts.fn;
        lvl["nodata"] = lr.counts.nodata;
        lvl["percent_correct"] = detail::json_optional(lr.measures.percent_correct);
        lvl["omission_rate"] = detail::json_optional(lr.measures.omission_rate);
        lvl["commission_rate"] = detail::json_optional(lr.measures.commission_rate);
        lvl["f_measure"] = detail::json_optional(lr.measures.f_measure);
        levels.push_back(lvl);
    }
    j["levels"] = levels;

    j["histogram"] = {
        {"fp", detail::json_histogram_family(report.histogram.fp)},
        {"fn", detail::json_histogram_family(report.histogram.fn)},
    };

    nlohmann::json adj;
    adj["theta"] = report.adjusted.theta;
    adj["offset_induced_fp"] = report.adjusted.offset_fp;
    adj["offset_induced_fn"] = report.adjusted.offset_fn;
    adj["true_fp"] = report.adjusted.true_fp;
    adj["true_fn"] = report.adjusted.true_fn;
    adj["offset_induced"] = report.adjusted.offset_total();
    adj["true_disagreement"] = report.adjusted.true_total();
    adj["unadjusted_percent_correct"] = detail::json_optional(report.adjusted.unadjusted_percent_correct);
    adj["adjusted_percent_correct"] = detail::json_optional(report.adjusted.adjusted_percent_correct);
    j["adjusted"] = adj;

    return j.dump(2) + "\n";
}

inline std::string report_to_csv(const ComparisonReport& report) {
    std::string csv =
        "level,cellsize,tp,tn,fp,fn,nodata,percent_correct,omission_rate,commission_rate,f_measure\n";
    auto field = [&](const std::optional<double>& v) {
        if (v) detail::append_double(csv, *v);
    };
    for (const LevelReport& lr : report.levels) {
        csv += std::to_string(lr.counts.level);
        csv += ',';
        detail::append_double(csv, lr.counts.cellsize);
        csv += ',';
        csv += std::to_string(lr.counts.tp);
        csv += ',';
        csv += std::to_string(lr.counts.tn);
        csv += ',';
        csv += std::to_string(lr.counts.fp);
        csv += ',';
        csv += std::to_string(lr.counts.fn);
        csv += ',';
        csv += std::to_string(lr.counts.nodata);
        csv += ',';
        field(lr.measures.percent_correct);
        csv += ',';
        field(lr.measures.omission_rate);
        csv += ',';
        field(lr.measures.commission_rate);
        csv += ',';
        field(lr.measures.f_measure);
        csv += '\n';
    }
    return csv;
}

}  // namespace crosscale
