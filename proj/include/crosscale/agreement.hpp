#pragma once

// Cross-scale thematic agreement: per-level confusion classification of a
// binarized test grid against a binarized reference grid, OR-aggregated
// pyramid construction, per-pixel trajectory extraction, and assignment of
// an offset-induced misclassification probability to each pixel that is
// misclassified at native resolution.
//
// Agreement is recomputed from the downsampled binary surfaces at every
// level; it is never aggregated from finer-level classes. Under OR
// aggregation a trajectory that starts FP (or FN) is a run of that class
// followed by a run of TP, so the level of the first switch to TP is well
// defined; an earlier switch means the native disagreement is more likely
// caused by a small positional offset between test and reference objects.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crosscale/concurrency.hpp"
#include "crosscale/grid.hpp"
#include "crosscale/resample.hpp"

namespace crosscale {

// Values match the integer codes used in written class surfaces.
enum class AgreementClass : std::uint8_t {
    TP = 1,
    TN = 2,
    FP = 3,
    FN = 4,
    NoData = 255,
};

using AgreementGrid = Grid<AgreementClass>;

inline const char* to_string(AgreementClass c) {
    switch (c) {
        case AgreementClass::TP: return "TP";
        case AgreementClass::TN: return "TN";
        case AgreementClass::FP: return "FP";
        case AgreementClass::FN: return "FN";
        case AgreementClass::NoData: return "NODATA";
    }
    return "?";
}

/// Classical per-cell map comparison. NoData in either input yields NoData.
inline AgreementGrid classify_agreement(const BinaryGrid& test, const BinaryGrid& ref) {
    const AlignResult align = align_check(test.header(), ref.header());
    if (!align.aligned)
        throw ValidationError("test and reference grids are not aligned: " + align.description);
    AgreementGrid out(test.header(), AgreementClass::NoData);
    parallel_chunks(test.nrows(), [&](std::int64_t rb, std::int64_t re) {
        for (std::int64_t r = rb; r < re; ++r) {
            const BinaryCell* t = test.row_data(r);
            const BinaryCell* f = ref.row_data(r);
            AgreementClass* dst = out.row_data(r);
            for (std::int64_t c = 0; c < test.ncols(); ++c) {
                if (t[c] == kBinaryNoData || f[c] == kBinaryNoData)
                    dst[c] = AgreementClass::NoData;
                else if (t[c] == 1)
                    dst[c] = f[c] == 1 ? AgreementClass::TP : AgreementClass::FP;
                else
                    dst[c] = f[c] == 1 ? AgreementClass::FN : AgreementClass::TN;
            }
        }
    });
    return out;
}

struct PyramidLevel {
    int level = 0;          // number of factor-2 aggregations applied
    AgreementGrid coarse;   // agreement at cellsize * 2^level
    AgreementGrid native;   // coarse classes replicated to native resolution
};

struct Pyramid {
    GridHeader native_header;
    std::vector<PyramidLevel> levels;  // levels[s].level == s

    int steps() const { return static_cast<int>(levels.size()) - 1; }
};

/// Builds the agreement pyramid: level 0 is the native comparison; each
/// further level downsamples both binary surfaces by 2, re-classifies, and
/// replicates the result back to native resolution. Native-resolution level
/// grids keep pixels that are NoData at level 0 as NoData so that their
/// trajectories stay uniformly NoData.
inline Pyramid build_pyramid(const BinaryGrid& test, const BinaryGrid& ref, int levels) {
    if (levels < 1) throw ValidationError("pyramid needs at least one downsampling level");
    if (levels > 30) throw ValidationError("pyramid levels limited to 30");

    Pyramid pyr;
    pyr.native_header = test.header();
    pyr.levels.reserve(static_cast<std::size_t>(levels) + 1);

    AgreementGrid level0 = classify_agreement(test, ref);
    pyr.levels.push_back({0, level0, level0});

    BinaryGrid test_s = test;
    BinaryGrid ref_s = ref;
    for (int s = 1; s <= levels; ++s) {
        test_s = or_downsample(test_s, 2);
        ref_s = or_downsample(ref_s, 2);
        AgreementGrid coarse = classify_agreement(test_s, ref_s);
        AgreementGrid native = upsample_nn(coarse, std::int64_t{1} << s, pyr.native_header);
        parallel_chunks(native.nrows(), [&](std::int64_t rb, std::int64_t re) {
            for (std::int64_t r = rb; r < re; ++r) {
                const AgreementClass* base = level0.row_data(r);
                AgreementClass* dst = native.row_data(r);
                for (std::int64_t c = 0; c < native.ncols(); ++c)
                    if (base[c] == AgreementClass::NoData) dst[c] = AgreementClass::NoData;
            }
        });
        pyr.levels.push_back({s, std::move(coarse), std::move(native)});
    }
    return pyr;
}

/// The multi-scale data cube: per native pixel, the sequence of agreement
/// classes across levels 0..L.
struct TrajectoryCube {
    GridHeader header;
    std::vector<AgreementGrid> levels;  // all at native resolution

    int steps() const { return static_cast<int>(levels.size()) - 1; }

    AgreementClass at(std::int64_t row, std::int64_t col, int level) const {
        return levels[static_cast<std::size_t>(level)](row, col);
    }

    std::vector<AgreementClass> trajectory(std::int64_t row, std::int64_t col) const {
        std::vector<AgreementClass> seq;
        seq.reserve(levels.size());
        for (const AgreementGrid& g : levels) seq.push_back(g(row, col));
        return seq;
    }
};

inline TrajectoryCube build_cube(const Pyramid& pyramid) {
    TrajectoryCube cube;
    cube.header = pyramid.native_header;
    cube.levels.reserve(pyramid.levels.size());
    for (const PyramidLevel& lvl : pyramid.levels) cube.levels.push_back(lvl.native);
    return cube;
}

/// First level at which a natively-misclassified pixel's block becomes TP.
struct SwitchResult {
    static constexpr int kNever = -1;

    AgreementClass family = AgreementClass::FP;  // FP or FN
    int level = kNever;                          // 1..L, or kNever

    bool never() const { return level == kNever; }
    bool operator==(const SwitchResult&) const = default;
};

/// Returns nullopt for pixels that are TP, TN, or NoData at native
/// resolution. Throws ContractViolation on a trajectory that OR aggregation
/// cannot produce (a pyramid bug, not a data condition).
inline std::optional<SwitchResult> switch_level(std::span<const AgreementClass> trajectory) {
    if (trajectory.empty()) throw ValidationError("empty trajectory");
    const AgreementClass family = trajectory[0];
    if (family != AgreementClass::FP && family != AgreementClass::FN) return std::nullopt;

    SwitchResult res;
    res.family = family;
    std::size_t i = 1;
    while (i < trajectory.size() && trajectory[i] == family) ++i;
    if (i < trajectory.size()) {
        res.level = static_cast<int>(i);
        for (; i < trajectory.size(); ++i)
            if (trajectory[i] != AgreementClass::TP)
                throw ContractViolation(std::string("malformed trajectory: ") + to_string(family) +
                                        " run followed by " + to_string(trajectory[i]) +
                                        " at level " + std::to_string(i));
    }
    return res;
}

/// Monotone map from switch level to the reported probability value.
/// Earlier switches always map higher; NEVER maps lowest.
class ProbabilityMapping {
public:
    enum class Kind { Linear, Rank, Table };

    // p(s) = (L + 1 - s) / (L + 1), p(NEVER) = 0.
    static ProbabilityMapping linear() { return ProbabilityMapping(Kind::Linear); }

    // Ordinal rank L + 1 - s (an integer, not a probability); NEVER -> 0.
    static ProbabilityMapping rank() { return ProbabilityMapping(Kind::Rank); }

    static ProbabilityMapping table(std::map<int, double> by_level, double never_value) {
        ProbabilityMapping m(Kind::Table);
        m.table_ = std::move(by_level);
        m.never_ = never_value;
        return m;
    }

    Kind kind() const { return kind_; }
    const std::map<int, double>& level_table() const { return table_; }
    double never_value() const { return never_; }

    /// Checks the mapping against a pyramid depth: a table must cover levels
    /// 1..L with values in [0,1] that strictly decrease, and the NEVER entry
    /// must sit strictly below the deepest level's value.
    void validate(int levels) const {
        if (kind_ != Kind::Table) return;
        double prev = 2.0;
        for (int s = 1; s <= levels; ++s) {
            auto it = table_.find(s);
            if (it == table_.end())
                throw ValidationError("probability table is missing level " + std::to_string(s));
            const double p = it->second;
            if (!(p >= 0.0 && p <= 1.0))
                throw ValidationError("probability table value for level " + std::to_string(s) +
                                      " is outside [0,1]");
            if (!(p < prev))
                throw ValidationError("probability table must strictly decrease with level (level " +
                                      std::to_string(s) + ")");
            prev = p;
        }
        if (!(never_ >= 0.0 && never_ <= 1.0))
            throw ValidationError("probability table NEVER entry is outside [0,1]");
        if (!(never_ < prev))
            throw ValidationError("probability table NEVER entry must be the strict minimum");
    }

    double value(int level_or_never, int levels) const {
        switch (kind_) {
            case Kind::Linear:
                if (level_or_never == SwitchResult::kNever) return 0.0;
                return static_cast<double>(levels + 1 - level_or_never) /
                       static_cast<double>(levels + 1);
            case Kind::Rank:
                if (level_or_never == SwitchResult::kNever) return 0.0;
                return static_cast<double>(levels + 1 - level_or_never);
            case Kind::Table:
                if (level_or_never == SwitchResult::kNever) return never_;
                return table_.at(level_or_never);
        }
        return 0.0;
    }

private:
    explicit ProbabilityMapping(Kind kind) : kind_(kind) {}

    Kind kind_;
    std::map<int, double> table_;
    double never_ = 0.0;
};

inline double offset_probability(const SwitchResult& result, int levels,
                                 const ProbabilityMapping& mapping) {
    if (!result.never() && (result.level < 1 || result.level > levels))
        throw ValidationError("switch level " + std::to_string(result.level) +
                              " outside 1.." + std::to_string(levels));
    return mapping.value(result.level, levels);
}

// Disagreement family per pixel; values match the written family surface.
enum class FamilyClass : std::uint8_t {
    None = 0,
    FP = 3,
    FN = 4,
    NoData = 255,
};

struct CompositeSurfaces {
    AgreementGrid classes;     // level-0 agreement classes
    Grid<double> probability;  // offset-induced misclassification probability
    Grid<FamilyClass> family;  // FP/FN for misclassified pixels, None otherwise
};

/// Collapses the cube into the native-resolution output surfaces:
/// probability is 0 for correctly classified pixels, NoData for NoData
/// pixels, and the mapped switch-level value for FP/FN pixels.
inline CompositeSurfaces composite_surface(const TrajectoryCube& cube,
                                           const ProbabilityMapping& mapping) {
    const int levels = cube.steps();
    mapping.validate(levels);
    CompositeSurfaces out{
        AgreementGrid(cube.header, AgreementClass::NoData),
        Grid<double>(cube.header, 0.0),
        Grid<FamilyClass>(cube.header, FamilyClass::None),
    };
    const AgreementGrid& level0 = cube.levels.front();
    parallel_chunks(cube.header.nrows, [&](std::int64_t rb, std::int64_t re) {
        std::vector<AgreementClass> seq(static_cast<std::size_t>(levels) + 1);
        for (std::int64_t r = rb; r < re; ++r) {
            const AgreementClass* base = level0.row_data(r);
            AgreementClass* cls = out.classes.row_data(r);
            double* prob = out.probability.row_data(r);
            FamilyClass* fam = out.family.row_data(r);
            for (std::int64_t c = 0; c < cube.header.ncols; ++c) {
                cls[c] = base[c];
                switch (base[c]) {
                    case AgreementClass::NoData:
                        prob[c] = count_nodata();
                        fam[c] = FamilyClass::NoData;
                        break;
                    case AgreementClass::TP:
                    case AgreementClass::TN:
                        prob[c] = 0.0;
                        fam[c] = FamilyClass::None;
                        break;
                    case AgreementClass::FP:
                    case AgreementClass::FN: {
                        for (int s = 0; s <= levels; ++s)
                            seq[static_cast<std::size_t>(s)] = cube.levels[static_cast<std::size_t>(s)](r, c);
                        const auto res = switch_level(seq);
                        prob[c] = mapping.value(res->level, levels);
                        fam[c] = base[c] == AgreementClass::FP ? FamilyClass::FP : FamilyClass::FN;
                        break;
                    }
                }
            }
        }
    });
    return out;
}

}  // namespace crosscale
