#pragma once

// Synthetic scene construction: place displaced cell pairs (and unpaired
// singles) on a lattice so that every disagreement pixel has a switch level
// known in closed form, independent of the aggregation pipeline. The answer
// key is only valid for isolated entries, no two entries touching the same
// top-level block: isolation makes each pair's fate depend purely on when
// its two cells merge into one block.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "crosscale/grid.hpp"
#include "crosscale/resample.hpp"

namespace crosscale {

struct CellRef {
    std::int64_t row = 0;
    std::int64_t col = 0;

    friend bool operator==(const CellRef&, const CellRef&) = default;
};

/// A test-grid cell and the displaced reference cell it corresponds to.
struct ScenePair {
    CellRef test;
    CellRef ref;
};

struct RandomSceneParams {
    std::int64_t pairs = 0;
    std::int64_t unpaired_test = 0;
    std::int64_t unpaired_ref = 0;
    std::int64_t max_offset = 0;  // 0 means 2^levels, spanning the whole scale range
};

struct SceneSpec {
    GridHeader header;
    int levels = 0;  // 0 = not yet specified; validate_scene requires [1,30]
    std::vector<ScenePair> pairs;
    std::vector<CellRef> unpaired_test;
    std::vector<CellRef> unpaired_ref;
    std::uint64_t seed = 0;
    std::optional<RandomSceneParams> random;
};

inline constexpr int kNeverLevel = -1;

/// Smallest level s in [1, levels] at which the two cells fall into the same
/// aggregation block, or kNeverLevel if they stay apart through the coarsest
/// level. Blocks anchor at the lower-left corner, so rows are measured from
/// the bottom edge; that matters whenever 2^s does not divide the row count.
inline int shared_block_level(CellRef a, CellRef b, int levels, std::int64_t nrows) {
    for (int s = 1; s <= levels; ++s) {
        const std::int64_t f = std::int64_t{1} << s;
        if (block_col(a.col, f) == block_col(b.col, f) &&
            block_row(a.row, nrows, f) == block_row(b.row, nrows, f))
            return s;
    }
    return kNeverLevel;
}

/// Deterministic seeded RNG with unbiased bounded draws. std::mt19937_64's
/// raw output sequence is fixed by the standard; the distribution classes
/// are not, so bounded sampling is done here by rejection.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    std::uint64_t next_below(std::uint64_t n) {
        // Reject the low (2^64 mod n) raw values; what remains covers each
        // residue class equally often.
        const std::uint64_t reject = (0 - n) % n;
        std::uint64_t v = eng_();
        while (v < reject) v = eng_();
        return v % n;
    }

    std::int64_t range(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(
                        next_below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    double unit() {  // [0, 1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

private:
    std::mt19937_64 eng_;
};

namespace detail {

inline std::pair<std::int64_t, std::int64_t> top_block(CellRef cell, int levels,
                                                       std::int64_t nrows) {
    const std::int64_t f = std::int64_t{1} << levels;
    return {block_row(cell.row, nrows, f), block_col(cell.col, f)};
}

inline std::string cell_text(CellRef c) {
    return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

}  // namespace detail

/// Finds the first breach of the isolation rule: no two entries (a pair
/// counts as one entry with two cells) may occupy the same level-`levels`
/// block. Returns a description of the clash, or nothing if the scene is
/// clean.
inline std::optional<std::string> find_isolation_violation(const SceneSpec& spec) {
    std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> owner;
    std::size_t entry = 0;
    auto claim = [&](CellRef cell) -> std::optional<std::string> {
        const auto block = detail::top_block(cell, spec.levels, spec.header.nrows);
        auto [it, inserted] = owner.emplace(block, entry);
        if (!inserted && it->second != entry)
            return "entries " + std::to_string(it->second) + " and " + std::to_string(entry) +
                   " share top-level block (" + std::to_string(block.first) + "," +
                   std::to_string(block.second) + ") at cell " + detail::cell_text(cell);
        return std::nullopt;
    };
    for (const ScenePair& p : spec.pairs) {
        if (auto v = claim(p.test)) return v;
        if (auto v = claim(p.ref)) return v;
        ++entry;
    }
    for (const CellRef& c : spec.unpaired_test) {
        if (auto v = claim(c)) return v;
        ++entry;
    }
    for (const CellRef& c : spec.unpaired_ref) {
        if (auto v = claim(c)) return v;
        ++entry;
    }
    return std::nullopt;
}

/// Bounds and level-range checks that every scene must satisfy. Collisions
/// (a cell used by several entries, or a pair with zero displacement) are
/// legal here: counts add up and a coincident pair simply yields a TP.
inline void validate_scene(const SceneSpec& spec) {
    spec.header.validate();
    if (spec.levels < 1 || spec.levels > 30)
        throw ValidationError("scene levels must be in [1,30], got " + std::to_string(spec.levels));
    auto check_cell = [&](CellRef c, const char* what) {
        if (c.row < 0 || c.row >= spec.header.nrows || c.col < 0 || c.col >= spec.header.ncols)
            throw ValidationError(std::string(what) + " cell " + detail::cell_text(c) +
                                  " is outside the " + std::to_string(spec.header.nrows) + "x" +
                                  std::to_string(spec.header.ncols) + " lattice");
    };
    for (const ScenePair& p : spec.pairs) {
        check_cell(p.test, "pair test");
        check_cell(p.ref, "pair ref");
    }
    for (const CellRef& c : spec.unpaired_test) check_cell(c, "unpaired test");
    for (const CellRef& c : spec.unpaired_ref) check_cell(c, "unpaired ref");
}

/// The stricter precondition of the expected-surface oracle: the scene must
/// additionally keep entries isolated.
inline void require_isolation(const SceneSpec& spec) {
    if (auto violation = find_isolation_violation(spec))
        throw ValidationError("isolation rule violated: " + *violation);
}

/// Draws the entries described by spec.random, honoring the isolation rule,
/// and returns the spec with explicit entries filled in. Placement is
/// deterministic for a given seed.
inline SceneSpec resolve_random(const SceneSpec& spec) {
    if (!spec.random) return spec;
    if (!spec.pairs.empty() || !spec.unpaired_test.empty() || !spec.unpaired_ref.empty())
        throw ValidationError("scene spec mixes explicit entries with a random block");
    const RandomSceneParams& params = *spec.random;
    if (params.pairs < 0 || params.unpaired_test < 0 || params.unpaired_ref < 0)
        throw ValidationError("random entry counts must be non-negative");
    if (params.max_offset < 0) throw ValidationError("max_offset must be non-negative");

    SceneSpec out = spec;
    out.random.reset();
    SeededRng rng(spec.seed);
    const std::int64_t nrows = spec.header.nrows;
    const std::int64_t ncols = spec.header.ncols;
    const std::int64_t max_offset =
        params.max_offset > 0 ? params.max_offset : std::int64_t{1} << spec.levels;

    std::map<std::pair<std::int64_t, std::int64_t>, bool> used;
    auto block_free = [&](CellRef c) {
        return !used.count(detail::top_block(c, spec.levels, nrows));
    };
    auto claim_block = [&](CellRef c) { used[detail::top_block(c, spec.levels, nrows)] = true; };

    constexpr int kMaxAttempts = 100000;
    auto draw_cell = [&]() {
        return CellRef{rng.range(0, nrows - 1), rng.range(0, ncols - 1)};
    };

    for (std::int64_t i = 0; i < params.pairs; ++i) {
        bool placed = false;
        for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
            const CellRef t = draw_cell();
            const std::int64_t dr = rng.range(-max_offset, max_offset);
            const std::int64_t dc = rng.range(-max_offset, max_offset);
            if (dr == 0 && dc == 0) continue;
            const CellRef r{t.row + dr, t.col + dc};
            if (r.row < 0 || r.row >= nrows || r.col < 0 || r.col >= ncols) continue;
            if (!block_free(t) || !block_free(r)) continue;
            claim_block(t);
            claim_block(r);
            out.pairs.push_back({t, r});
            placed = true;
        }
        if (!placed)
            throw ValidationError("could not place pair " + std::to_string(i) +
                                  " without breaking isolation; scene too dense");
    }
    auto place_singles = [&](std::int64_t count, std::vector<CellRef>& into, const char* what) {
        for (std::int64_t i = 0; i < count; ++i) {
            bool placed = false;
            for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
                const CellRef c = draw_cell();
                if (!block_free(c)) continue;
                claim_block(c);
                into.push_back(c);
                placed = true;
            }
            if (!placed)
                throw ValidationError(std::string("could not place ") + what + " " +
                                      std::to_string(i) +
                                      " without breaking isolation; scene too dense");
        }
    };
    place_singles(params.unpaired_test, out.unpaired_test, "unpaired test cell");
    place_singles(params.unpaired_ref, out.unpaired_ref, "unpaired ref cell");
    return out;
}

/// The closed-form answer key: at every disagreement cell, the level where
/// its class flips to agreement (0 when it never does); everywhere else
/// NoData. Computed from cell geometry alone. Requires isolation; a pair
/// with zero displacement contributes nothing (it is a TP, not a
/// disagreement).
inline CountGrid expected_surface(const SceneSpec& spec) {
    validate_scene(spec);
    require_isolation(spec);
    CountGrid expected(spec.header, count_nodata());
    auto mark = [&](CellRef c, double value) { expected(c.row, c.col) = value; };
    for (const ScenePair& p : spec.pairs) {
        if (p.test == p.ref) continue;
        const int s = shared_block_level(p.test, p.ref, spec.levels, spec.header.nrows);
        const double value = s == kNeverLevel ? 0.0 : static_cast<double>(s);
        mark(p.test, value);
        mark(p.ref, value);
    }
    for (const CellRef& c : spec.unpaired_test) mark(c, 0.0);
    for (const CellRef& c : spec.unpaired_ref) mark(c, 0.0);
    return expected;
}

struct SceneGrids {
    CountGrid test;
    CountGrid ref;
};

/// Materializes the count grids: 1 is added at each entry cell (collisions
/// accumulate), all other cells are 0. Entries need not be isolated; the
/// isolation rule belongs to the oracle, not the scene itself.
inline SceneGrids generate_scene(const SceneSpec& spec) {
    validate_scene(spec);
    SceneGrids scene{CountGrid(spec.header, 0.0), CountGrid(spec.header, 0.0)};
    for (const ScenePair& p : spec.pairs) {
        scene.test(p.test.row, p.test.col) += 1.0;
        scene.ref(p.ref.row, p.ref.col) += 1.0;
    }
    for (const CellRef& c : spec.unpaired_test) scene.test(c.row, c.col) += 1.0;
    for (const CellRef& c : spec.unpaired_ref) scene.ref(c.row, c.col) += 1.0;
    return scene;
}

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& j, const char* key,
                                         const char* where) {
    auto it = j.find(key);
    if (it == j.end())
        throw ParseError(ParseError::Annotated{},
                         std::string("scene spec: missing '") + key + "' in " + where, 0);
    return *it;
}

inline std::int64_t spec_int(const nlohmann::json& j, const char* what) {
    if (!j.is_number_integer())
        throw ParseError(ParseError::Annotated{}, std::string("scene spec: ") + what +
                             " must be an integer", 0);
    return j.get<std::int64_t>();
}

inline double spec_double(const nlohmann::json& j, const char* what) {
    if (!j.is_number())
        throw ParseError(ParseError::Annotated{}, std::string("scene spec: ") + what +
                             " must be a number", 0);
    return j.get<double>();
}

inline CellRef spec_cell(const nlohmann::json& j, const char* what) {
    if (!j.is_array() || j.size() != 2)
        throw ParseError(ParseError::Annotated{}, std::string("scene spec: ") + what +
                             " must be [row, col]", 0);
    return CellRef{spec_int(j[0], what), spec_int(j[1], what)};
}

}  // namespace detail

/// Parses the JSON scene description:
///
///   {
///     "lattice": {"ncols": 32, "nrows": 32, "xll": 0, "yll": 0,
///                 "cellsize": 250, "nodata_value": -9999},
///     "levels": 3,
///     "pairs": [{"test": [row, col], "ref": [row, col]}, ...],
///     "unpaired_test": [[row, col], ...],
///     "unpaired_ref": [[row, col], ...],
///     "seed": 42,
///     "random": {"pairs": 10, "unpaired_test": 2, "unpaired_ref": 2,
///                "max_offset": 8}
///   }
///
/// "lattice" is required; "levels" may instead be supplied by the caller
/// after parsing (0 means unspecified). nodata_value defaults to -9999,
/// entry lists to empty, seed to 0. A "random" block may not be combined
/// with explicit entries. max_offset 0 (or absent) means 2^levels.
inline SceneSpec parse_scene_spec(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(ParseError::Annotated{}, std::string("scene spec: ") + e.what(), 0);
    }
    if (!j.is_object())
        throw ParseError(ParseError::Annotated{}, "scene spec: top level must be an object", 0);

    SceneSpec spec;
    const nlohmann::json& lattice = detail::require_key(j, "lattice", "the top-level object");
    if (!lattice.is_object())
        throw ParseError(ParseError::Annotated{}, "scene spec: 'lattice' must be an object", 0);
    spec.header.ncols = detail::spec_int(detail::require_key(lattice, "ncols", "'lattice'"), "ncols");
    spec.header.nrows = detail::spec_int(detail::require_key(lattice, "nrows", "'lattice'"), "nrows");
    spec.header.xll = detail::spec_double(detail::require_key(lattice, "xll", "'lattice'"), "xll");
    spec.header.yll = detail::spec_double(detail::require_key(lattice, "yll", "'lattice'"), "yll");
    spec.header.cellsize =
        detail::spec_double(detail::require_key(lattice, "cellsize", "'lattice'"), "cellsize");
    if (auto it = lattice.find("nodata_value"); it != lattice.end())
        spec.header.nodata_value = detail::spec_double(*it, "nodata_value");

    if (auto it = j.find("levels"); it != j.end())
        spec.levels = static_cast<int>(detail::spec_int(*it, "levels"));

    if (auto it = j.find("pairs"); it != j.end()) {
        if (!it->is_array())
            throw ParseError(ParseError::Annotated{}, "scene spec: 'pairs' must be an array", 0);
        for (const auto& entry : *it) {
            if (!entry.is_object())
                throw ParseError(ParseError::Annotated{},
                                 "scene spec: each pair must be an object", 0);
            ScenePair p;
            p.test = detail::spec_cell(detail::require_key(entry, "test", "a pair"), "pair test");
            p.ref = detail::spec_cell(detail::require_key(entry, "ref", "a pair"), "pair ref");
            spec.pairs.push_back(p);
        }
    }
    auto read_cells = [&](const char* key, std::vector<CellRef>& into) {
        auto it = j.find(key);
        if (it == j.end()) return;
        if (!it->is_array())
            throw ParseError(ParseError::Annotated{},
                             std::string("scene spec: '") + key + "' must be an array", 0);
        for (const auto& entry : *it) into.push_back(detail::spec_cell(entry, key));
    };
    read_cells("unpaired_test", spec.unpaired_test);
    read_cells("unpaired_ref", spec.unpaired_ref);

    if (auto it = j.find("seed"); it != j.end())
        spec.seed = static_cast<std::uint64_t>(detail::spec_int(*it, "seed"));

    if (auto it = j.find("random"); it != j.end()) {
        if (!it->is_object())
            throw ParseError(ParseError::Annotated{}, "scene spec: 'random' must be an object", 0);
        RandomSceneParams params;
        if (auto f = it->find("pairs"); f != it->end()) params.pairs = detail::spec_int(*f, "random.pairs");
        if (auto f = it->find("unpaired_test"); f != it->end())
            params.unpaired_test = detail::spec_int(*f, "random.unpaired_test");
        if (auto f = it->find("unpaired_ref"); f != it->end())
            params.unpaired_ref = detail::spec_int(*f, "random.unpaired_ref");
        if (auto f = it->find("max_offset"); f != it->end())
            params.max_offset = detail::spec_int(*f, "random.max_offset");
        spec.random = params;
    }
    return spec;
}

/// Inverse of parse_scene_spec; a pending random block survives the trip.
inline std::string scene_spec_to_json(const SceneSpec& spec) {
    nlohmann::json j;
    j["lattice"] = {{"ncols", spec.header.ncols},   {"nrows", spec.header.nrows},
                    {"xll", spec.header.xll},       {"yll", spec.header.yll},
                    {"cellsize", spec.header.cellsize},
                    {"nodata_value", spec.header.nodata_value}};
    j["levels"] = spec.levels;
    j["seed"] = spec.seed;
    nlohmann::json pairs = nlohmann::json::array();
    for (const ScenePair& p : spec.pairs)
        pairs.push_back({{"test", {p.test.row, p.test.col}}, {"ref", {p.ref.row, p.ref.col}}});
    j["pairs"] = pairs;
    auto cells_json = [](const std::vector<CellRef>& cells) {
        nlohmann::json arr = nlohmann::json::array();
        for (const CellRef& c : cells) arr.push_back({c.row, c.col});
        return arr;
    };
    j["unpaired_test"] = cells_json(spec.unpaired_test);
    j["unpaired_ref"] = cells_json(spec.unpaired_ref);
    if (spec.random) {
        j["random"] = {{"pairs", spec.random->pairs},
                       {"unpaired_test", spec.random->unpaired_test},
                       {"unpaired_ref", spec.random->unpaired_ref},
                       {"max_offset", spec.random->max_offset}};
    }
    return j.dump(2) + "\n";
}

}  // namespace crosscale
