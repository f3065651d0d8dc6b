#pragma once

#include "vqad/diffcore.hpp"
#include "vqad/error.hpp"
#include "vqad/grid.hpp"
#include "vqad/vq.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace vqad {

/// What each level row holds. All levels of a pyramid share one kind.
enum class StorageKind : std::uint8_t {
    Raw,      // feature rows Z (m x k)
    SoftVQ,   // logits C (m x 2^b) and codebook D (2^b x k)
    BakedVQ,  // indices V (m) and codebook D
};

enum class GridInit { Zero, Normal };

template <class S>
struct LevelStorage {
    std::vector<S> features;
    std::vector<S> logits;
    std::vector<std::uint16_t> indices;
    std::vector<S> codebook;
};

/// Levels of occupancy-masked vertex rows whose interpolated features are
/// summed coarse to fine.
template <class S>
struct FeatureGridPyramid {
    GridConfig config;
    StorageKind kind = StorageKind::Raw;
    int bitwidth = 0;  // 0 for raw storage
    std::vector<LevelLayout> layouts;
    std::vector<LevelStorage<S>> levels;

    int level_count() const { return static_cast<int>(layouts.size()); }
    std::size_t codebook_rows() const { return std::size_t{1} << bitwidth; }
    std::size_t width() const { return static_cast<std::size_t>(config.feature_width); }

    std::uint32_t vertex_count(int level) const { return layouts.at(level).rows; }

    std::size_t total_vertices() const {
        std::size_t m = 0;
        for (const auto& l : layouts) m += l.rows;
        return m;
    }

    /// The feature row stored (or resolved through the codebook) for a vertex.
    std::span<const S> row_feature(int level, std::uint32_t row) const {
        const auto& st = levels[level];
        const std::size_t k = width();
        switch (kind) {
        case StorageKind::Raw:
            return std::span<const S>(st.features).subspan(row * k, k);
        case StorageKind::SoftVQ: {
            const std::size_t w = codebook_rows();
            const auto idx = vq::argmax(std::span<const S>(st.logits).subspan(row * w, w));
            return vq::hard_features<S>(idx, st.codebook, k);
        }
        case StorageKind::BakedVQ:
            return vq::hard_features<S>(st.indices[row], st.codebook, k);
        }
        return {};
    }

    /// Sum over levels 0..lod of the d-linear blend of the surrounding corner
    /// rows. Levels whose containing cell is unoccupied contribute zero.
    std::vector<S> interpolate(std::span<const double> x, int lod) const {
        if (lod < 0 || lod >= level_count()) throw std::out_of_range("interpolate: lod out of range");
        // Accumulation order mirrors record_interpolate so both paths agree
        // bit for bit.
        std::vector<S> out(width(), S(0));
        std::vector<S> blend(width());
        for (int l = 0; l <= lod; ++l) {
            const auto cell = locate(layouts[l], x);
            if (!cell) {
                if (l == 0) throw OutsideDomain("interpolate: point outside level-0 occupancy");
                continue;
            }
            std::fill(blend.begin(), blend.end(), S(0));
            for (int c = 0; c < cell->corners; ++c) {
                const S w = static_cast<S>(cell->weights[c]);
                const auto f = row_feature(l, cell->rows[c]);
                for (std::size_t i = 0; i < blend.size(); ++i) blend[i] += w * f[i];
            }
            if (l == 0) {
                out = blend;
            } else {
                for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] + blend[i];
            }
        }
        return out;
    }

    /// Replaces soft logits with their row-wise argmax.
    void bake() {
        if (kind != StorageKind::SoftVQ) throw FormatError("bake: pyramid holds no soft indices");
        for (auto& st : levels) {
            st.indices = vq::bake<S>(st.logits, codebook_rows());
            st.logits.clear();
            st.logits.shrink_to_fit();
        }
        kind = StorageKind::BakedVQ;
    }

    /// Drops every level at or above `count`.
    void keep_levels(int count) {
        layouts.resize(count);
        levels.resize(count);
        config.levels = count;
    }

    /// Every learnable array, in a fixed order, paired with its name.
    template <class F>
    void for_each_block(F&& f) {
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const std::string p = "level" + std::to_string(l) + ".";
            auto& st = levels[l];
            if (!st.features.empty()) f(p + "features", st.features);
            if (!st.logits.empty()) f(p + "logits", st.logits);
            if (!st.codebook.empty()) f(p + "codebook", st.codebook);
        }
    }

    void validate() const {
        config.validate();
        if (layouts.size() != levels.size() || static_cast<int>(layouts.size()) != config.levels) {
            throw FormatError("pyramid: level count mismatch");
        }
        const std::size_t k = width();
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const auto& st = levels[l];
            const std::size_t m = layouts[l].rows;
            bool ok = true;
            switch (kind) {
            case StorageKind::Raw:
                ok = st.features.size() == m * k;
                break;
            case StorageKind::SoftVQ:
                ok = st.logits.size() == m * codebook_rows() && st.codebook.size() == codebook_rows() * k;
                break;
            case StorageKind::BakedVQ:
                ok = st.indices.size() == m && st.codebook.size() == codebook_rows() * k;
                for (auto v : st.indices) ok = ok && v < codebook_rows();
                break;
            }
            if (!ok) throw FormatError("pyramid: storage shape mismatch at level " + std::to_string(l));
        }
    }
};

/// Allocates storage of the given kind over freshly built layouts. Normal
/// init draws every entry from N(0, 0.01^2); baked indices are uniform.
template <class S>
FeatureGridPyramid<S> build_pyramid(const GridConfig& config, const OccupancyPredicate& occupancy,
                                    StorageKind kind, int bitwidth, GridInit init, std::uint64_t seed) {
    FeatureGridPyramid<S> p;
    p.config = config;
    p.kind = kind;
    p.bitwidth = kind == StorageKind::Raw ? 0 : bitwidth;
    if (kind != StorageKind::Raw) VQConfig{bitwidth, config.feature_width, config.levels}.validate();
    p.layouts = build_layouts(config, occupancy);
    p.levels.resize(config.levels);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.01);
    auto fill = [&](std::vector<S>& v, std::size_t n) {
        v.resize(n);
        for (auto& e : v) e = init == GridInit::Normal ? static_cast<S>(normal(rng)) : S(0);
    };
    const std::size_t k = p.width();
    for (int l = 0; l < config.levels; ++l) {
        auto& st = p.levels[l];
        const std::size_t m = p.layouts[l].rows;
        switch (kind) {
        case StorageKind::Raw:
            fill(st.features, m * k);
            break;
        case StorageKind::SoftVQ:
            fill(st.codebook, p.codebook_rows() * k);
            fill(st.logits, m * p.codebook_rows());
            break;
        case StorageKind::BakedVQ: {
            fill(st.codebook, p.codebook_rows() * k);
            std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(p.codebook_rows() - 1));
            st.indices.resize(m);
            for (auto& v : st.indices) v = static_cast<std::uint16_t>(pick(rng));
            break;
        }
        }
    }
    return p;
}

/// Gradient buffers shaped like a pyramid's learnable arrays.
template <class S>
std::vector<LevelStorage<S>> zero_like(const FeatureGridPyramid<S>& p) {
    std::vector<LevelStorage<S>> g(p.levels.size());
    for (std::size_t l = 0; l < g.size(); ++l) {
        g[l].features.assign(p.levels[l].features.size(), S(0));
        g[l].logits.assign(p.levels[l].logits.size(), S(0));
        g[l].codebook.assign(p.levels[l].codebook.size(), S(0));
    }
    return g;
}

/// Records interpolate() on a tape. `grads` may be null for a forward-only
/// tape. Returns a k-wide node.
template <class S>
diff::NodeId record_interpolate(diff::Tape<S>& tape, const FeatureGridPyramid<S>& p,
                                std::vector<LevelStorage<S>>* grads, std::span<const double> x, int lod,
                                vq::LookupPath path) {
    if (lod < 0 || lod >= p.level_count()) throw std::out_of_range("interpolate: lod out of range");
    const std::size_t k = p.width();
    auto leaf = [&](const std::vector<S>& value, std::vector<S>* grad) {
        return tape.param(value, grad ? std::span<S>(*grad) : std::span<S>());
    };

    std::optional<diff::NodeId> total;
    for (int l = 0; l <= lod; ++l) {
        const auto cell = locate(p.layouts[l], x);
        if (!cell) {
            if (l == 0) throw OutsideDomain("interpolate: point outside level-0 occupancy");
            continue;
        }
        const auto& st = p.levels[l];
        auto* g = grads ? &(*grads)[l] : nullptr;
        const std::span<const std::uint32_t> corner_rows(cell->rows.data(), cell->corners);

        diff::NodeId corners = 0;
        switch (p.kind) {
        case StorageKind::Raw:
            corners = tape.gather_rows(leaf(st.features, g ? &g->features : nullptr), k, corner_rows);
            break;
        case StorageKind::SoftVQ:
            corners = vq::record_lookup(tape, leaf(st.logits, g ? &g->logits : nullptr),
                                        leaf(st.codebook, g ? &g->codebook : nullptr), corner_rows,
                                        p.codebook_rows(), k, path);
            break;
        case StorageKind::BakedVQ: {
            std::array<std::uint32_t, 8> idx{};
            for (int c = 0; c < cell->corners; ++c) idx[c] = st.indices[cell->rows[c]];
            corners = tape.gather_rows(leaf(st.codebook, g ? &g->codebook : nullptr), k,
                                       std::span<const std::uint32_t>(idx.data(), cell->corners));
            break;
        }
        }
        std::array<S, 8> w{};
        for (int c = 0; c < cell->corners; ++c) w[c] = static_cast<S>(cell->weights[c]);
        const diff::NodeId weights = tape.constant(std::span<const S>(w.data(), cell->corners));
        const diff::NodeId blended = tape.matmul(weights, corners, 1, cell->corners, k);
        total = total ? tape.add(*total, blended) : blended;
    }
    return *total;
}

}  // namespace vqad
