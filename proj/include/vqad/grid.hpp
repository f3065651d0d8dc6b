#pragma once

// Multiresolution occupancy-masked vertex grids.
//
// Level l has R_l = R_0 * 2^l cells per axis over [-1, 1]^d. Only corner
// vertices of occupied cells get a storage row; rows are numbered in
// lexicographic lattice order (x fastest), so a layout is fully determined by
// its occupancy bitmap.

#include "vqad/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vqad {

struct GridConfig {
    int dims = 2;             // 2 or 3
    int levels = 4;
    int base_resolution = 8;  // cells per axis at level 0
    int feature_width = 8;

    int resolution(int level) const { return base_resolution << level; }

    void validate() const {
        if (dims != 2 && dims != 3) throw FormatError("grid: dims must be 2 or 3");
        if (levels < 1) throw FormatError("grid: levels must be >= 1");
        if (feature_width < 1) throw FormatError("grid: feature width must be >= 1");
        if (base_resolution < 1) throw FormatError("grid: base resolution must be >= 1");
        // vertex lattice of the finest level must be addressable with 32-bit rows
        const double finest = static_cast<double>(base_resolution) * std::ldexp(1.0, levels - 1);
        if (finest > 65535.0 || std::pow(finest + 1.0, dims) > 2.0e9) {
            throw FormatError("grid: resolution overflow");
        }
    }
};

/// Axis-aligned cell extent in normalized [-1, 1]^d coordinates.
struct CellBounds {
    std::array<double, 3> lo{};
    std::array<double, 3> hi{};
};

/// Decides whether a finest-level cell is occupied.
using OccupancyPredicate = std::function<bool(const CellBounds&, int dims)>;

namespace occupancy {

inline OccupancyPredicate dense() {
    return [](const CellBounds&, int) { return true; };
}

/// Cells intersecting the box [lo, hi].
inline OccupancyPredicate box(std::array<double, 3> lo, std::array<double, 3> hi) {
    return [lo, hi](const CellBounds& c, int dims) {
        for (int a = 0; a < dims; ++a) {
            if (c.hi[a] < lo[a] || c.lo[a] > hi[a]) return false;
        }
        return true;
    };
}

/// Cells intersecting the closed ball.
inline OccupancyPredicate sphere(std::array<double, 3> center, double radius) {
    return [center, radius](const CellBounds& c, int dims) {
        double dist2 = 0;
        for (int a = 0; a < dims; ++a) {
            const double q = std::clamp(center[a], c.lo[a], c.hi[a]) - center[a];
            dist2 += q * q;
        }
        return dist2 <= radius * radius;
    };
}

/// Cells containing at least one of the points (e.g. back-projected depth).
inline OccupancyPredicate points(std::vector<std::array<double, 3>> pts) {
    return [pts = std::move(pts)](const CellBounds& c, int dims) {
        for (const auto& p : pts) {
            bool inside = true;
            for (int a = 0; a < dims && inside; ++a) inside = p[a] >= c.lo[a] && p[a] <= c.hi[a];
            if (inside) return true;
        }
        return false;
    };
}

}  // namespace occupancy

/// Cell mask and vertex layout of one level.
struct LevelLayout {
    int dims = 2;
    int resolution = 0;
    std::vector<std::uint8_t> occupied;   // one flag per cell, x fastest
    std::vector<std::int32_t> vertex_row; // per lattice vertex, -1 when unstored
    std::uint32_t rows = 0;

    std::size_t cell_count() const { return occupied.size(); }
    std::size_t occupied_count() const {
        return static_cast<std::size_t>(std::count(occupied.begin(), occupied.end(), std::uint8_t{1}));
    }

    std::size_t cell_index(std::array<int, 3> c) const {
        std::size_t idx = 0;
        for (int a = dims; a-- > 0;) idx = idx * resolution + c[a];
        return idx;
    }

    std::size_t vertex_index(std::array<int, 3> v) const {
        std::size_t idx = 0;
        for (int a = dims; a-- > 0;) idx = idx * (resolution + 1) + v[a];
        return idx;
    }

    std::array<int, 3> cell_coord(std::size_t idx) const {
        std::array<int, 3> c{0, 0, 0};
        for (int a = 0; a < dims; ++a) {
            c[a] = static_cast<int>(idx % resolution);
            idx /= resolution;
        }
        return c;
    }

    /// Assigns rows to every corner of every occupied cell.
    void assign_rows() {
        std::size_t vertices = 1;
        for (int a = 0; a < dims; ++a) vertices *= static_cast<std::size_t>(resolution + 1);
        std::vector<std::uint8_t> used(vertices, 0);
        const int corners = 1 << dims;
        for (std::size_t ci = 0; ci < occupied.size(); ++ci) {
            if (!occupied[ci]) continue;
            const auto c = cell_coord(ci);
            for (int k = 0; k < corners; ++k) {
                std::array<int, 3> v = c;
                for (int a = 0; a < dims; ++a) v[a] += (k >> a) & 1;
                used[vertex_index(v)] = 1;
            }
        }
        vertex_row.assign(vertices, -1);
        rows = 0;
        for (std::size_t vi = 0; vi < vertices; ++vi) {
            if (used[vi]) vertex_row[vi] = static_cast<std::int32_t>(rows++);
        }
    }

    static LevelLayout from_mask(int dims, int resolution, std::vector<std::uint8_t> mask) {
        LevelLayout layout;
        layout.dims = dims;
        layout.resolution = resolution;
        layout.occupied = std::move(mask);
        layout.assign_rows();
        return layout;
    }
};

/// Corner rows and d-linear weights of the cell containing a point.
struct CellSample {
    int corners = 0;
    std::array<std::uint32_t, 8> rows{};
    std::array<double, 8> weights{};
};

/// Builds the per-level layouts: finest-level cells come from the predicate,
/// coarser levels are the parent closure of the level below.
inline std::vector<LevelLayout> build_layouts(const GridConfig& config, const OccupancyPredicate& predicate) {
    config.validate();
    const int d = config.dims;
    std::vector<LevelLayout> layouts(config.levels);

    const int finest = config.levels - 1;
    const int rf = config.resolution(finest);
    std::size_t cells = 1;
    for (int a = 0; a < d; ++a) cells *= static_cast<std::size_t>(rf);
    std::vector<std::uint8_t> mask(cells, 0);
    {
        LevelLayout probe;
        probe.dims = d;
        probe.resolution = rf;
        const double h = 2.0 / rf;
        for (std::size_t ci = 0; ci < cells; ++ci) {
            const auto c = probe.cell_coord(ci);
            CellBounds b;
            for (int a = 0; a < d; ++a) {
                b.lo[a] = -1.0 + c[a] * h;
                b.hi[a] = -1.0 + (c[a] + 1) * h;
            }
            mask[ci] = predicate(b, d) ? 1 : 0;
        }
    }
    if (std::find(mask.begin(), mask.end(), std::uint8_t{1}) == mask.end()) {
        throw FormatError("grid: empty occupancy");
    }
    layouts[finest] = LevelLayout::from_mask(d, rf, std::move(mask));

    for (int l = finest; l-- > 0;) {
        const LevelLayout& child = layouts[l + 1];
        const int r = config.resolution(l);
        std::size_t n = 1;
        for (int a = 0; a < d; ++a) n *= static_cast<std::size_t>(r);
        LevelLayout parent;
        parent.dims = d;
        parent.resolution = r;
        parent.occupied.assign(n, 0);
        for (std::size_t ci = 0; ci < child.occupied.size(); ++ci) {
            if (!child.occupied[ci]) continue;
            auto c = child.cell_coord(ci);
            for (int a = 0; a < d; ++a) c[a] /= 2;
            parent.occupied[parent.cell_index(c)] = 1;
        }
        parent.assign_rows();
        layouts[l] = std::move(parent);
    }
    return layouts;
}

/// Locates `x` at one level. Returns nothing when the containing cell is
/// unoccupied. Points on the upper boundary belong to the last cell.
inline std::optional<CellSample> locate(const LevelLayout& layout, std::span<const double> x) {
    const int d = layout.dims;
    const int r = layout.resolution;
    std::array<int, 3> cell{0, 0, 0};
    std::array<double, 3> t{0, 0, 0};
    for (int a = 0; a < d; ++a) {
        const double u = (x[a] + 1.0) * 0.5 * r;
        if (!(u >= 0.0 && u <= r)) return std::nullopt;
        int c = static_cast<int>(std::floor(u));
        if (c >= r) c = r - 1;
        cell[a] = c;
        t[a] = u - c;
    }
    if (!layout.occupied[layout.cell_index(cell)]) return std::nullopt;

    CellSample s;
    s.corners = 1 << d;
    for (int k = 0; k < s.corners; ++k) {
        std::array<int, 3> v = cell;
        double w = 1.0;
        for (int a = 0; a < d; ++a) {
            const int bit = (k >> a) & 1;
            v[a] += bit;
            w *= bit ? t[a] : 1.0 - t[a];
        }
        s.rows[k] = static_cast<std::uint32_t>(layout.vertex_row[layout.vertex_index(v)]);
        s.weights[k] = w;
    }
    return s;
}

/// True when `x` lies in an occupied level-0 cell.
inline bool in_domain(const std::vector<LevelLayout>& layouts, std::span<const double> x) {
    return !layouts.empty() && locate(layouts.front(), x).has_value();
}

}  // namespace vqad
