#pragma once

// Decoder MLP conditioned on interpolated grid features, plus the forward
// maps that lift it into a supervision domain: direct sampling for images
// and signed distances, emission-absorption rendering for radiance.

#include "vqad/diffcore.hpp"
#include "vqad/error.hpp"
#include "vqad/pyramid.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace vqad {

enum class TaskKind : std::uint8_t { Image = 0, Sdf = 1, Radiance = 2 };

constexpr int kViewEncodingWidth = 27;
constexpr int kViewFrequencies = 4;

inline int head_width(TaskKind task) {
    switch (task) {
    case TaskKind::Image: return 3;
    case TaskKind::Sdf: return 1;
    case TaskKind::Radiance: return 4;
    }
    return 0;
}

inline int task_dims(TaskKind task) { return task == TaskKind::Image ? 2 : 3; }

inline int mlp_input_width(TaskKind task, int k) {
    return k + (task == TaskKind::Radiance ? kViewEncodingWidth : 0);
}

/// dir, then per component sin/cos at frequencies 2^j * pi for j = 0..3.
template <class S>
std::array<S, kViewEncodingWidth> positional_encode(std::span<const double, 3> dir) {
    std::array<S, kViewEncodingWidth> out{};
    for (int c = 0; c < 3; ++c) out[c] = static_cast<S>(dir[c]);
    int at = 3;
    for (int c = 0; c < 3; ++c) {
        for (int j = 0; j < kViewFrequencies; ++j) {
            const double arg = std::ldexp(std::numbers::pi, j) * dir[c];
            out[at++] = static_cast<S>(std::sin(arg));
            out[at++] = static_cast<S>(std::cos(arg));
        }
    }
    return out;
}

/// Two affine layers with a ReLU between them. Weights are row-major
/// (out x in).
template <class S>
struct DecoderMLP {
    int input_width = 0;
    int hidden_width = 128;
    int output_width = 0;
    std::vector<S> w1, b1, w2, b2;

    static DecoderMLP make(int in, int hidden, int out, std::uint64_t seed) {
        DecoderMLP m;
        m.input_width = in;
        m.hidden_width = hidden;
        m.output_width = out;
        std::mt19937_64 rng(seed);
        auto fill = [&](std::vector<S>& v, std::size_t n, int fan_in) {
            std::uniform_real_distribution<double> u(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
            v.resize(n);
            for (auto& e : v) e = static_cast<S>(u(rng));
        };
        fill(m.w1, static_cast<std::size_t>(hidden) * in, in);
        fill(m.b1, hidden, in);
        fill(m.w2, static_cast<std::size_t>(out) * hidden, hidden);
        fill(m.b2, out, hidden);
        return m;
    }

    std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

    DecoderMLP zeros_like() const {
        DecoderMLP g = *this;
        for (auto* v : {&g.w1, &g.b1, &g.w2, &g.b2}) std::fill(v->begin(), v->end(), S(0));
        return g;
    }

    template <class F>
    void for_each_block(F&& f) {
        f(std::string("mlp.w1"), w1);
        f(std::string("mlp.b1"), b1);
        f(std::string("mlp.w2"), w2);
        f(std::string("mlp.b2"), b2);
    }
};

/// A learned field: feature pyramid, shared decoder and task head.
template <class S>
struct NeuralField {
    TaskKind task = TaskKind::Image;
    FeatureGridPyramid<S> grid;
    DecoderMLP<S> mlp;
    std::array<S, 3> background{1, 1, 1};

    int level_count() const { return grid.level_count(); }

    template <class F>
    void for_each_block(F&& f) {
        grid.for_each_block(f);
        mlp.for_each_block(f);
    }
};

template <class S>
struct FieldGrads {
    std::vector<LevelStorage<S>> grid;
    DecoderMLP<S> mlp;

    static FieldGrads like(const NeuralField<S>& field) { return {zero_like(field.grid), field.mlp.zeros_like()}; }

    void zero() {
        for (auto& st : grid) {
            for (auto* v : {&st.features, &st.logits, &st.codebook}) std::fill(v->begin(), v->end(), S(0));
        }
        for (auto* v : {&mlp.w1, &mlp.b1, &mlp.w2, &mlp.b2}) std::fill(v->begin(), v->end(), S(0));
    }

    /// Same order and names as NeuralField::for_each_block.
    template <class F>
    void for_each_block(F&& f) {
        for (std::size_t l = 0; l < grid.size(); ++l) {
            const std::string p = "level" + std::to_string(l) + ".";
            auto& st = grid[l];
            if (!st.features.empty()) f(p + "features", st.features);
            if (!st.logits.empty()) f(p + "logits", st.logits);
            if (!st.codebook.empty()) f(p + "codebook", st.codebook);
        }
        mlp.for_each_block(f);
    }
};

/// Records the decoder on top of an interpolated feature node.
template <class S>
diff::NodeId record_decoder(diff::Tape<S>& tape, const NeuralField<S>& field, FieldGrads<S>* grads,
                            diff::NodeId features, const double* dir) {
    const auto& m = field.mlp;
    auto leaf = [&](const std::vector<S>& v, std::vector<S>* g) {
        return tape.param(v, g ? std::span<S>(*g) : std::span<S>());
    };
    diff::NodeId input = features;
    if (field.task == TaskKind::Radiance) {
        if (dir == nullptr) throw std::invalid_argument("decode_point: radiance head needs a view direction");
        const auto pe = positional_encode<S>(std::span<const double, 3>(dir, 3));
        input = tape.concat(features, tape.constant(std::span<const S>(pe)));
    }
    DecoderMLP<S>* gm = grads ? &grads->mlp : nullptr;
    const diff::NodeId hidden = tape.relu(tape.affine(leaf(m.w1, gm ? &gm->w1 : nullptr), input,
                                                      leaf(m.b1, gm ? &gm->b1 : nullptr)));
    const diff::NodeId out = tape.affine(leaf(m.w2, gm ? &gm->w2 : nullptr), hidden,
                                         leaf(m.b2, gm ? &gm->b2 : nullptr));
    switch (field.task) {
    case TaskKind::Image:
        return tape.sigmoid(out);
    case TaskKind::Sdf:
        return out;
    case TaskKind::Radiance:
        return tape.concat(tape.relu(tape.slice(out, 0, 1)), tape.sigmoid(tape.slice(out, 1, 3)));
    }
    return out;
}

/// Records decode_point. `dir` is required for the radiance head only.
template <class S>
diff::NodeId record_decode(diff::Tape<S>& tape, const NeuralField<S>& field, FieldGrads<S>* grads,
                           std::span<const double> x, const double* dir, int lod, vq::LookupPath path) {
    const diff::NodeId features =
        record_interpolate(tape, field.grid, grads ? &grads->grid : nullptr, x, lod, path);
    return record_decoder(tape, field, grads, features, dir);
}

template <class S>
std::vector<S> decode_point(const NeuralField<S>& field, std::span<const double> x, const double* dir, int lod) {
    diff::Tape<S> tape;
    const auto out = record_decode<S>(tape, field, nullptr, x, dir, lod, vq::LookupPath::Hard);
    const auto v = tape.value(out);
    return {v.begin(), v.end()};
}

struct Ray {
    std::array<double, 3> origin{};
    std::array<double, 3> direction{0, 0, 1};
    double near = 0.0;
    double far = 1e30;

    /// Normalizes `dir`; a zero direction is a degenerate ray.
    static Ray make(std::array<double, 3> origin, std::array<double, 3> dir, double near = 0.0,
                    double far = 1e30) {
        const double n = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
        if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("ray: degenerate direction");
        return Ray{origin, {dir[0] / n, dir[1] / n, dir[2] / n}, near, far};
    }
};

/// Sample positions along a ray and the segment length each one stands for.
struct RaySamples {
    std::vector<std::array<double, 3>> points;
    std::vector<double> deltas;
};

/// Stratified samples: `per_cell` equal bins in every occupied level-0 cell
/// the ray crosses, at bin centers or uniformly jittered when `rng` is set.
inline RaySamples march(const LevelLayout& coarse, const Ray& ray, int per_cell, std::mt19937_64* rng = nullptr) {
    const double len2 = ray.direction[0] * ray.direction[0] + ray.direction[1] * ray.direction[1] +
                        ray.direction[2] * ray.direction[2];
    if (!(len2 > 0.0)) throw std::invalid_argument("ray: degenerate direction");
    if (per_cell < 1) throw std::invalid_argument("march: samples per cell must be >= 1");
    RaySamples out;

    // clip to the [-1, 1]^3 cube
    double t0 = ray.near, t1 = ray.far;
    for (int a = 0; a < 3; ++a) {
        const double o = ray.origin[a], d = ray.direction[a];
        if (std::abs(d) < 1e-15) {
            if (o < -1.0 || o > 1.0) return out;
            continue;
        }
        double ta = (-1.0 - o) / d, tb = (1.0 - o) / d;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    if (!(t1 > t0)) return out;

    // every plane crossing of the level-0 lattice inside [t0, t1]
    const int r = coarse.resolution;
    std::vector<double> cuts{t0, t1};
    for (int a = 0; a < 3; ++a) {
        const double d = ray.direction[a];
        if (std::abs(d) < 1e-15) continue;
        for (int i = 0; i <= r; ++i) {
            const double t = (-1.0 + 2.0 * i / r - ray.origin[a]) / d;
            if (t > t0 && t < t1) cuts.push_back(t);
        }
    }
    std::sort(cuts.begin(), cuts.end());

    std::uniform_real_distribution<double> jitter(0.0, 1.0);
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
        const double a = cuts[s], b = cuts[s + 1];
        if (b - a < 1e-9) continue;
        const double mid = 0.5 * (a + b);
        const std::array<double, 3> pm{ray.origin[0] + mid * ray.direction[0],
                                       ray.origin[1] + mid * ray.direction[1],
                                       ray.origin[2] + mid * ray.direction[2]};
        if (!locate(coarse, pm)) continue;
        const double bin = (b - a) / per_cell;
        for (int i = 0; i < per_cell; ++i) {
            const double u = rng ? jitter(*rng) : 0.5;
            // keep samples strictly inside the cell
            const double t = a + bin * (i + std::clamp(u, 1e-6, 1.0 - 1e-6));
            out.points.push_back({ray.origin[0] + t * ray.direction[0], ray.origin[1] + t * ray.direction[1],
                                  ray.origin[2] + t * ray.direction[2]});
            out.deltas.push_back(bin);
        }
    }
    return out;
}

template <class S>
struct CompositeWeights {
    std::vector<S> weights;
    S transmittance = 1;  // remaining after the last sample
};

/// alpha_i = 1 - exp(-density_i delta_i), weight_i = alpha_i prod_{j<i}(1 - alpha_j).
template <class S>
CompositeWeights<S> composite_weights(std::span<const S> density, std::span<const S> deltas) {
    CompositeWeights<S> out;
    out.weights.resize(density.size());
    for (std::size_t i = 0; i < density.size(); ++i) {
        const S alpha = S(1) - std::exp(-density[i] * deltas[i]);
        out.weights[i] = alpha * out.transmittance;
        out.transmittance *= S(1) - alpha;
    }
    return out;
}

/// Records a rendered ray: a 4-wide node (r, g, b, opacity).
template <class S>
diff::NodeId record_render(diff::Tape<S>& tape, const NeuralField<S>& field, FieldGrads<S>* grads,
                           const Ray& ray, int lod, int per_cell, std::mt19937_64* rng, vq::LookupPath path) {
    if (field.task != TaskKind::Radiance) throw std::invalid_argument("render_ray: field has no radiance head");
    const RaySamples samples = march(field.grid.layouts.front(), ray, per_cell, rng);
    if (samples.points.empty()) {
        const S empty[4] = {field.background[0], field.background[1], field.background[2], S(0)};
        return tape.constant(std::span<const S>(empty, 4));
    }
    std::vector<diff::NodeId> density, rgb;
    density.reserve(samples.points.size());
    rgb.reserve(samples.points.size());
    for (const auto& p : samples.points) {
        const diff::NodeId out = record_decode(tape, field, grads, p, ray.direction.data(), lod, path);
        density.push_back(tape.slice(out, 0, 1));
        rgb.push_back(tape.slice(out, 1, 3));
    }
    std::vector<S> deltas(samples.deltas.begin(), samples.deltas.end());
    return tape.composite(tape.concat(density), tape.concat(rgb), deltas, std::span<const S, 3>(field.background));
}

template <class S>
struct RayColor {
    std::array<S, 3> rgb{};
    S opacity = 0;
};

template <class S>
RayColor<S> render_ray(const NeuralField<S>& field, const Ray& ray, int lod, int per_cell) {
    diff::Tape<S> tape;
    const auto v = tape.value(record_render<S>(tape, field, nullptr, ray, lod, per_cell, nullptr, vq::LookupPath::Hard));
    return RayColor<S>{{v[0], v[1], v[2]}, v[3]};
}

}  // namespace vqad
