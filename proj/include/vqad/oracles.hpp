#pragma once

// Finite-difference oracle suite: every tape primitive, the straight-through
// lookup, grid interpolation, point decoding and ray rendering, each checked
// in double precision over a range of random seeds.

#include "vqad/diffcore.hpp"
#include "vqad/field.hpp"
#include "vqad/pyramid.hpp"
#include "vqad/vq.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace vqad::oracles {

using diff::NodeId;
using diff::Tape;
using Blocks = std::vector<std::span<const double>>;
using Sinks = std::vector<std::span<double>>;

struct OracleResult {
    std::string name;
    int seeds = 0;
    double worst = 0;  // max relative error over all seeds and parameters
};

namespace detail {

inline std::vector<double> normal(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(n);
    for (auto& e : v) e = d(rng);
    return v;
}

inline std::vector<double> uniform(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& e : v) e = d(rng);
    return v;
}

// Builds a random instance for one seed: (analytic, reference, point).
struct Case {
    diff::TapeBuilder analytic;
    diff::TapeBuilder reference;  // empty: same as analytic
    std::vector<std::vector<double>> point;
};

using CaseFactory = std::function<Case(std::mt19937_64&)>;

inline OracleResult run_cases(const std::string& name, const CaseFactory& make, int seeds, std::uint64_t base) {
    OracleResult r{name, seeds, 0.0};
    for (int s = 0; s < seeds; ++s) {
        std::mt19937_64 rng(base * 1000003ull + static_cast<std::uint64_t>(s));
        Case c = make(rng);
        const auto report = c.reference ? diff::grad_check(c.analytic, c.reference, c.point)
                                        : diff::grad_check(c.analytic, c.point);
        r.worst = std::max(r.worst, report.worst());
    }
    return r;
}

// Loss with nonlinear dependence on every entry of `x`.
inline NodeId readout(Tape<double>& t, NodeId x, const std::vector<double>& w) {
    const std::size_t n = t.value(x).size();
    if (n > w.size()) throw std::invalid_argument("readout: too few weights");
    return t.sum(t.sigmoid(t.mul(x, t.constant(std::span<const double>(w).first(n)))));
}

}  // namespace detail

/// Central differences of `loss` with respect to every learnable block of a
/// double-precision field. `loss` records onto the tape; grads may be null.
using FieldLoss = std::function<NodeId(Tape<double>&, const NeuralField<double>&, FieldGrads<double>*)>;

inline diff::GradReport field_grad_check(NeuralField<double> field, const FieldLoss& loss, double eps = 1e-5) {
    diff::GradReport report;
    report.epsilon = eps;
    auto grads = FieldGrads<double>::like(field);
    {
        Tape<double> t;
        t.backward(loss(t, field, &grads));
    }
    std::vector<std::vector<double>*> gs;
    grads.for_each_block([&](const std::string&, std::vector<double>& g) { gs.push_back(&g); });
    auto eval = [&]() {
        Tape<double> t;
        const double v = t.value(loss(t, field, nullptr))[0];
        if (!std::isfinite(v)) throw std::domain_error("field_grad_check: non-finite loss");
        return v;
    };
    std::size_t b = 0;
    field.for_each_block([&](const std::string&, std::vector<double>& param) {
        const auto& g = *gs.at(b++);
        double worst = 0;
        for (std::size_t i = 0; i < param.size(); ++i) {
            const double keep = param[i];
            param[i] = keep + eps;
            const double up = eval();
            param[i] = keep - eps;
            const double down = eval();
            param[i] = keep;
            worst = std::max(worst, diff::relative_error(g[i], (up - down) / (2 * eps)));
        }
        report.max_relative_error.push_back(worst);
    });
    return report;
}

/// Small random field whose grid values are large enough to exercise the
/// decoder's nonlinearities.
inline NeuralField<double> tiny_field(TaskKind task, StorageKind kind, std::mt19937_64& rng) {
    NeuralField<double> f;
    f.task = task;
    const GridConfig g{task_dims(task), 2, 2, 3};
    const std::uint64_t seed = rng();
    f.grid = build_pyramid<double>(g, occupancy::dense(), kind, 2, GridInit::Normal, seed);
    for (auto& st : f.grid.levels) {
        for (auto* v : {&st.features, &st.logits, &st.codebook}) {
            for (auto& e : *v) e *= 60.0;
        }
    }
    f.mlp = DecoderMLP<double>::make(mlp_input_width(task, 3), 5, head_width(task), rng());
    if (task == TaskKind::Radiance) f.mlp.b2[0] = 0.5;  // keep density mostly active
    f.background = {0.9, 0.6, 0.3};
    return f;
}

/// Step for the field-level checks. Grid lookups make many gradients small
/// (products of corner weights and softmax terms), so a wider step keeps
/// round-off in the differences below the tolerance.
inline constexpr double kFieldEpsilon = 1e-4;
inline constexpr double kReluMargin = 1e-2;

inline OracleResult field_oracle(const std::string& name, TaskKind task, StorageKind kind, int seeds,
                                 std::uint64_t base,
                                 const std::function<FieldLoss(std::mt19937_64&)>& make_loss) {
    OracleResult r{name, seeds, 0.0};
    for (int s = 0; s < seeds; ++s) {
        std::mt19937_64 rng(base * 1000003ull + static_cast<std::uint64_t>(s));
        auto field = tiny_field(task, kind, rng);
        auto loss = make_loss(rng);
        // A ReLU input this close to zero puts a kink inside the difference
        // stencil; such instances are redrawn.
        for (;;) {
            Tape<double> t;
            loss(t, field, nullptr);
            if (t.relu_margin() > kReluMargin) break;
            field = tiny_field(task, kind, rng);
            loss = make_loss(rng);
        }
        r.worst = std::max(r.worst, field_grad_check(field, loss, kFieldEpsilon).worst());
    }
    return r;
}

/// Every check, `seeds` random instances each.
inline std::vector<OracleResult> run_suite(int seeds = 20) {
    using detail::Case;
    using detail::normal;
    using detail::readout;
    std::vector<OracleResult> out;
    std::uint64_t base = 1;
    auto unary = [&](const std::string& name, std::function<NodeId(Tape<double>&, NodeId)> op) {
        out.push_back(detail::run_cases(name, [op](std::mt19937_64& rng) {
            const auto w = normal(rng, 16);
            Case c;
            c.analytic = [op, w](Tape<double>& t, const Blocks& p, const Sinks& g) {
                return readout(t, op(t, t.param(p[0], g[0])), w);
            };
            c.point = {normal(rng, 6)};
            return c;
        }, seeds, base++));
    };

    out.push_back(detail::run_cases("affine", [](std::mt19937_64& rng) {
        const auto w = normal(rng, 4);
        Case c;
        c.analytic = [w](Tape<double>& t, const Blocks& p, const Sinks& g) {
            return readout(t, t.affine(t.param(p[0], g[0]), t.param(p[1], g[1]), t.param(p[2], g[2])), w);
        };
        c.point = {normal(rng, 12), normal(rng, 3), normal(rng, 4)};
        return c;
    }, seeds, base++));
    out.push_back(detail::run_cases("matmul", [](std::mt19937_64& rng) {
        const auto w = normal(rng, 8);
        Case c;
        c.analytic = [w](Tape<double>& t, const Blocks& p, const Sinks& g) {
            return readout(t, t.matmul(t.param(p[0], g[0]), t.param(p[1], g[1]), 2, 3, 4), w);
        };
        c.point = {normal(rng, 6), normal(rng, 12)};
        return c;
    }, seeds, base++));
    out.push_back(detail::run_cases("add", [](std::mt19937_64& rng) {
        const auto w = normal(rng, 5);
        Case c;
        c.analytic = [w](Tape<double>& t, const Blocks& p, const Sinks& g) {
            return readout(t, t.add(t.param(p[0], g[0]), t.param(p[1], g[1])), w);
        };
        c.point = {normal(rng, 5), normal(rng, 5)};
        return c;
    }, seeds, base++));
    out.push_back(detail::run_cases("mul", [](std::mt19937_64& rng) {
        const auto w = normal(rng, 5);
        Case c;
        c.analytic = [w](Tape<double>& t, const Blocks& p, const Sinks& g) {
            return readout(t, t.mul(t.param(p[0], g[0]), t.param(p[1], g[1])), w);
        };
        c.point = {normal(rng, 5), normal(rng, 5)};
        return c;
    }, seeds, base++));
    unary("relu", [](Tape<double>& t, NodeId x) { return t.relu(x); });
    unary("sigmoid", [](Tape<double>& t, NodeId x) { return t.sigmoid(x); });
    unary("exp", [](Tape<double>& t, NodeId x) { return t.exp(x); });
    unary("softmax_rows", [](Tape<double>& t, NodeId x) { return t.softmax_rows(x, 3); });
    unary("slice", [](Tape<double>& t, NodeId x) { return t.slice(x, 1, 4); });
    unary("concat", [](Tape<double>& t, NodeId x) {
        const NodeId parts[3] = {t.slice(x, 3, 3), x, t.slice(x, 0, 2)};
        return t.concat(std::span<const NodeId>(parts, 3));
    });
    unary("sum", [](Tape<double>& t, NodeId x) { return t.sum(t.mul(x, x)); });
    out.push_back(detail::run_cases("gather_rows", [](std::mt19937_64& rng) {
        const auto w = normal(rng, 10);
        std::vector<std::uint32_t> rows(5);
        std::uniform_int_distribution<std::uint32_t> pick(0, 3);
        for (auto& r : rows) r = pick(rng);
        Case c;
        c.analytic = [w, rows](Tape<double>& t, const Blocks& p, const Sinks& g) {
            return readout(t, t.gather_rows(t.param(p[0], g[0]), 2, rows), w);
        };
        c.point = {normal(rng, 8)};
        return c;
    }, seeds, base++));
    out.push_back(detail::run_cases("mean_squared_error", [](std::mt19937_64& rng) {
        const auto target = normal(rng, 6);
        Case c;
        c.analytic = [target](Tape<double>& t, const Blocks& p, const Sinks& g) {
            return t.mean_squared_error(t.sigmoid(t.param(p[0], g[0])), target);
        };
        c.point = {normal(rng, 6)};
        return c;
    }, seeds, base++));
    out.push_back(detail::run_cases("straight_through", [](std::mt19937_64& rng) {
        // The gradient reaching the soft input is the one a plain soft
        // forward would produce when the downstream map is linear.
        const auto w = normal(rng, 6);
        const auto hard = normal(rng, 6);
        Case c;
        c.analytic = [w, hard](Tape<double>& t, const Blocks& p, const Sinks& g) {
            const NodeId soft = t.sigmoid(t.param(p[0], g[0]));
            return t.sum(t.mul(t.straight_through(t.constant(hard), soft), t.constant(w)));
        };
        c.reference = [w](Tape<double>& t, const Blocks& p, const Sinks& g) {
            return t.sum(t.mul(t.sigmoid(t.param(p[0], g[0])), t.constant(w)));
        };
        c.point = {normal(rng, 6)};
        return c;
    }, seeds, base++));
    out.push_back(detail::run_cases("composite", [](std::mt19937_64& rng) {
        const auto deltas = detail::uniform(rng, 5, 0.05, 0.6);
        const std::array<double, 3> bg{0.3, 0.8, 0.5};
        const auto target = detail::uniform(rng, 4, 0.0, 1.0);
        Case c;
        c.analytic = [deltas, bg, target](Tape<double>& t, const Blocks& p, const Sinks& g) {
            const NodeId sigma = t.exp(t.param(p[0], g[0]));
            const NodeId rgb = t.sigmoid(t.param(p[1], g[1]));
            return t.mean_squared_error(t.composite(sigma, rgb, deltas, std::span<const double, 3>(bg)), target);
        };
        c.point = {normal(rng, 5), normal(rng, 15)};
        return c;
    }, seeds, base++));

    // Straight-through lookup: gradient w.r.t. logits and codebook equals the
    // soft path's finite differences under a linear readout.
    out.push_back(detail::run_cases("ste_lookup", [](std::mt19937_64& rng) {
        const std::size_t width = 8, k = 3;
        const auto w = normal(rng, 4 * k);
        std::vector<std::uint32_t> rows(4);
        std::uniform_int_distribution<std::uint32_t> pick(0, 5);
        for (auto& r : rows) r = pick(rng);
        auto build = [=](vq::LookupPath path) {
            return [=](Tape<double>& t, const Blocks& p, const Sinks& g) {
                const NodeId f = vq::record_lookup(t, t.param(p[0], g[0]), t.param(p[1], g[1]), rows, width, k, path);
                return t.sum(t.mul(f, t.constant(w)));
            };
        };
        Case c;
        c.analytic = build(vq::LookupPath::StraightThrough);
        c.reference = build(vq::LookupPath::Soft);
        c.point = {normal(rng, 6 * width, 2.0), normal(rng, width * k)};
        return c;
    }, seeds, base++));
    out.push_back(detail::run_cases("soft_lookup", [](std::mt19937_64& rng) {
        const std::size_t width = 4, k = 2;
        const auto w = normal(rng, 3 * k);
        const std::vector<std::uint32_t> rows{2, 0, 2};
        Case c;
        c.analytic = [=](Tape<double>& t, const Blocks& p, const Sinks& g) {
            return readout(t, vq::record_lookup(t, t.param(p[0], g[0]), t.param(p[1], g[1]), rows, width, k,
                                                vq::LookupPath::Soft), w);
        };
        c.point = {normal(rng, 3 * width, 2.0), normal(rng, width * k)};
        return c;
    }, seeds, base++));

    // Points stay away from lattice vertices (fine cell size 0.5) so no
    // corner weight is vanishingly small.
    auto random_point = [](std::mt19937_64& rng, int dims) {
        std::uniform_int_distribution<int> cell(0, 3);
        std::uniform_real_distribution<double> frac(0.15, 0.85);
        std::array<double, 3> p{};
        for (int a = 0; a < dims; ++a) p[a] = -1.0 + 0.5 * (cell(rng) + frac(rng));
        return p;
    };
    // Rays whose samples graze a cell or sit next to a lattice vertex give
    // gradients too small to difference meaningfully; those are redrawn.
    auto non_degenerate_ray = [](std::mt19937_64& rng) {
        for (;;) {
            auto dir = normal(rng, 3);
            const auto aim = detail::uniform(rng, 3, -0.4, 0.4);
            const double n = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
            const Ray ray = Ray::make({aim[0] - 2.5 * dir[0] / n, aim[1] - 2.5 * dir[1] / n, aim[2] - 2.5 * dir[2] / n},
                                      {dir[0], dir[1], dir[2]});
            const LevelLayout coarse = LevelLayout::from_mask(3, 2, std::vector<std::uint8_t>(8, 1));
            const RaySamples samples = march(coarse, ray, 2);
            bool ok = !samples.points.empty();
            for (double d : samples.deltas) ok = ok && d >= 0.05;
            for (const auto& p : samples.points) {
                for (double c : p) {
                    const double frac = (c + 1.0) * 2.0 - std::floor((c + 1.0) * 2.0);
                    ok = ok && frac > 0.03 && frac < 0.97;
                }
            }
            if (ok) return ray;
        }
    };
    for (const auto kind : {StorageKind::Raw, StorageKind::SoftVQ}) {
        const std::string suffix = kind == StorageKind::Raw ? "_raw" : "_vq";
        out.push_back(field_oracle("interpolate" + suffix, TaskKind::Sdf, kind, seeds, base++,
                                   [&](std::mt19937_64& rng) -> FieldLoss {
            const auto x = random_point(rng, 3);
            const auto w = normal(rng, 3);
            return [x, w](Tape<double>& t, const NeuralField<double>& f, FieldGrads<double>* g) {
                return readout(t, record_interpolate(t, f.grid, g ? &g->grid : nullptr, x, 1, vq::LookupPath::Soft), w);
            };
        }));
        out.push_back(field_oracle("decode_point" + suffix, TaskKind::Image, kind, seeds, base++,
                                   [&](std::mt19937_64& rng) -> FieldLoss {
            const auto x = random_point(rng, 2);
            const auto target = detail::uniform(rng, 3, 0.0, 1.0);
            return [x, target](Tape<double>& t, const NeuralField<double>& f, FieldGrads<double>* g) {
                return t.mean_squared_error(
                    record_decode(t, f, g, std::span<const double>(x.data(), 2), nullptr, 1, vq::LookupPath::Soft),
                    target);
            };
        }));
        out.push_back(field_oracle("render_ray" + suffix, TaskKind::Radiance, kind, seeds, base++,
                                   [&](std::mt19937_64& rng) -> FieldLoss {
            const Ray ray = non_degenerate_ray(rng);
            const auto target = detail::uniform(rng, 4, 0.0, 1.0);
            return [ray, target](Tape<double>& t, const NeuralField<double>& f, FieldGrads<double>* g) {
                return t.mean_squared_error(record_render(t, f, g, ray, 1, 2, nullptr, vq::LookupPath::Soft), target);
            };
        }));
    }
    return out;
}

}  // namespace vqad::oracles
