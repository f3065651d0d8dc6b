#include "vqad/field.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace vqad;
using vqad::diff::Tape;

namespace {

NeuralField<double> make_field(TaskKind task, int k, int hidden, std::uint64_t seed, int levels = 2) {
    NeuralField<double> f;
    f.task = task;
    f.grid = build_pyramid<double>({task_dims(task), levels, 2, k}, occupancy::dense(), StorageKind::Raw, 0,
                                   GridInit::Normal, seed);
    for (auto& st : f.grid.levels)
        for (auto& v : st.features) v *= 50.0;
    f.mlp = DecoderMLP<double>::make(mlp_input_width(task, k), hidden, head_width(task), seed + 1);
    return f;
}

CompositeWeights<double> weights(std::vector<double> density, std::vector<double> deltas) {
    return composite_weights<double>(density, deltas);
}

}  // namespace

TEST(Field, PositionalEncodingLayout) {
    const double zero[3] = {0, 0, 0};
    const auto pe = positional_encode<double>(std::span<const double, 3>(zero));
    EXPECT_EQ(pe.size(), 27u);
    for (int i = 3; i < 27; i += 2) {
        EXPECT_EQ(pe[i], 0.0);
        EXPECT_EQ(pe[i + 1], 1.0);
    }
    const double x[3] = {1, 0, 0};
    const auto px = positional_encode<double>(std::span<const double, 3>(x));
    EXPECT_EQ(px[0], 1.0);
    EXPECT_NEAR(px[3], 0.0, 1e-6);   // sin(pi)
    EXPECT_NEAR(px[4], -1.0, 1e-12); // cos(pi)
    EXPECT_NEAR(px[5], 0.0, 1e-6);   // sin(2 pi)
}

TEST(Field, MlpWidths) {
    EXPECT_EQ(mlp_input_width(TaskKind::Radiance, 16), 43);
    EXPECT_EQ(mlp_input_width(TaskKind::Image, 16), 16);
    EXPECT_EQ(head_width(TaskKind::Radiance), 4);
    EXPECT_EQ(head_width(TaskKind::Image), 3);
    EXPECT_EQ(head_width(TaskKind::Sdf), 1);
    const auto m = DecoderMLP<float>::make(43, 128, 4, 1);
    EXPECT_EQ(m.parameter_count() * 2, 12296u);
}

TEST(Field, ZeroModelRadianceOutput) {
    auto f = make_field(TaskKind::Radiance, 4, 8, 1);
    for (auto& st : f.grid.levels) std::fill(st.features.begin(), st.features.end(), 0.0);
    f.mlp = f.mlp.zeros_like();
    const double x[3] = {0.1, 0.2, 0.3}, dir[3] = {0, 0, 1};
    const auto out = decode_point(f, x, dir, 1);
    ASSERT_EQ(out.size(), 4u);
    EXPECT_EQ(out[0], 0.0);
    for (int c = 1; c < 4; ++c) EXPECT_EQ(out[c], 0.5);
}

TEST(Field, RadianceHeadRanges) {
    auto f = make_field(TaskKind::Radiance, 4, 8, 2);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-0.95, 0.95);
    for (int i = 0; i < 50; ++i) {
        const double x[3] = {u(rng), u(rng), u(rng)};
        const double n = std::sqrt(3.0);
        const double dir[3] = {1 / n, 1 / n, -1 / n};
        const auto out = decode_point(f, x, dir, 1);
        EXPECT_GE(out[0], 0.0);
        for (int c = 1; c < 4; ++c) {
            EXPECT_GT(out[c], 0.0);
            EXPECT_LT(out[c], 1.0);
        }
    }
}

TEST(Field, RadianceNeedsDirection) {
    auto f = make_field(TaskKind::Radiance, 4, 8, 3);
    const double x[3] = {0, 0, 0};
    EXPECT_THROW(decode_point(f, x, nullptr, 0), std::invalid_argument);
}

TEST(Field, ZeroedFinerLevelsDecodeIdentically) {
    auto f = make_field(TaskKind::Image, 4, 8, 4, 3);
    auto z = f;
    std::fill(z.grid.levels[2].features.begin(), z.grid.levels[2].features.end(), 0.0);
    const double x[2] = {0.31, -0.47};
    EXPECT_EQ(decode_point(z, x, nullptr, 2), decode_point(f, x, nullptr, 1));
}

TEST(Field, CompositingZeroDensity) {
    const auto w = weights({0, 0, 0}, {0.1, 0.1, 0.1});
    for (double v : w.weights) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(w.transmittance, 1.0);

    Tape<double> t;
    const std::vector<double> density{0, 0}, rgb{1, 0, 0, 0, 1, 0}, deltas{0.5, 0.5};
    const std::array<double, 3> bg{0.2, 0.4, 0.6};
    const auto out = t.value(t.composite(t.constant(density), t.constant(rgb), deltas, std::span<const double, 3>(bg)));
    EXPECT_EQ(out[0], 0.2);
    EXPECT_EQ(out[1], 0.4);
    EXPECT_EQ(out[2], 0.6);
    EXPECT_EQ(out[3], 0.0);
}

TEST(Field, CompositingSaturatedSample) {
    Tape<double> t;
    const std::vector<double> density{100}, rgb{0.3, 0.6, 0.9}, deltas{0.5};
    const std::array<double, 3> bg{1, 1, 1};
    const auto out = t.value(t.composite(t.constant(density), t.constant(rgb), deltas, std::span<const double, 3>(bg)));
    EXPECT_NEAR(out[0], 0.3, 1e-6);
    EXPECT_NEAR(out[1], 0.6, 1e-6);
    EXPECT_NEAR(out[2], 0.9, 1e-6);
    EXPECT_NEAR(out[3], 1.0, 1e-6);
}

TEST(Field, CompositingTwoHalfAlphas) {
    Tape<double> t;
    const double sigma = std::log(2.0);  // alpha = 1 - exp(-ln 2) = 0.5
    const std::vector<double> density{sigma, sigma}, rgb{1, 0, 0, 0, 1, 0}, deltas{1, 1};
    const std::array<double, 3> bg{0.4, 0.8, 1.0};
    const auto out = t.value(t.composite(t.constant(density), t.constant(rgb), deltas, std::span<const double, 3>(bg)));
    EXPECT_NEAR(out[0], 0.5 + 0.25 * 0.4, 1e-15);
    EXPECT_NEAR(out[1], 0.25 + 0.25 * 0.8, 1e-15);
    EXPECT_NEAR(out[2], 0.25 * 1.0, 1e-15);
    EXPECT_NEAR(out[3], 0.75, 1e-15);
}

TEST(Field, TransmittanceConservation) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(u(rng) * 40);
        std::vector<double> density(n), deltas(n);
        for (int i = 0; i < n; ++i) {
            density[i] = -std::log(u(rng) + 1e-12) * 5.0;
            deltas[i] = u(rng) * 0.2;
        }
        const auto w = weights(density, deltas);
        double s = w.transmittance;
        for (double v : w.weights) s += v;
        EXPECT_NEAR(s, 1.0, 1e-6);
    }
}

TEST(Field, MarchCoversOccupiedCells) {
    const auto layouts = build_layouts({3, 1, 2, 1}, occupancy::dense());
    const Ray ray = Ray::make({-2, 0.1, 0.2}, {1, 0, 0});
    const auto s = march(layouts[0], ray, 4);
    ASSERT_EQ(s.points.size(), 8u);  // two cells along x, four samples each
    double total = 0;
    for (double d : s.deltas) total += d;
    EXPECT_NEAR(total, 2.0, 1e-12);
    for (std::size_t i = 1; i < s.points.size(); ++i) EXPECT_GT(s.points[i][0], s.points[i - 1][0]);
}

TEST(Field, MarchSkipsUnoccupiedCells) {
    const auto layouts = build_layouts({3, 1, 2, 1}, occupancy::box({-1, -1, -1}, {-0.5, -0.5, -0.5}));
    const Ray ray = Ray::make({-2, -0.5, -0.5}, {1, 0, 0});
    const auto s = march(layouts[0], ray, 3);
    ASSERT_EQ(s.points.size(), 3u);
    for (const auto& p : s.points) EXPECT_LT(p[0], 0.0);
    const Ray miss = Ray::make({-2, 3, 0}, {1, 0, 0});
    EXPECT_TRUE(march(layouts[0], miss, 3).points.empty());
}

TEST(Field, MissingRayReturnsBackground) {
    auto f = make_field(TaskKind::Radiance, 2, 4, 5);
    f.background = {0.1, 0.2, 0.3};
    const auto c = render_ray(f, Ray::make({5, 5, 5}, {1, 0, 0}), 1, 4);
    EXPECT_EQ(c.rgb[0], 0.1);
    EXPECT_EQ(c.rgb[2], 0.3);
    EXPECT_EQ(c.opacity, 0.0);
}

TEST(Field, DegenerateRayIsError) {
    EXPECT_THROW(Ray::make({0, 0, 0}, {0, 0, 0}), std::invalid_argument);
}

TEST(Field, RenderMatchesWeightsOfDecodedSamples) {
    auto f = make_field(TaskKind::Radiance, 3, 6, 6);
    const Ray ray = Ray::make({-2, -0.3, 0.4}, {1, 0.2, -0.1});
    const auto s = march(f.grid.layouts[0], ray, 4);
    std::vector<double> density, rgb;
    for (const auto& p : s.points) {
        const auto out = decode_point(f, p, ray.direction.data(), 1);
        density.push_back(out[0]);
        rgb.insert(rgb.end(), out.begin() + 1, out.end());
    }
    const auto w = composite_weights<double>(density, s.deltas);
    std::array<double, 3> want{};
    for (std::size_t i = 0; i < w.weights.size(); ++i)
        for (int c = 0; c < 3; ++c) want[c] += w.weights[i] * rgb[i * 3 + c];
    for (int c = 0; c < 3; ++c) want[c] += w.transmittance * f.background[c];
    const auto got = render_ray(f, ray, 1, 4);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(got.rgb[c], want[c], 1e-12);
    EXPECT_NEAR(got.opacity, 1.0 - w.transmittance, 1e-12);
}
