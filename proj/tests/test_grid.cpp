#include "vqad/pyramid.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace vqad;

namespace {

FeatureGridPyramid<double> normal_pyramid(GridConfig cfg, const OccupancyPredicate& occ, std::uint64_t seed = 3) {
    return build_pyramid<double>(cfg, occ, StorageKind::Raw, 0, GridInit::Normal, seed);
}

}  // namespace

TEST(Grid, DenseVertexCounts) {
    auto p3 = normal_pyramid({3, 1, 2, 4}, occupancy::dense());
    EXPECT_EQ(p3.vertex_count(0), 27u);
    auto p2 = normal_pyramid({2, 1, 4, 4}, occupancy::dense());
    EXPECT_EQ(p2.vertex_count(0), 25u);
}

TEST(Grid, LevelResolutionsDouble) {
    GridConfig cfg{3, 4, 32, 16};
    EXPECT_EQ(cfg.resolution(0), 32);
    EXPECT_EQ(cfg.resolution(1), 64);
    EXPECT_EQ(cfg.resolution(2), 128);
    EXPECT_EQ(cfg.resolution(3), 256);
    // the layouts themselves, on a cheaper 2D grid
    auto p = normal_pyramid({2, 4, 32, 1}, occupancy::dense());
    for (int l = 0; l < 4; ++l) EXPECT_EQ(p.layouts[l].resolution, 32 << l);
}

TEST(Grid, SphereOccupancyParentClosure) {
    auto p = normal_pyramid({3, 2, 4, 2}, occupancy::sphere({0.1, -0.2, 0.05}, 0.45));
    const auto& fine = p.layouts[1];
    const auto& coarse = p.layouts[0];
    ASSERT_GT(fine.occupied_count(), 0u);
    ASSERT_LT(fine.occupied_count(), fine.cell_count());
    for (std::size_t ci = 0; ci < fine.cell_count(); ++ci) {
        if (!fine.occupied[ci]) continue;
        auto c = fine.cell_coord(ci);
        for (int a = 0; a < 3; ++a) c[a] /= 2;
        EXPECT_TRUE(coarse.occupied[coarse.cell_index(c)]);
    }
}

TEST(Grid, RowsCoverExactlyCornersOfOccupiedCells) {
    auto p = normal_pyramid({2, 1, 4, 2}, occupancy::box({-1, -1, 0}, {-0.6, -0.6, 0}));
    // one occupied cell at the corner: four vertices
    EXPECT_EQ(p.layouts[0].occupied_count(), 1u);
    EXPECT_EQ(p.vertex_count(0), 4u);
}

TEST(Grid, EmptyOccupancyAndOverflowAreErrors) {
    EXPECT_THROW(normal_pyramid({3, 2, 4, 2}, occupancy::sphere({5, 5, 5}, 0.1)), FormatError);
    EXPECT_THROW(normal_pyramid({3, 12, 64, 2}, occupancy::dense()), FormatError);
}

TEST(Grid, VertexReturnsStoredFeature) {
    auto p = normal_pyramid({3, 1, 2, 3}, occupancy::dense());
    const auto& layout = p.layouts[0];
    const std::array<int, 3> v{1, 2, 0};
    const double x[3] = {0.0, 1.0, -1.0};
    const auto row = static_cast<std::uint32_t>(layout.vertex_row[layout.vertex_index(v)]);
    const auto got = p.interpolate(x, 0);
    const auto want = p.row_feature(0, row);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(got[i], want[i]);
}

TEST(Grid, CellCenterIsCornerMean) {
    auto p = normal_pyramid({3, 1, 2, 2}, occupancy::dense());
    const double x[3] = {0.5, -0.5, 0.5};
    const auto cell = locate(p.layouts[0], x);
    ASSERT_TRUE(cell);
    std::array<double, 2> mean{0, 0};
    for (int c = 0; c < 8; ++c) {
        EXPECT_DOUBLE_EQ(cell->weights[c], 0.125);
        const auto f = p.row_feature(0, cell->rows[c]);
        for (int i = 0; i < 2; ++i) mean[i] += f[i] / 8.0;
    }
    const auto got = p.interpolate(x, 0);
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(got[i], mean[i], 1e-15);
}

TEST(Grid, UnoccupiedFineLevelContributesZero) {
    // level 1 keeps only cells near the box, so a point in the far corner
    // of an occupied level-0 cell lies in an unoccupied level-1 cell
    auto p = normal_pyramid({2, 2, 2, 4}, occupancy::box({-0.9, -0.9, 0}, {-0.8, -0.8, 0}));
    const double x[2] = {-0.1, -0.1};
    ASSERT_TRUE(locate(p.layouts[0], x));
    ASSERT_FALSE(locate(p.layouts[1], x));
    const auto a = p.interpolate(x, 0);
    const auto b = p.interpolate(x, 1);
    EXPECT_EQ(a, b);
}

TEST(Grid, OutsideDomainIsDistinctError) {
    auto p = normal_pyramid({2, 2, 2, 4}, occupancy::box({-0.9, -0.9, 0}, {-0.8, -0.8, 0}));
    const double x[2] = {0.5, 0.5};
    EXPECT_THROW(p.interpolate(x, 0), OutsideDomain);
    const double y[2] = {1.5, 0.0};
    EXPECT_THROW(p.interpolate(y, 1), OutsideDomain);
}

TEST(Grid, AffineAlongAxis) {
    auto p = normal_pyramid({3, 1, 2, 4}, occupancy::dense());
    const double a[3] = {-0.8, 0.2, 0.3}, b[3] = {-0.5, 0.2, 0.3}, c[3] = {-0.2, 0.2, 0.3};
    const auto fa = p.interpolate(a, 0), fb = p.interpolate(b, 0), fc = p.interpolate(c, 0);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(fb[i], 0.5 * (fa[i] + fc[i]), 1e-15);
}

TEST(Grid, PartitionOfUnity) {
    GridConfig cfg{3, 1, 4, 1};
    auto layouts = build_layouts(cfg, occupancy::dense());
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 200; ++i) {
        const double x[3] = {u(rng), u(rng), u(rng)};
        const auto s = locate(layouts[0], x);
        ASSERT_TRUE(s);
        double total = 0;
        for (int c = 0; c < s->corners; ++c) total += s->weights[c];
        EXPECT_NEAR(total, 1.0, 1e-14);
    }
}

TEST(Grid, ZeroedFineLevelsMatchCoarseLod) {
    auto p = normal_pyramid({3, 3, 2, 4}, occupancy::sphere({0, 0, 0}, 0.7));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    for (int keep = 0; keep < 3; ++keep) {
        auto z = p;
        for (int l = keep + 1; l < 3; ++l) std::fill(z.levels[l].features.begin(), z.levels[l].features.end(), 0.0);
        for (int i = 0; i < 20; ++i) {
            const double x[3] = {u(rng), u(rng), u(rng)};
            EXPECT_EQ(z.interpolate(x, 2), p.interpolate(x, keep));
        }
    }
}

TEST(Grid, LevelsAreSummed) {
    auto p = normal_pyramid({2, 2, 2, 3}, occupancy::dense());
    const double x[2] = {0.3, -0.7};
    const auto l0 = p.interpolate(x, 0);
    auto only1 = p;
    std::fill(only1.levels[0].features.begin(), only1.levels[0].features.end(), 0.0);
    const auto l1 = only1.interpolate(x, 1);
    const auto both = p.interpolate(x, 1);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(both[i], l0[i] + l1[i], 1e-15);
}

TEST(Grid, NormalInitScale) {
    auto p = normal_pyramid({2, 1, 64, 8}, occupancy::dense(), 9);
    double s = 0, s2 = 0;
    const auto& f = p.levels[0].features;
    for (double v : f) {
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(f.size());
    EXPECT_NEAR(s / n, 0.0, 1e-3);
    EXPECT_NEAR(std::sqrt(s2 / n), 0.01, 5e-4);
    auto zero = build_pyramid<double>({2, 1, 4, 2}, occupancy::dense(), StorageKind::Raw, 0, GridInit::Zero, 1);
    for (double v : zero.levels[0].features) EXPECT_EQ(v, 0.0);
}

TEST(Grid, Table3VertexTotalReproducesIndexPayload) {
    EXPECT_EQ(vq::index_bytes(636000, 6), 477000u);
    EXPECT_EQ(vq::index_bytes(636000, 4), 318000u);
    EXPECT_EQ(vq::index_bytes(636000, 2), 159000u);
    EXPECT_EQ(vq::index_bytes(636000, 1), 79500u);
}
