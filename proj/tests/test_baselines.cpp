#include "vqad/baselines.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace vqad;
using namespace vqad::baselines;

namespace {

std::vector<double> gaussian_rows(std::mt19937_64& rng, std::size_t m, int k, std::vector<double> scales = {}) {
    std::normal_distribution<double> n(0, 1);
    std::vector<double> z(m * k);
    for (std::size_t i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) z[i * k + j] = n(rng) * (scales.empty() ? 1.0 : scales[j]) + 0.3 * j;
    return z;
}

double mse(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

}  // namespace

TEST(KLT, RankOneData) {
    const std::vector<double> v{0.6, -0.8, 0.0};
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> z;
    for (int i = 0; i < 200; ++i) {
        const double s = n(rng);
        for (double c : v) z.push_back(s * c);
    }
    const auto t = klt_fit<double>(z, 3);
    EXPECT_NEAR(std::abs(t.basis.col(0).dot(Eigen::Vector3d(0.6, -0.8, 0.0))), 1.0, 1e-10);
    EXPECT_NEAR(t.eigenvalues(1), 0.0, 1e-10);
    EXPECT_NEAR(t.eigenvalues(2), 0.0, 1e-10);
}

TEST(KLT, IsotropicEigenvalues) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0, 1);
    std::vector<double> z(100000 * 4);
    for (auto& e : z) e = n(rng);
    const auto t = klt_fit<double>(z, 4);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(t.eigenvalues(i), 1.0, 0.05);
}

TEST(KLT, OrthonormalBasisAndSignConvention) {
    std::mt19937_64 rng(3);
    const auto z = gaussian_rows(rng, 300, 6, {3, 1, 0.5, 2, 0.1, 1.5});
    const auto t = klt_fit<double>(z, 6);
    EXPECT_LT((t.basis.transpose() * t.basis - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-10);
    for (int c = 0; c < 6; ++c) {
        Eigen::Index at = 0;
        t.basis.col(c).cwiseAbs().maxCoeff(&at);
        EXPECT_GT(t.basis(at, c), 0.0);
        if (c > 0) {
            EXPECT_GE(t.eigenvalues(c - 1), t.eigenvalues(c));
        }
    }
}

TEST(KLT, FullRankRoundtrip) {
    std::mt19937_64 rng(4);
    const auto z = gaussian_rows(rng, 100, 5);
    const auto t = klt_fit<double>(z, 5);
    const auto back = klt_truncate<double>(z, t, 5);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(back[i], z[i], 1e-10);
}

TEST(KLT, TruncationErrorIsEigenvalueTail) {
    std::mt19937_64 rng(5);
    const int k = 8;
    const auto z = gaussian_rows(rng, 500, k, {2, 1.5, 1.2, 1, 0.7, 0.5, 0.2, 0.1});
    const auto t = klt_fit<double>(z, k);
    double previous = 1e30;
    for (int f = 1; f <= k; ++f) {
        const double e = mse(z, klt_truncate<double>(z, t, f));
        double tail = 0;
        for (int i = f; i < k; ++i) tail += t.eigenvalues(i);
        EXPECT_NEAR(e, tail / k, 1e-8);
        EXPECT_LE(e, previous + 1e-15);
        previous = e;
    }
}

TEST(KLT, ErrorsAndPayload) {
    const std::vector<double> z{1, 2, 3, 4};
    const auto t = klt_fit<double>(z, 2);
    EXPECT_THROW(klt_truncate<double>(z, t, 0), std::out_of_range);
    EXPECT_THROW(klt_truncate<double>(z, t, 3), std::out_of_range);
    const std::vector<double> bad{1, std::nan("")};
    EXPECT_THROW(klt_fit<double>(bad, 2), FormatError);
    // f = 8 of k = 16 keeps half the raw fp16 grid
    EXPECT_EQ(klt_payload_bytes(1000, 8) * 2, 1000u * 16 * 2);
}

TEST(KMeans, ObjectiveNonIncreasing) {
    std::mt19937_64 rng(6);
    const auto z = gaussian_rows(rng, 2000, 4);
    const auto r = kmeans_vq<double>(z, 4, 4, 100, 7);
    ASSERT_GE(r.objective.size(), 2u);
    for (std::size_t i = 1; i < r.objective.size(); ++i) EXPECT_LE(r.objective[i], r.objective[i - 1] * (1 + 1e-12));
    EXPECT_EQ(r.codebook.size(), 16u * 4);
}

TEST(KMeans, ExactWhenRowsEqualClusters) {
    std::mt19937_64 rng(8);
    const auto z = gaussian_rows(rng, 16, 3);
    const auto r = kmeans_vq<double>(z, 3, 4, 50, 1);
    EXPECT_EQ(r.inertia, 0.0);
    for (std::size_t i = 0; i < 16; ++i)
        for (int j = 0; j < 3; ++j)
            EXPECT_EQ(r.codebook[r.assignments[i] * 3 + j], static_cast<float>(z[i * 3 + j]));
}

TEST(KMeans, SingleClusterIsMean) {
    std::mt19937_64 rng(9);
    const auto z = gaussian_rows(rng, 100, 3);
    const auto r = kmeans_vq<double>(z, 3, 0, 10, 1);
    for (int j = 0; j < 3; ++j) {
        double mean = 0;
        for (std::size_t i = 0; i < 100; ++i) mean += z[i * 3 + j] / 100.0;
        EXPECT_NEAR(r.codebook[j], mean, 1e-5);
    }
}

TEST(KMeans, DeterministicPerSeed) {
    std::mt19937_64 rng(10);
    const auto z = gaussian_rows(rng, 500, 2);
    const auto a = kmeans_vq<double>(z, 2, 3, 100, 42);
    const auto b = kmeans_vq<double>(z, 2, 3, 100, 42);
    EXPECT_EQ(a.codebook, b.codebook);
    EXPECT_EQ(a.assignments, b.assignments);
}

TEST(KMeans, RecoversBakedIndicesOfSeparatedCodebook) {
    // a baked grid: rows are exact codebook entries of a well separated codebook
    std::mt19937_64 rng(11);
    const int k = 4, b = 3;
    std::vector<float> codebook(8 * k);
    for (int r = 0; r < 8; ++r)
        for (int j = 0; j < k; ++j) codebook[r * k + j] = static_cast<float>(10 * r + j * (r % 3));
    const auto v = random_index_grid(400, b, 5);
    std::vector<float> rows;
    for (auto i : v) rows.insert(rows.end(), codebook.begin() + i * k, codebook.begin() + (i + 1) * k);
    EXPECT_EQ(assign_nearest(rows, codebook, k), v);
    // and clustering from scratch groups rows exactly as V does
    const auto r = kmeans_vq<float>(rows, k, b, 100, 3);
    EXPECT_EQ(r.inertia, 0.0);
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j < v.size(); ++j)
            if (v[i] == v[j]) {
                EXPECT_EQ(r.assignments[i], r.assignments[j]);
            }
}

TEST(RandomIndex, RangeAndDeterminism) {
    const auto a = random_index_grid(10000, 5, 3);
    for (auto v : a) EXPECT_LT(v, 32);
    EXPECT_EQ(a, random_index_grid(10000, 5, 3));
    EXPECT_NE(a, random_index_grid(10000, 5, 4));
    EXPECT_EQ(4 * vq::codebook_bytes(16, 16), 8388608u);
}

TEST(Baselines, CompressTrainedField) {
    NeuralField<float> f;
    f.task = TaskKind::Image;
    f.grid = build_pyramid<float>({2, 2, 4, 4}, occupancy::dense(), StorageKind::Raw, 0, GridInit::Normal, 1);
    f.mlp = DecoderMLP<float>::make(4, 8, 3, 1);
    const auto k = klt_compress(f, 4);
    for (std::size_t i = 0; i < f.grid.levels[1].features.size(); ++i)
        EXPECT_NEAR(k.grid.levels[1].features[i], f.grid.levels[1].features[i], 1e-6);
    const auto q = kmvq_compress(f, 2, 20, 1);
    EXPECT_EQ(q.grid.kind, StorageKind::BakedVQ);
    EXPECT_NO_THROW(q.grid.validate());
    EXPECT_THROW(kmvq_compress(q, 2, 20, 1), FormatError);
}
