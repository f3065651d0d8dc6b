#pragma once

// Post-hoc and non-learned compressors for trained feature grids:
// KLT low-rank approximation, k-means vector quantization and frozen random
// indices.

#include "vqad/error.hpp"
#include "vqad/field.hpp"
#include "vqad/pyramid.hpp"

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace vqad::baselines {

/// Eigenbasis of the centered feature covariance (normalized by 1/m).
struct KLTTransform {
    int width = 0;
    Eigen::MatrixXd basis;        // columns are eigenvectors, descending eigenvalue
    Eigen::VectorXd mean;
    Eigen::VectorXd eigenvalues;  // descending, non-negative
};

namespace detail {

template <class S>
Eigen::MatrixXd to_matrix(std::span<const S> rows, int k) {
    const Eigen::Index m = static_cast<Eigen::Index>(rows.size() / k);
    Eigen::MatrixXd z(m, k);
    for (Eigen::Index i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j) z(i, j) = static_cast<double>(rows[i * k + j]);
    return z;
}

}  // namespace detail

template <class S>
KLTTransform klt_fit(std::span<const S> rows, int k) {
    if (k < 1 || rows.size() % k != 0) throw std::invalid_argument("klt_fit: rows are not k wide");
    for (S v : rows) {
        if (!std::isfinite(static_cast<double>(v))) throw FormatError("klt_fit: non-finite input");
    }
    const Eigen::MatrixXd z = detail::to_matrix(rows, k);
    KLTTransform t;
    t.width = k;
    const double m = static_cast<double>(std::max<Eigen::Index>(z.rows(), 1));
    t.mean = z.rows() > 0 ? Eigen::VectorXd(z.colwise().mean().transpose()) : Eigen::VectorXd::Zero(k);
    const Eigen::MatrixXd centered = z.rowwise() - t.mean.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / m;

    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    t.eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
    t.basis = eig.eigenvectors().rowwise().reverse();
    for (int c = 0; c < k; ++c) {
        Eigen::Index at = 0;
        t.basis.col(c).cwiseAbs().maxCoeff(&at);
        if (t.basis(at, c) < 0) t.basis.col(c) *= -1.0;
    }
    return t;
}

/// Projects onto the leading `f` eigenvectors and back.
template <class S>
std::vector<S> klt_truncate(std::span<const S> rows, const KLTTransform& t, int f) {
    const int k = t.width;
    if (f < 1 || f > k) throw std::out_of_range("klt_truncate: retained coefficients out of range");
    const Eigen::MatrixXd z = detail::to_matrix(rows, k);
    const Eigen::MatrixXd lead = t.basis.leftCols(f);
    const Eigen::MatrixXd centered = z.rowwise() - t.mean.transpose();
    const Eigen::MatrixXd approx = ((centered * lead) * lead.transpose()).rowwise() + t.mean.transpose();
    std::vector<S> out(rows.size());
    for (Eigen::Index i = 0; i < approx.rows(); ++i)
        for (int j = 0; j < k; ++j) out[i * k + j] = static_cast<S>(approx(i, j));
    return out;
}

/// Stored bytes of `f` fp16 coefficients per row (basis and mean excluded,
/// so f = k/2 is exactly half the raw grid).
inline std::size_t klt_payload_bytes(std::size_t rows, int f) { return rows * static_cast<std::size_t>(f) * 2; }

struct KMeansResult {
    int width = 0;
    std::vector<float> codebook;          // 2^b x k
    std::vector<std::uint16_t> assignments;
    std::vector<double> objective;        // within-cluster sum of squares per iteration
    double inertia = 0;                   // final objective
};

/// Index of the nearest codebook row; ties go to the lowest index.
inline std::uint16_t nearest_row(std::span<const float> point, std::span<const float> codebook, int k,
                                 double* dist2 = nullptr) {
    const std::size_t rows = codebook.size() / k;
    std::uint16_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < rows; ++r) {
        double d = 0;
        for (int j = 0; j < k; ++j) {
            const double e = static_cast<double>(point[j]) - codebook[r * k + j];
            d += e * e;
        }
        if (d < best_d) {
            best_d = d;
            best = static_cast<std::uint16_t>(r);
        }
    }
    if (dist2) *dist2 = best_d;
    return best;
}

/// Nearest-row assignment of every point.
inline std::vector<std::uint16_t> assign_nearest(std::span<const float> points, std::span<const float> codebook,
                                                 int k) {
    std::vector<std::uint16_t> out(points.size() / k);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = nearest_row(points.subspan(i * k, k), codebook, k);
    return out;
}

/// Lloyd's algorithm with k-means++ seeding and 2^bitwidth clusters. Empty
/// clusters move to the points farthest from their current centers.
template <class S>
KMeansResult kmeans_vq(std::span<const S> rows, int k, int bitwidth, int max_iters, std::uint64_t seed) {
    if (k < 1 || rows.empty() || rows.size() % k != 0) throw std::invalid_argument("kmeans_vq: bad input shape");
    if (bitwidth < 0 || bitwidth > 16) throw std::out_of_range("kmeans_vq: bitwidth out of range");
    const std::vector<float> pts(rows.begin(), rows.end());
    const std::size_t m = pts.size() / k;
    const std::size_t clusters = std::size_t{1} << bitwidth;
    std::mt19937_64 rng(seed);

    KMeansResult res;
    res.width = k;
    res.codebook.resize(clusters * k);
    auto point = [&](std::size_t i) { return std::span<const float>(pts).subspan(i * k, k); };
    auto set_center = [&](std::size_t c, std::size_t i) { std::copy_n(&pts[i * k], k, &res.codebook[c * k]); };

    // k-means++ seeding
    std::vector<double> d2(m, std::numeric_limits<double>::infinity());
    set_center(0, std::uniform_int_distribution<std::size_t>(0, m - 1)(rng));
    for (std::size_t c = 1; c < clusters; ++c) {
        double total = 0;
        for (std::size_t i = 0; i < m; ++i) {
            double d = 0;
            for (int j = 0; j < k; ++j) {
                const double e = static_cast<double>(pts[i * k + j]) - res.codebook[(c - 1) * k + j];
                d += e * e;
            }
            d2[i] = std::min(d2[i], d);
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            pick = m - 1;
            for (std::size_t i = 0; i < m; ++i) {
                u -= d2[i];
                if (u < 0 && d2[i] > 0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = std::uniform_int_distribution<std::size_t>(0, m - 1)(rng);
        }
        set_center(c, pick);
    }

    res.assignments.assign(m, 0);
    std::vector<double> dist(m, 0);
    std::vector<double> sums(clusters * k);
    std::vector<std::size_t> counts(clusters);
    for (int it = 0; it < std::max(max_iters, 1); ++it) {
        bool changed = it == 0;
        double objective = 0;
        for (std::size_t i = 0; i < m; ++i) {
            const auto a = nearest_row(point(i), res.codebook, k, &dist[i]);
            changed = changed || a != res.assignments[i];
            res.assignments[i] = a;
            objective += dist[i];
        }
        res.objective.push_back(objective);
        if (!changed) break;

        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < m; ++i) {
            const auto a = res.assignments[i];
            ++counts[a];
            for (int j = 0; j < k; ++j) sums[a * k + j] += pts[i * k + j];
        }
        std::vector<std::uint8_t> taken(m, 0);
        for (std::size_t c = 0; c < clusters; ++c) {
            if (counts[c] > 0) {
                for (int j = 0; j < k; ++j) res.codebook[c * k + j] = static_cast<float>(sums[c * k + j] / counts[c]);
                continue;
            }
            std::size_t far = 0;
            double far_d = -1;
            for (std::size_t i = 0; i < m; ++i) {
                if (!taken[i] && dist[i] > far_d) {
                    far_d = dist[i];
                    far = i;
                }
            }
            taken[far] = 1;
            set_center(c, far);
        }
    }
    res.inertia = res.objective.back();
    return res;
}

/// Uniform indices in [0, 2^bitwidth), fixed by the seed.
inline std::vector<std::uint16_t> random_index_grid(std::size_t m, int bitwidth, std::uint64_t seed) {
    if (bitwidth < 1 || bitwidth > 16) throw std::out_of_range("random_index_grid: bitwidth out of range");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint32_t> pick(0, (1u << bitwidth) - 1u);
    std::vector<std::uint16_t> out(m);
    for (auto& v : out) v = static_cast<std::uint16_t>(pick(rng));
    return out;
}

/// Replaces every level's raw features with their rank-f KLT approximation,
/// fitting one transform per level.
template <class S>
NeuralField<S> klt_compress(const NeuralField<S>& field, int f) {
    if (field.grid.kind != StorageKind::Raw) throw FormatError("klt: needs an uncompressed model");
    NeuralField<S> out = field;
    const int k = field.grid.config.feature_width;
    for (auto& st : out.grid.levels) {
        const auto t = klt_fit<S>(st.features, k);
        st.features = klt_truncate<S>(st.features, t, f);
    }
    return out;
}

/// Quantizes every level's raw features with its own k-means codebook.
template <class S>
NeuralField<S> kmvq_compress(const NeuralField<S>& field, int bitwidth, int max_iters, std::uint64_t seed) {
    if (field.grid.kind != StorageKind::Raw) throw FormatError("kmvq: needs an uncompressed model");
    VQConfig{bitwidth, field.grid.config.feature_width, field.grid.config.levels}.validate();
    NeuralField<S> out = field;
    const int k = field.grid.config.feature_width;
    out.grid.kind = StorageKind::BakedVQ;
    out.grid.bitwidth = bitwidth;
    for (std::size_t l = 0; l < out.grid.levels.size(); ++l) {
        auto& st = out.grid.levels[l];
        const auto res = kmeans_vq<S>(st.features, k, bitwidth, max_iters, seed + l);
        st.codebook.assign(res.codebook.begin(), res.codebook.end());
        st.indices = res.assignments;
        st.features.clear();
    }
    return out;
}

}  // namespace vqad::baselines
