#pragma once

// Learned vector quantization of feature rows.
//
// Each level owns a codebook D (2^b x k). During training a vertex is
// represented by a logit row C[i] (2^b wide); the forward pass uses the hard
// row D[argmax C[i]] and the backward pass differentiates softmax(C[i]) * D.

#include "vqad/diffcore.hpp"
#include "vqad/error.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace vqad {

struct VQConfig {
    int bitwidth = 4;
    int feature_width = 8;
    int levels = 4;

    std::size_t codebook_rows() const { return std::size_t{1} << bitwidth; }

    void validate() const {
        if (bitwidth < 1 || bitwidth > 16) throw FormatError("vq: bitwidth must be in [1, 16]");
        if (feature_width < 1) throw FormatError("vq: feature width must be >= 1");
        if (levels < 1) throw FormatError("vq: levels must be >= 1");
    }
};

namespace vq {

/// softmax(logits) * codebook, written into `out` (k wide).
template <class S>
void soft_features(std::span<const S> logits, std::span<const S> codebook, std::span<S> out) {
    const std::size_t rows = logits.size();
    const std::size_t k = out.size();
    if (codebook.size() != rows * k) throw std::invalid_argument("soft_features: shape mismatch");
    std::vector<S> p(rows);
    diff::Tape<S>::softmax_row(logits, p);
    std::fill(out.begin(), out.end(), S(0));
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < k; ++c) out[c] += p[r] * codebook[r * k + c];
    }
}

template <class S>
std::vector<S> soft_features(std::span<const S> logits, std::span<const S> codebook, std::size_t k) {
    std::vector<S> out(k);
    soft_features<S>(logits, codebook, out);
    return out;
}

template <class S>
std::span<const S> hard_features(std::uint32_t index, std::span<const S> codebook, std::size_t k) {
    if (k == 0 || index >= codebook.size() / k) throw std::out_of_range("hard_features: index out of range");
    return codebook.subspan(index * k, k);
}

/// Row argmax; ties go to the lowest index.
template <class S>
std::uint32_t argmax(std::span<const S> row) {
    std::uint32_t best = 0;
    for (std::uint32_t i = 1; i < row.size(); ++i) {
        if (row[i] > row[best]) best = i;
    }
    return best;
}

/// Row-wise argmax of an (m x 2^b) logit matrix.
template <class S>
std::vector<std::uint16_t> bake(std::span<const S> logits, std::size_t width) {
    if (width == 0 || logits.size() % width != 0) throw std::invalid_argument("bake: bad logit shape");
    std::vector<std::uint16_t> out(logits.size() / width);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint16_t>(argmax(logits.subspan(i * width, width)));
    }
    return out;
}

enum class LookupPath {
    Hard,             // forward only: D[argmax C]
    StraightThrough,  // hard forward, soft backward
    Soft,             // softmax(C) * D in both directions
};

/// Records the feature rows for `vertices` (each a row of `logits`) on a tape.
/// Returns an (n x k) node.
template <class S>
diff::NodeId record_lookup(diff::Tape<S>& tape, diff::NodeId logits, diff::NodeId codebook,
                           std::span<const std::uint32_t> vertices, std::size_t width, std::size_t k,
                           LookupPath path) {
    const diff::NodeId rows = tape.gather_rows(logits, width, vertices);
    std::uint32_t hard_idx[8];
    std::vector<std::uint32_t> hard_heap;
    std::span<std::uint32_t> hard;
    if (vertices.size() <= 8) {
        hard = std::span<std::uint32_t>(hard_idx, vertices.size());
    } else {
        hard_heap.resize(vertices.size());
        hard = hard_heap;
    }
    if (path != LookupPath::Soft) {
        const auto values = tape.value(rows);
        for (std::size_t i = 0; i < vertices.size(); ++i) hard[i] = argmax(values.subspan(i * width, width));
    }
    if (path == LookupPath::Hard) return tape.gather_rows(codebook, k, hard);

    const diff::NodeId weights = tape.softmax_rows(rows, width);
    const diff::NodeId soft = tape.matmul(weights, codebook, vertices.size(), width, k);
    if (path == LookupPath::Soft) return soft;
    return tape.straight_through(tape.gather_rows(codebook, k, hard), soft);
}

/// Ratio of the raw fp16 grid to b-bit indices plus one fp16 codebook, in bits.
inline double compression_ratio(double vertices, double k, double bitwidth) {
    if (vertices <= 0 || k <= 0 || bitwidth <= 0) throw std::invalid_argument("compression_ratio: non-positive input");
    return 16.0 * vertices * k / (vertices * bitwidth + k * std::ldexp(1.0, static_cast<int>(bitwidth)));
}

/// Limit of compression_ratio as the vertex count grows without bound.
inline double compression_ratio_limit(double k, double bitwidth) { return 16.0 * k / bitwidth; }

inline std::size_t codebook_bytes(int bitwidth, int k) { return (std::size_t{1} << bitwidth) * k * 2; }

inline std::size_t index_bytes(std::size_t vertices, int bitwidth) {
    return (vertices * static_cast<std::size_t>(bitwidth) + 7) / 8;
}

}  // namespace vq
}  // namespace vqad
