#pragma once

// Minimal reverse-mode differentiation over a fixed set of vector primitives.
//
// A Tape records nodes in construction order, so every node's inputs precede
// it and the tape is always topologically sorted. Node values live in one
// arena; parameter leaves view external storage and accumulate their
// gradients into an external buffer, which lets a trainer reuse one tape per
// sample without copying large parameter tables.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vqad::diff {

using NodeId = std::uint32_t;

enum class Op : std::uint8_t {
    Constant,
    Param,
    Affine,          // y = W x + b, W row-major (out x in)
    MatMul,          // (n x r) * (r x c)
    Add,
    Mul,             // elementwise
    Relu,
    Sigmoid,
    Exp,
    SoftmaxRows,     // row-wise softmax of an (n x w) matrix
    GatherRows,      // rows of a (? x w) table selected by index
    Concat,
    Slice,
    Sum,             // reduction to scalar
    MeanSquaredError,  // reduction to scalar against a constant target
    StraightThrough,   // forward = hard input, backward -> soft input
    Composite,         // emission-absorption compositing of ordered samples
};

template <class S>
class Tape {
public:
    Tape() = default;

    /// Drops every node but keeps allocated capacity.
    void clear() {
        nodes_.clear();
        values_.clear();
        grads_.clear();
        indices_.clear();
        constants_.clear();
    }

    std::size_t size() const noexcept { return nodes_.size(); }

    NodeId constant(std::span<const S> value) {
        const NodeId id = push(Op::Constant, value.size());
        std::copy(value.begin(), value.end(), values_.begin() + nodes_[id].offset);
        return id;
    }

    NodeId constant(std::initializer_list<S> value) {
        return constant(std::span<const S>(value.begin(), value.size()));
    }

    /// Leaf viewing external storage. When `grad` is empty the leaf is
    /// treated as a constant during backward().
    NodeId param(std::span<const S> value, std::span<S> grad = {}) {
        if (!grad.empty() && grad.size() != value.size()) {
            throw std::invalid_argument("param: gradient buffer size mismatch");
        }
        Node n;
        n.op = Op::Param;
        n.size = value.size();
        n.external_value = value.data();
        n.external_grad = grad.empty() ? nullptr : grad.data();
        nodes_.push_back(n);
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    NodeId affine(NodeId weight, NodeId x, NodeId bias) {
        const std::size_t in = size_of(x);
        const std::size_t out = size_of(bias);
        if (size_of(weight) != in * out) throw std::invalid_argument("affine: weight shape mismatch");
        const NodeId id = push(Op::Affine, out, weight, x, bias);
        const S* w = value_ptr(weight);
        const S* xv = value_ptr(x);
        const S* b = value_ptr(bias);
        S* y = mutable_value(id);
        for (std::size_t o = 0; o < out; ++o) {
            S acc = b[o];
            const S* row = w + o * in;
            for (std::size_t i = 0; i < in; ++i) acc += row[i] * xv[i];
            y[o] = acc;
        }
        return id;
    }

    NodeId matmul(NodeId a, NodeId b, std::size_t rows, std::size_t inner, std::size_t cols) {
        if (size_of(a) != rows * inner || size_of(b) != inner * cols) {
            throw std::invalid_argument("matmul: shape mismatch");
        }
        const NodeId id = push(Op::MatMul, rows * cols, a, b);
        Node& n = nodes_[id];
        n.rows = rows;
        n.cols = cols;
        n.inner = inner;
        const S* av = value_ptr(a);
        const S* bv = value_ptr(b);
        S* y = mutable_value(id);
        std::fill(y, y + rows * cols, S(0));
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < inner; ++i) {
                const S s = av[r * inner + i];
                const S* brow = bv + i * cols;
                S* yrow = y + r * cols;
                for (std::size_t c = 0; c < cols; ++c) yrow[c] += s * brow[c];
            }
        }
        return id;
    }

    NodeId add(NodeId a, NodeId b) {
        require_same_size(a, b, "add");
        const NodeId id = push(Op::Add, size_of(a), a, b);
        const S* av = value_ptr(a);
        const S* bv = value_ptr(b);
        S* y = mutable_value(id);
        for (std::size_t i = 0; i < nodes_[id].size; ++i) y[i] = av[i] + bv[i];
        return id;
    }

    NodeId mul(NodeId a, NodeId b) {
        require_same_size(a, b, "mul");
        const NodeId id = push(Op::Mul, size_of(a), a, b);
        const S* av = value_ptr(a);
        const S* bv = value_ptr(b);
        S* y = mutable_value(id);
        for (std::size_t i = 0; i < nodes_[id].size; ++i) y[i] = av[i] * bv[i];
        return id;
    }

    NodeId relu(NodeId x) {
        return unary(Op::Relu, x, [](S v) { return v > S(0) ? v : S(0); });
    }

    NodeId sigmoid(NodeId x) {
        return unary(Op::Sigmoid, x, [](S v) { return S(1) / (S(1) + std::exp(-v)); });
    }

    NodeId exp(NodeId x) {
        return unary(Op::Exp, x, [](S v) { return std::exp(v); });
    }

    NodeId softmax_rows(NodeId x, std::size_t width) {
        const std::size_t total = size_of(x);
        if (width == 0 || total % width != 0) throw std::invalid_argument("softmax_rows: bad width");
        const NodeId id = push(Op::SoftmaxRows, total, x);
        nodes_[id].cols = width;
        const S* xv = value_ptr(x);
        S* y = mutable_value(id);
        for (std::size_t r = 0; r < total / width; ++r) {
            softmax_row(std::span<const S>(xv + r * width, width), std::span<S>(y + r * width, width));
        }
        return id;
    }

    NodeId gather_rows(NodeId table, std::size_t width, std::span<const std::uint32_t> rows) {
        const std::size_t table_rows = width == 0 ? 0 : size_of(table) / width;
        const NodeId id = push(Op::GatherRows, rows.size() * width, table);
        Node& n = nodes_[id];
        n.cols = width;
        n.aux = indices_.size();
        n.rows = rows.size();
        const S* t = value_ptr(table);
        S* y = mutable_value(id);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r] >= table_rows) throw std::out_of_range("gather_rows: index out of range");
            indices_.push_back(rows[r]);
            std::copy_n(t + rows[r] * width, width, y + r * width);
        }
        return id;
    }

    NodeId concat(NodeId a, NodeId b) {
        const NodeId parts[2] = {a, b};
        return concat(std::span<const NodeId>(parts, 2));
    }

    NodeId concat(std::span<const NodeId> parts) {
        std::size_t total = 0;
        for (NodeId p : parts) total += size_of(p);
        const NodeId id = push(Op::Concat, total, parts.empty() ? 0 : parts[0]);
        Node& n = nodes_[id];
        n.aux = indices_.size();
        n.rows = parts.size();
        indices_.insert(indices_.end(), parts.begin(), parts.end());
        S* y = mutable_value(id);
        for (NodeId p : parts) {
            std::copy_n(value_ptr(p), size_of(p), y);
            y += size_of(p);
        }
        return id;
    }

    NodeId slice(NodeId x, std::size_t offset, std::size_t length) {
        if (offset + length > size_of(x)) throw std::invalid_argument("slice: out of range");
        const NodeId id = push(Op::Slice, length, x);
        nodes_[id].aux = offset;
        std::copy_n(value_ptr(x) + offset, length, mutable_value(id));
        return id;
    }

    NodeId sum(NodeId x) {
        const NodeId id = push(Op::Sum, 1, x);
        const S* xv = value_ptr(x);
        S acc = 0;
        for (std::size_t i = 0; i < size_of(x); ++i) acc += xv[i];
        *mutable_value(id) = acc;
        return id;
    }

    NodeId mean_squared_error(NodeId prediction, std::span<const S> target) {
        if (target.size() != size_of(prediction) || target.empty()) {
            throw std::invalid_argument("mean_squared_error: target size mismatch");
        }
        const NodeId id = push(Op::MeanSquaredError, 1, prediction);
        Node& n = nodes_[id];
        n.aux = constants_.size();
        constants_.insert(constants_.end(), target.begin(), target.end());
        const S* p = value_ptr(prediction);
        S acc = 0;
        for (std::size_t i = 0; i < target.size(); ++i) {
            const S d = p[i] - target[i];
            acc += d * d;
        }
        *mutable_value(id) = acc / static_cast<S>(target.size());
        return id;
    }

    /// Emits `hard` forward; routes the incoming gradient to `soft` only.
    NodeId straight_through(NodeId hard, NodeId soft) {
        require_same_size(hard, soft, "straight_through");
        const NodeId id = push(Op::StraightThrough, size_of(hard), hard, soft);
        std::copy_n(value_ptr(hard), size_of(hard), mutable_value(id));
        return id;
    }

    /// Composites n ordered samples. `density` holds n values, `rgb` holds
    /// 3n values; `deltas` are segment lengths. Output is (r, g, b, opacity)
    /// with the background already blended in by the remaining transmittance.
    NodeId composite(NodeId density, NodeId rgb, std::span<const S> deltas, std::span<const S, 3> background) {
        const std::size_t n = deltas.size();
        if (size_of(density) != n || size_of(rgb) != 3 * n) {
            throw std::invalid_argument("composite: sample count mismatch");
        }
        const NodeId id = push(Op::Composite, 4, density, rgb);
        Node& node = nodes_[id];
        node.aux = constants_.size();
        node.rows = n;
        constants_.insert(constants_.end(), deltas.begin(), deltas.end());
        constants_.insert(constants_.end(), background.begin(), background.end());
        const S* sigma = value_ptr(density);
        const S* c = value_ptr(rgb);
        S out[4] = {0, 0, 0, 0};
        S transmittance = 1;
        for (std::size_t i = 0; i < n; ++i) {
            const S alpha = S(1) - std::exp(-sigma[i] * deltas[i]);
            const S w = alpha * transmittance;
            out[0] += w * c[3 * i];
            out[1] += w * c[3 * i + 1];
            out[2] += w * c[3 * i + 2];
            out[3] += w;
            transmittance *= S(1) - alpha;
        }
        for (int ch = 0; ch < 3; ++ch) out[ch] += transmittance * background[ch];
        std::copy_n(out, 4, mutable_value(id));
        return id;
    }

    std::span<const S> value(NodeId id) const { return {value_ptr(id), size_of(id)}; }

    /// Gradient of the last backward() loss with respect to a node. For
    /// parameter leaves this is the external accumulation buffer.
    std::span<const S> grad(NodeId id) const {
        check(id);
        const Node& n = nodes_[id];
        if (n.op == Op::Param) {
            if (n.external_grad == nullptr) return {};
            return {n.external_grad, n.size};
        }
        return {grads_.data() + n.offset, n.size};
    }

    /// Propagates d(seed * loss) to every node. Parameter gradients are
    /// accumulated (not overwritten) into their external buffers.
    void backward(NodeId loss, S seed = S(1)) {
        check(loss);
        if (size_of(loss) != 1) throw std::invalid_argument("backward: loss node is not scalar");
        grads_.assign(values_.size(), S(0));
        if (nodes_[loss].op == Op::Param) {
            if (nodes_[loss].external_grad) nodes_[loss].external_grad[0] += seed;
            return;
        }
        grads_[nodes_[loss].offset] = seed;
        for (std::size_t k = loss + 1; k-- > 0;) propagate(static_cast<NodeId>(k));
    }

    /// Smallest |input| over every ReLU on the tape (infinity if none). The
    /// recorded function is smooth while no input moves by this much.
    S relu_margin() const {
        S m = std::numeric_limits<S>::infinity();
        for (const Node& n : nodes_) {
            if (n.op != Op::Relu) continue;
            for (S v : value(n.a)) m = std::min(m, std::abs(v));
        }
        return m;
    }

    static void softmax_row(std::span<const S> logits, std::span<S> out) {
        S hi = -std::numeric_limits<S>::infinity();
        for (S v : logits) hi = std::max(hi, v);
        S total = 0;
        for (std::size_t i = 0; i < logits.size(); ++i) {
            out[i] = std::exp(logits[i] - hi);
            total += out[i];
        }
        const S inv = S(1) / total;
        for (S& v : out) v *= inv;
    }

private:
    struct Node {
        Op op = Op::Constant;
        NodeId a = 0, b = 0, c = 0;
        std::size_t offset = 0;
        std::size_t size = 0;
        std::size_t rows = 0, cols = 0, inner = 0;
        std::size_t aux = 0;
        const S* external_value = nullptr;
        S* external_grad = nullptr;
    };

    void check(NodeId id) const {
        if (id >= nodes_.size()) throw std::out_of_range("tape: unknown node " + std::to_string(id));
    }

    void require_same_size(NodeId a, NodeId b, const char* what) const {
        if (size_of(a) != size_of(b)) throw std::invalid_argument(std::string(what) + ": size mismatch");
    }

    std::size_t size_of(NodeId id) const {
        check(id);
        return nodes_[id].size;
    }

    const S* value_ptr(NodeId id) const {
        check(id);
        const Node& n = nodes_[id];
        return n.op == Op::Param ? n.external_value : values_.data() + n.offset;
    }

    S* mutable_value(NodeId id) { return values_.data() + nodes_[id].offset; }

    // Inputs must already exist, which is what keeps the tape acyclic.
    NodeId push(Op op, std::size_t size, NodeId a = 0, NodeId b = 0, NodeId c = 0) {
        const std::size_t count = nodes_.size();
        if (a >= count || b >= count || c >= count) {
            if (!(count == 0 && op == Op::Constant)) throw std::out_of_range("tape: input node does not precede");
        }
        Node n;
        n.op = op;
        n.a = a;
        n.b = b;
        n.c = c;
        n.offset = values_.size();
        n.size = size;
        values_.resize(values_.size() + size);
        nodes_.push_back(n);
        return static_cast<NodeId>(count);
    }

    template <class F>
    NodeId unary(Op op, NodeId x, F f) {
        const NodeId id = push(op, size_of(x), x);
        const S* xv = value_ptr(x);
        S* y = mutable_value(id);
        for (std::size_t i = 0; i < nodes_[id].size; ++i) y[i] = f(xv[i]);
        return id;
    }

    S* grad_sink(NodeId id) {
        Node& n = nodes_[id];
        if (n.op == Op::Param) return n.external_grad;
        return grads_.data() + n.offset;
    }

    void propagate(NodeId id) {
        const Node& n = nodes_[id];
        const S* g = grads_.data() + n.offset;
        const S* y = values_.data() + n.offset;
        switch (n.op) {
        case Op::Constant:
        case Op::Param:
            return;
        case Op::Affine: {
            const std::size_t out = n.size;
            const std::size_t in = size_of(n.b);
            const S* w = value_ptr(n.a);
            const S* x = value_ptr(n.b);
            if (S* gw = grad_sink(n.a)) {
                for (std::size_t o = 0; o < out; ++o) {
                    if (g[o] == S(0)) continue;
                    for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += g[o] * x[i];
                }
            }
            if (S* gx = grad_sink(n.b)) {
                for (std::size_t o = 0; o < out; ++o) {
                    if (g[o] == S(0)) continue;
                    for (std::size_t i = 0; i < in; ++i) gx[i] += g[o] * w[o * in + i];
                }
            }
            if (S* gb = grad_sink(n.c)) {
                for (std::size_t o = 0; o < out; ++o) gb[o] += g[o];
            }
            return;
        }
        case Op::MatMul: {
            const S* av = value_ptr(n.a);
            const S* bv = value_ptr(n.b);
            S* ga = grad_sink(n.a);
            S* gb = grad_sink(n.b);
            for (std::size_t r = 0; r < n.rows; ++r) {
                const S* grow = g + r * n.cols;
                for (std::size_t i = 0; i < n.inner; ++i) {
                    const S* brow = bv + i * n.cols;
                    if (ga) {
                        S acc = 0;
                        for (std::size_t c = 0; c < n.cols; ++c) acc += grow[c] * brow[c];
                        ga[r * n.inner + i] += acc;
                    }
                    if (gb) {
                        const S s = av[r * n.inner + i];
                        S* gbrow = gb + i * n.cols;
                        for (std::size_t c = 0; c < n.cols; ++c) gbrow[c] += s * grow[c];
                    }
                }
            }
            return;
        }
        case Op::Add: {
            if (S* ga = grad_sink(n.a))
                for (std::size_t i = 0; i < n.size; ++i) ga[i] += g[i];
            if (S* gb = grad_sink(n.b))
                for (std::size_t i = 0; i < n.size; ++i) gb[i] += g[i];
            return;
        }
        case Op::Mul: {
            const S* av = value_ptr(n.a);
            const S* bv = value_ptr(n.b);
            if (S* ga = grad_sink(n.a))
                for (std::size_t i = 0; i < n.size; ++i) ga[i] += g[i] * bv[i];
            if (S* gb = grad_sink(n.b))
                for (std::size_t i = 0; i < n.size; ++i) gb[i] += g[i] * av[i];
            return;
        }
        case Op::Relu: {
            // derivative at exactly zero is zero
            if (S* gx = grad_sink(n.a))
                for (std::size_t i = 0; i < n.size; ++i) gx[i] += y[i] > S(0) ? g[i] : S(0);
            return;
        }
        case Op::Sigmoid: {
            if (S* gx = grad_sink(n.a))
                for (std::size_t i = 0; i < n.size; ++i) gx[i] += g[i] * y[i] * (S(1) - y[i]);
            return;
        }
        case Op::Exp: {
            if (S* gx = grad_sink(n.a))
                for (std::size_t i = 0; i < n.size; ++i) gx[i] += g[i] * y[i];
            return;
        }
        case Op::SoftmaxRows: {
            S* gx = grad_sink(n.a);
            if (!gx) return;
            const std::size_t w = n.cols;
            for (std::size_t r = 0; r < n.size / w; ++r) {
                const S* yr = y + r * w;
                const S* gr = g + r * w;
                S dot = 0;
                for (std::size_t i = 0; i < w; ++i) dot += gr[i] * yr[i];
                for (std::size_t i = 0; i < w; ++i) gx[r * w + i] += yr[i] * (gr[i] - dot);
            }
            return;
        }
        case Op::GatherRows: {
            S* gt = grad_sink(n.a);
            if (!gt) return;
            for (std::size_t r = 0; r < n.rows; ++r) {
                S* dst = gt + indices_[n.aux + r] * n.cols;
                const S* src = g + r * n.cols;
                for (std::size_t c = 0; c < n.cols; ++c) dst[c] += src[c];
            }
            return;
        }
        case Op::Concat: {
            std::size_t at = 0;
            for (std::size_t k = 0; k < n.rows; ++k) {
                const NodeId part = indices_[n.aux + k];
                const std::size_t len = size_of(part);
                if (S* gp = grad_sink(part))
                    for (std::size_t i = 0; i < len; ++i) gp[i] += g[at + i];
                at += len;
            }
            return;
        }
        case Op::Slice: {
            if (S* gx = grad_sink(n.a))
                for (std::size_t i = 0; i < n.size; ++i) gx[n.aux + i] += g[i];
            return;
        }
        case Op::Sum: {
            if (S* gx = grad_sink(n.a))
                for (std::size_t i = 0; i < size_of(n.a); ++i) gx[i] += g[0];
            return;
        }
        case Op::MeanSquaredError: {
            S* gx = grad_sink(n.a);
            if (!gx) return;
            const std::size_t count = size_of(n.a);
            const S* p = value_ptr(n.a);
            const S* t = constants_.data() + n.aux;
            const S scale = S(2) * g[0] / static_cast<S>(count);
            for (std::size_t i = 0; i < count; ++i) gx[i] += scale * (p[i] - t[i]);
            return;
        }
        case Op::StraightThrough: {
            if (S* gs = grad_sink(n.b))
                for (std::size_t i = 0; i < n.size; ++i) gs[i] += g[i];
            return;
        }
        case Op::Composite:
            propagate_composite(n, g);
            return;
        }
    }

    void propagate_composite(const Node& n, const S* g) {
        const std::size_t count = n.rows;
        const S* sigma = value_ptr(n.a);
        const S* c = value_ptr(n.b);
        const S* deltas = constants_.data() + n.aux;
        const S* background = deltas + count;
        S* gsigma = grad_sink(n.a);
        S* gc = grad_sink(n.b);

        // Recompute transmittances, then sweep back to front carrying the
        // derivative of everything behind sample i with respect to T_{i+1}.
        std::vector<S> alpha(count), trans(count + 1);
        trans[0] = 1;
        for (std::size_t i = 0; i < count; ++i) {
            alpha[i] = S(1) - std::exp(-sigma[i] * deltas[i]);
            trans[i + 1] = trans[i] * (S(1) - alpha[i]);
        }
        // dOut/dT_{n} from the background blend
        S behind = g[0] * background[0] + g[1] * background[1] + g[2] * background[2];
        for (std::size_t i = count; i-- > 0;) {
            const S gw = g[0] * c[3 * i] + g[1] * c[3 * i + 1] + g[2] * c[3 * i + 2] + g[3];
            if (gc) {
                const S w = alpha[i] * trans[i];
                gc[3 * i] += g[0] * w;
                gc[3 * i + 1] += g[1] * w;
                gc[3 * i + 2] += g[2] * w;
            }
            // w_i = alpha_i T_i, T_{i+1} = (1 - alpha_i) T_i
            const S dalpha = trans[i] * (gw - behind);
            if (gsigma) {
                // d alpha / d sigma = delta * exp(-sigma delta) = delta * (1 - alpha)
                gsigma[i] += dalpha * deltas[i] * (S(1) - alpha[i]);
            }
            behind = alpha[i] * gw + (S(1) - alpha[i]) * behind;
        }
    }

    std::vector<Node> nodes_;
    std::vector<S> values_;
    std::vector<S> grads_;
    std::vector<std::uint32_t> indices_;
    std::vector<S> constants_;
};

/// Relative error |a-b| / max(|a|, |b|, 1e-8).
inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

struct GradReport {
    std::vector<double> max_relative_error;  // one entry per parameter block
    double epsilon = 0;

    double worst() const {
        double w = 0;
        for (double e : max_relative_error) w = std::max(w, e);
        return w;
    }
};

/// Builds a scalar loss on `tape` from parameter blocks. Each block arrives
/// with a gradient buffer the builder should hand to Tape::param().
using TapeBuilder = std::function<NodeId(Tape<double>&, const std::vector<std::span<const double>>&,
                                         const std::vector<std::span<double>>&)>;

/// Compares backward() of `analytic` against central differences of
/// `reference`. The two builders differ only when the analytic tape uses a
/// surrogate gradient (straight-through), whose oracle is the soft path.
inline GradReport grad_check(const TapeBuilder& analytic, const TapeBuilder& reference,
                             std::vector<std::vector<double>> point, double eps = 1e-5) {
    GradReport report;
    report.epsilon = eps;

    std::vector<std::vector<double>> grads;
    for (const auto& block : point) grads.emplace_back(block.size(), 0.0);

    auto views = [](std::vector<std::vector<double>>& blocks) {
        std::vector<std::span<const double>> out;
        for (auto& b : blocks) out.emplace_back(b);
        return out;
    };
    auto sinks = [](std::vector<std::vector<double>>& blocks) {
        std::vector<std::span<double>> out;
        for (auto& b : blocks) out.emplace_back(b);
        return out;
    };

    Tape<double> tape;
    const NodeId loss = analytic(tape, views(point), sinks(grads));
    if (!std::isfinite(tape.value(loss)[0])) throw std::domain_error("grad_check: non-finite function value");
    tape.backward(loss);

    std::vector<std::vector<double>> scratch;
    for (const auto& block : point) scratch.emplace_back(block.size(), 0.0);
    auto evaluate = [&]() {
        Tape<double> t;
        const NodeId l = reference(t, views(point), sinks(scratch));
        const double v = t.value(l)[0];
        if (!std::isfinite(v)) throw std::domain_error("grad_check: non-finite function value");
        return v;
    };

    for (std::size_t b = 0; b < point.size(); ++b) {
        double worst = 0;
        for (std::size_t i = 0; i < point[b].size(); ++i) {
            const double saved = point[b][i];
            point[b][i] = saved + eps;
            const double up = evaluate();
            point[b][i] = saved - eps;
            const double down = evaluate();
            point[b][i] = saved;
            const double fd = (up - down) / (2 * eps);
            worst = std::max(worst, relative_error(grads[b][i], fd));
        }
        report.max_relative_error.push_back(worst);
    }
    return report;
}

inline GradReport grad_check(const TapeBuilder& builder, std::vector<std::vector<double>> point,
                             double eps = 1e-5) {
    return grad_check(builder, builder, std::move(point), eps);
}

}  // namespace vqad::diff
