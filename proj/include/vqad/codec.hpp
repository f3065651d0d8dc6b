#pragma once

// Level-prefix-decodable bitstream (.vqad).
//
//   header   "VQAD" u16:version u8:task u8:d u8:L u8:k u8:b u16[L]:resolution
//            u8:n u16[n]:mlp widths fp16[3]:background u8:flags
//   mlp      fp16 w1 b1 w2 b2
//   chunk*L  u8:level u32:m occupancy-bitmap codebook+indices | features
//
// Chunks run coarse to fine, so the first l chunks are enough to render at
// lod l-1. All integers are little-endian; index bits are packed LSB-first.
// There is no entropy coding.

#include "vqad/error.hpp"
#include "vqad/field.hpp"
#include "vqad/half.hpp"
#include "vqad/pyramid.hpp"
#include "vqad/vq.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vqad::codec {

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::uint8_t kFlagVectorQuantized = 0x01;

using Bytes = std::vector<std::uint8_t>;

class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        out_.push_back(static_cast<std::uint8_t>(v & 0xff));
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    template <class S>
    void halves(std::span<const S> values) {
        for (S v : values) u16(float_to_half(static_cast<float>(v)));
    }
    void raw(std::span<const std::uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }

    Bytes take() { return std::move(out_); }
    std::size_t size() const { return out_.size(); }

private:
    Bytes out_;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t remaining() const { return bytes_.size() - at_; }
    std::size_t position() const { return at_; }

    std::uint8_t u8() {
        need(1);
        return bytes_[at_++];
    }
    std::uint16_t u16() {
        need(2);
        const auto v = static_cast<std::uint16_t>(bytes_[at_] | (bytes_[at_ + 1] << 8));
        at_ += 2;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[at_ + i]) << (8 * i);
        at_ += 4;
        return v;
    }
    template <class S>
    std::vector<S> halves(std::size_t n) {
        need(2 * n);
        std::vector<S> out(n);
        for (auto& v : out) v = static_cast<S>(half_to_float(u16()));
        return out;
    }
    std::span<const std::uint8_t> raw(std::size_t n) {
        need(n);
        auto s = bytes_.subspan(at_, n);
        at_ += n;
        return s;
    }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw FormatError("bitstream truncated");
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t at_ = 0;
};

/// Packs `bitwidth`-bit values, LSB-first within each little-endian byte.
inline Bytes pack_indices(std::span<const std::uint16_t> values, int bitwidth) {
    Bytes out(vq::index_bytes(values.size(), bitwidth), 0);
    std::size_t bit = 0;
    for (std::uint16_t v : values) {
        for (int j = 0; j < bitwidth; ++j, ++bit) {
            if ((v >> j) & 1u) out[bit >> 3] |= static_cast<std::uint8_t>(1u << (bit & 7));
        }
    }
    return out;
}

inline std::vector<std::uint16_t> unpack_indices(std::span<const std::uint8_t> bytes, std::size_t count,
                                                 int bitwidth) {
    if (bytes.size() < vq::index_bytes(count, bitwidth)) throw FormatError("index payload truncated");
    std::vector<std::uint16_t> out(count, 0);
    std::size_t bit = 0;
    for (auto& v : out) {
        for (int j = 0; j < bitwidth; ++j, ++bit) {
            if ((bytes[bit >> 3] >> (bit & 7)) & 1u) v = static_cast<std::uint16_t>(v | (1u << j));
        }
    }
    return out;
}

inline Bytes pack_mask(std::span<const std::uint8_t> mask) {
    Bytes out((mask.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) out[i >> 3] |= static_cast<std::uint8_t>(1u << (i & 7));
    }
    return out;
}

inline std::vector<std::uint8_t> unpack_mask(std::span<const std::uint8_t> bytes, std::size_t cells) {
    std::vector<std::uint8_t> out(cells);
    for (std::size_t i = 0; i < cells; ++i) out[i] = (bytes[i >> 3] >> (i & 7)) & 1u;
    return out;
}

struct LevelSize {
    std::size_t framing = 0;    // level byte + vertex count
    std::size_t occupancy = 0;
    std::size_t codebook = 0;
    std::size_t indices = 0;
    std::size_t features = 0;
    std::size_t vertices = 0;

    std::size_t total() const { return framing + occupancy + codebook + indices + features; }
};

/// Exact byte counts of an encoded model, component by component.
struct SizeReport {
    std::size_t header = 0;
    std::size_t mlp = 0;
    std::vector<LevelSize> levels;
    std::size_t raw_grid = 0;   // the same grid stored as fp16 feature rows

    std::size_t codebooks() const {
        std::size_t n = 0;
        for (const auto& l : levels) n += l.codebook;
        return n;
    }
    std::size_t indices() const {
        std::size_t n = 0;
        for (const auto& l : levels) n += l.indices;
        return n;
    }
    std::size_t grid_payload() const {
        std::size_t n = 0;
        for (const auto& l : levels) n += l.codebook + l.indices + l.features;
        return n;
    }
    std::size_t total() const {
        std::size_t n = header + mlp;
        for (const auto& l : levels) n += l.total();
        return n;
    }

    /// Bytes needed to render at lod l-1, for l = 1..L.
    std::vector<std::size_t> prefix_sizes() const {
        std::vector<std::size_t> out;
        std::size_t n = header + mlp;
        for (const auto& l : levels) out.push_back(n += l.total());
        return out;
    }

    /// Raw fp16 grid over the stored grid payload (codebooks and indices, or
    /// features).
    double grid_ratio() const { return static_cast<double>(raw_grid) / static_cast<double>(grid_payload()); }
};

struct StreamShape {
    int dims = 2;
    int feature_width = 8;
    int bitwidth = 0;  // 0 for raw feature storage
    std::vector<int> resolutions;
    std::vector<std::size_t> vertices;
    std::vector<int> mlp_widths;  // input, hidden, output
};

inline std::size_t header_bytes(int levels, int mlp_layers) {
    return 4 + 2 + 1 + 4 + 2 * static_cast<std::size_t>(levels) + 1 + 2 * static_cast<std::size_t>(mlp_layers) + 6 + 1;
}

inline std::size_t mlp_bytes(std::span<const int> widths) {
    std::size_t params = 0;
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        params += static_cast<std::size_t>(widths[i]) * widths[i + 1] + widths[i + 1];
    }
    return params * 2;
}

/// Size accounting from shapes alone.
inline SizeReport predict_sizes(const StreamShape& shape) {
    SizeReport r;
    r.header = header_bytes(static_cast<int>(shape.resolutions.size()), static_cast<int>(shape.mlp_widths.size()));
    r.mlp = mlp_bytes(shape.mlp_widths);
    for (std::size_t l = 0; l < shape.resolutions.size(); ++l) {
        LevelSize s;
        s.vertices = shape.vertices[l];
        std::size_t cells = 1;
        for (int a = 0; a < shape.dims; ++a) cells *= static_cast<std::size_t>(shape.resolutions[l]);
        s.framing = 1 + 4;
        s.occupancy = (cells + 7) / 8;
        if (shape.bitwidth > 0) {
            s.codebook = vq::codebook_bytes(shape.bitwidth, shape.feature_width);
            s.indices = vq::index_bytes(s.vertices, shape.bitwidth);
        } else {
            s.features = s.vertices * shape.feature_width * 2;
        }
        r.raw_grid += s.vertices * shape.feature_width * 2;
        r.levels.push_back(s);
    }
    return r;
}

template <class S>
StreamShape shape_of(const NeuralField<S>& field) {
    StreamShape s;
    const auto& g = field.grid;
    s.dims = g.config.dims;
    s.feature_width = g.config.feature_width;
    s.bitwidth = g.kind == StorageKind::Raw ? 0 : g.bitwidth;
    for (int l = 0; l < g.level_count(); ++l) {
        s.resolutions.push_back(g.layouts[l].resolution);
        s.vertices.push_back(g.layouts[l].rows);
    }
    s.mlp_widths = {field.mlp.input_width, field.mlp.hidden_width, field.mlp.output_width};
    return s;
}

template <class S>
SizeReport size_report(const NeuralField<S>& field) {
    return predict_sizes(shape_of(field));
}

template <class S>
Bytes encode(const NeuralField<S>& field) {
    const auto& g = field.grid;
    if (g.kind == StorageKind::SoftVQ) throw FormatError("encode: model holds unbaked soft indices; bake first");
    g.validate();
    const bool vq = g.kind == StorageKind::BakedVQ;
    const int k = g.config.feature_width;

    ByteWriter w;
    for (char c : std::string("VQAD")) w.u8(static_cast<std::uint8_t>(c));
    w.u16(kFormatVersion);
    w.u8(static_cast<std::uint8_t>(field.task));
    w.u8(static_cast<std::uint8_t>(g.config.dims));
    w.u8(static_cast<std::uint8_t>(g.level_count()));
    w.u8(static_cast<std::uint8_t>(k));
    w.u8(static_cast<std::uint8_t>(vq ? g.bitwidth : 0));
    for (const auto& layout : g.layouts) w.u16(static_cast<std::uint16_t>(layout.resolution));
    w.u8(3);
    w.u16(static_cast<std::uint16_t>(field.mlp.input_width));
    w.u16(static_cast<std::uint16_t>(field.mlp.hidden_width));
    w.u16(static_cast<std::uint16_t>(field.mlp.output_width));
    w.halves<S>(field.background);
    w.u8(vq ? kFlagVectorQuantized : 0);

    w.halves<S>(field.mlp.w1);
    w.halves<S>(field.mlp.b1);
    w.halves<S>(field.mlp.w2);
    w.halves<S>(field.mlp.b2);

    for (int l = 0; l < g.level_count(); ++l) {
        const auto& layout = g.layouts[l];
        const auto& st = g.levels[l];
        w.u8(static_cast<std::uint8_t>(l));
        w.u32(layout.rows);
        w.raw(pack_mask(layout.occupied));
        if (vq) {
            w.halves<S>(st.codebook);
            w.raw(pack_indices(st.indices, g.bitwidth));
        } else {
            w.halves<S>(st.features);
        }
    }
    return w.take();
}

/// Parsed fixed-size front matter of a stream.
struct StreamHeader {
    TaskKind task = TaskKind::Image;
    int dims = 2;
    int levels = 0;
    int feature_width = 0;
    int bitwidth = 0;
    std::vector<int> resolutions;
    std::vector<int> mlp_widths;
    std::array<float, 3> background{};
    bool vector_quantized = false;
};

inline StreamHeader read_header(ByteReader& r) {
    const auto magic = r.raw(4);
    if (std::string(magic.begin(), magic.end()) != "VQAD") throw FormatError("bad magic: not a .vqad stream");
    const auto version = r.u16();
    if (version != kFormatVersion) throw FormatError("unsupported format version " + std::to_string(version));
    StreamHeader h;
    const auto task = r.u8();
    if (task > 2) throw FormatError("unknown task kind");
    h.task = static_cast<TaskKind>(task);
    h.dims = r.u8();
    h.levels = r.u8();
    h.feature_width = r.u8();
    h.bitwidth = r.u8();
    for (int l = 0; l < h.levels; ++l) h.resolutions.push_back(r.u16());
    const int layers = r.u8();
    for (int i = 0; i < layers; ++i) h.mlp_widths.push_back(r.u16());
    for (auto& c : h.background) c = half_to_float(r.u16());
    h.vector_quantized = (r.u8() & kFlagVectorQuantized) != 0;

    if (h.dims != task_dims(h.task)) throw FormatError("header: dimensionality does not match task");
    if (h.levels < 1 || h.feature_width < 1) throw FormatError("header: empty grid");
    if (h.vector_quantized != (h.bitwidth > 0) || h.bitwidth > 16) throw FormatError("header: inconsistent bitwidth");
    for (int l = 1; l < h.levels; ++l) {
        if (h.resolutions[l] != 2 * h.resolutions[l - 1]) throw FormatError("header: resolutions must double per level");
    }
    if (h.mlp_widths.size() != 3 || h.mlp_widths[0] != mlp_input_width(h.task, h.feature_width) ||
        h.mlp_widths[2] != head_width(h.task) || h.mlp_widths[1] < 1) {
        throw FormatError("header: MLP widths inconsistent with task kind");
    }
    return h;
}

/// Number of complete level chunks at the front of a (possibly cut) stream.
inline int complete_levels(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const StreamHeader h = read_header(r);
    const std::size_t mlp = mlp_bytes(h.mlp_widths);
    if (r.remaining() < mlp) return 0;
    r.raw(mlp);
    const std::size_t k = h.feature_width;
    for (int l = 0; l < h.levels; ++l) {
        std::size_t cells = 1;
        for (int a = 0; a < h.dims; ++a) cells *= static_cast<std::size_t>(h.resolutions[l]);
        if (r.remaining() < 5) return l;
        r.u8();
        const std::size_t rows = r.u32();
        const std::size_t body = (cells + 7) / 8 + (h.vector_quantized
                                                        ? vq::codebook_bytes(h.bitwidth, h.feature_width) +
                                                              vq::index_bytes(rows, h.bitwidth)
                                                        : rows * k * 2);
        if (r.remaining() < body) return l;
        r.raw(body);
    }
    return h.levels;
}

/// Decodes the header, the MLP and the first `levels_available` chunks.
/// The result has exactly that many levels.
template <class S>
NeuralField<S> decode_prefix(std::span<const std::uint8_t> bytes, int levels_available) {
    ByteReader r(bytes);
    const StreamHeader h = read_header(r);
    if (levels_available < 1 || levels_available > h.levels) {
        throw std::out_of_range("decode_prefix: level count out of range");
    }

    const int complete = complete_levels(bytes);
    if (complete < levels_available) throw IncompleteLevel(complete, complete - 1);

    NeuralField<S> f;
    f.task = h.task;
    for (int c = 0; c < 3; ++c) f.background[c] = static_cast<S>(h.background[c]);
    auto& m = f.mlp;
    m.input_width = h.mlp_widths[0];
    m.hidden_width = h.mlp_widths[1];
    m.output_width = h.mlp_widths[2];
    m.w1 = r.halves<S>(static_cast<std::size_t>(m.input_width) * m.hidden_width);
    m.b1 = r.halves<S>(m.hidden_width);
    m.w2 = r.halves<S>(static_cast<std::size_t>(m.hidden_width) * m.output_width);
    m.b2 = r.halves<S>(m.output_width);

    auto& g = f.grid;
    g.config = GridConfig{h.dims, levels_available, h.resolutions[0], h.feature_width};
    g.kind = h.vector_quantized ? StorageKind::BakedVQ : StorageKind::Raw;
    g.bitwidth = h.bitwidth;
    const std::size_t k = h.feature_width;

    for (int l = 0; l < levels_available; ++l) {
        const int level = r.u8();
        if (level != l) throw FormatError("chunk out of order: expected level " + std::to_string(l));
        const std::uint32_t rows = r.u32();
        std::size_t cells = 1;
        for (int a = 0; a < h.dims; ++a) cells *= static_cast<std::size_t>(h.resolutions[l]);
        auto layout = LevelLayout::from_mask(h.dims, h.resolutions[l], unpack_mask(r.raw((cells + 7) / 8), cells));
        if (layout.rows != rows) throw FormatError("chunk vertex count does not match its occupancy");
        LevelStorage<S> st;
        if (h.vector_quantized) {
            st.codebook = r.halves<S>((std::size_t{1} << h.bitwidth) * k);
            st.indices = unpack_indices(r.raw(vq::index_bytes(rows, h.bitwidth)), rows, h.bitwidth);
        } else {
            st.features = r.halves<S>(rows * k);
        }
        g.layouts.push_back(std::move(layout));
        g.levels.push_back(std::move(st));
    }
    return f;
}

template <class S>
NeuralField<S> decode(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const int levels = read_header(r).levels;
    return decode_prefix<S>(bytes, levels);
}

}  // namespace vqad::codec
