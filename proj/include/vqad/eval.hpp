#pragma once

// Image metrics, per-task evaluation renders and rate-distortion points
// computed from a bitstream's level prefixes.

#include "vqad/codec.hpp"
#include "vqad/error.hpp"
#include "vqad/image.hpp"
#include "vqad/scenes.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <vector>

namespace vqad::eval {

inline constexpr double kPsnrCap = 99.0;

inline void check_same_shape(const Image& a, const Image& b, const char* what) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
        throw std::invalid_argument(std::string(what) + ": image dimensions differ");
    }
}

inline double mse(const Image& a, const Image& b) {
    check_same_shape(a, b, "mse");
    double s = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        s += d * d;
    }
    return a.data.empty() ? 0.0 : s / static_cast<double>(a.data.size());
}

/// Peak 1.0; exact matches (and anything above the cap) report 99 dB.
inline double psnr(const Image& a, const Image& b) {
    const double e = mse(a, b);
    if (e <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / e));
}

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(size);
    double total = 0;
    for (int i = 0; i < size; ++i) {
        const double x = i - (size - 1) / 2.0;
        w[i] = std::exp(-x * x / (2 * sigma * sigma));
        total += w[i];
    }
    for (auto& v : w) v /= total;
    return w;
}

// Separable "valid" filtering of one channel.
inline std::vector<double> filter_valid(const std::vector<double>& img, int w, int h, const std::vector<double>& k) {
    const int n = static_cast<int>(k.size());
    const int ow = w - n + 1, oh = h - n + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h), out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < n; ++i) s += k[i] * img[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = s;
        }
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0;
            for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = s;
        }
    return out;
}

}  // namespace detail

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1, averaged over window positions and channels.
inline double ssim(const Image& a, const Image& b) {
    check_same_shape(a, b, "ssim");
    constexpr int kWindow = 11;
    if (a.width < kWindow || a.height < kWindow) throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const auto win = detail::gaussian_window(kWindow, 1.5);
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const std::size_t n = static_cast<std::size_t>(a.width) * a.height;
    double total = 0;
    for (int c = 0; c < a.channels; ++c) {
        std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = a.data[i * a.channels + c];
            y[i] = b.data[i * b.channels + c];
            xx[i] = x[i] * x[i];
            yy[i] = y[i] * y[i];
            xy[i] = x[i] * y[i];
        }
        const auto mx = detail::filter_valid(x, a.width, a.height, win);
        const auto my = detail::filter_valid(y, a.width, a.height, win);
        const auto sxx = detail::filter_valid(xx, a.width, a.height, win);
        const auto syy = detail::filter_valid(yy, a.width, a.height, win);
        const auto sxy = detail::filter_valid(xy, a.width, a.height, win);
        double s = 0;
        for (std::size_t i = 0; i < mx.size(); ++i) {
            const double vx = sxx[i] - mx[i] * mx[i];
            const double vy = syy[i] - my[i] * my[i];
            const double cov = sxy[i] - mx[i] * my[i];
            s += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
        }
        total += s / static_cast<double>(mx.size());
    }
    return total / a.channels;
}

/// Reference images plus whatever is needed to render the model the same way.
struct EvalSet {
    TaskKind task = TaskKind::Image;
    std::vector<Image> references;
    std::vector<scenes::Camera> cameras;  // radiance only, one per reference
    int samples_per_cell = 4;
};

inline EvalSet image_eval_set(const Image& reference) {
    EvalSet e;
    e.task = TaskKind::Image;
    e.references.push_back(reference);
    return e;
}

inline EvalSet sdf_eval_set(const scenes::SdfShape& shape, int size = 128) {
    EvalSet e;
    e.task = TaskKind::Sdf;
    e.references.push_back(scenes::sdf_slice_reference(shape, size));
    return e;
}

inline EvalSet view_eval_set(const std::vector<scenes::View>& views, int samples_per_cell = 4) {
    EvalSet e;
    e.task = TaskKind::Radiance;
    e.samples_per_cell = samples_per_cell;
    for (const auto& v : views) {
        e.references.push_back(v.image);
        e.cameras.push_back(v.camera);
    }
    return e;
}

template <class S>
std::vector<Image> render_set(const NeuralField<S>& field, const EvalSet& set, int lod) {
    if (field.task != set.task) throw FormatError("eval: model task does not match the evaluation set");
    std::vector<Image> out;
    for (std::size_t i = 0; i < set.references.size(); ++i) {
        const Image& ref = set.references[i];
        switch (set.task) {
        case TaskKind::Image:
            out.push_back(scenes::render_image(field, ref.width, ref.height, lod));
            break;
        case TaskKind::Sdf:
            out.push_back(scenes::sdf_slice(field, ref.width, lod));
            break;
        case TaskKind::Radiance:
            out.push_back(scenes::render_view(field, set.cameras.at(i), lod, set.samples_per_cell));
            break;
        }
    }
    return out;
}

struct Quality {
    double psnr_db = 0;
    double ssim = 0;
};

/// Mean over references.
inline Quality compare(const std::vector<Image>& renders, const std::vector<Image>& references) {
    if (renders.size() != references.size() || renders.empty()) throw std::invalid_argument("compare: view count mismatch");
    Quality q;
    for (std::size_t i = 0; i < renders.size(); ++i) {
        q.psnr_db += psnr(renders[i], references[i]);
        q.ssim += ssim(renders[i], references[i]);
    }
    q.psnr_db /= static_cast<double>(renders.size());
    q.ssim /= static_cast<double>(renders.size());
    return q;
}

template <class S>
Quality evaluate(const NeuralField<S>& field, const EvalSet& set, int lod) {
    return compare(render_set(field, set, lod), set.references);
}

struct RDPoint {
    int lod = 0;
    std::size_t bytes = 0;  // cumulative stream bytes up to and including this level
    double psnr_db = 0;
    double ssim = 0;
};

/// One point per level: the prefix carrying levels 0..lod is decoded on its
/// own and rendered at lod. `on_render` sees each render (for writing PNGs).
template <class S, class F>
std::vector<RDPoint> rate_distortion(const EvalSet& set, std::span<const std::uint8_t> stream, F&& on_render) {
    const auto full = codec::decode<S>(stream);
    const auto sizes = codec::size_report(full).prefix_sizes();
    std::vector<RDPoint> points;
    for (int l = 1; l <= full.level_count(); ++l) {
        const auto prefix = codec::decode_prefix<S>(stream.first(sizes[l - 1]), l);
        const auto renders = render_set(prefix, set, l - 1);
        on_render(l - 1, renders);
        const Quality q = compare(renders, set.references);
        points.push_back({l - 1, sizes[l - 1], q.psnr_db, q.ssim});
    }
    return points;
}

template <class S>
std::vector<RDPoint> rate_distortion(const EvalSet& set, std::span<const std::uint8_t> stream) {
    return rate_distortion<S>(set, stream, [](int, const std::vector<Image>&) {});
}

inline void write_csv(std::ostream& out, const std::vector<RDPoint>& points) {
    out << "lod,bytes,psnr_db,ssim\n";
    for (const auto& p : points) {
        out << p.lod << ',' << p.bytes << ',' << std::fixed << std::setprecision(4) << p.psnr_db << ','
            << std::setprecision(6) << p.ssim << '\n';
        out.unsetf(std::ios::floatfield);
    }
}

inline void write_csv(const std::filesystem::path& path, const std::vector<RDPoint>& points) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    write_csv(out, points);
}

}  // namespace vqad::eval
