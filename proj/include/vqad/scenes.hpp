#pragma once

// Datasets and closed-form ground truth: a procedural test image, analytic
// signed distance shapes, and a constant-density primitive scene whose views
// can be rendered exactly.

#include "vqad/error.hpp"
#include "vqad/field.hpp"
#include "vqad/image.hpp"
#include "vqad/train.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace vqad::scenes {

using Vec3 = std::array<double, 3>;

/// Pixel (px, py) center in [-1, 1]^2; row 0 maps to y near -1.
inline std::array<double, 3> pixel_coordinate(int px, int py, int width, int height) {
    return {(px + 0.5) / width * 2.0 - 1.0, (py + 0.5) / height * 2.0 - 1.0, 0.0};
}

/// Deterministic test card: smooth gradient, soft discs, stripes and a
/// checkerboard patch, so both low and high frequencies are present.
inline Image synthetic_image(int size = 128) {
    Image img(size, size, 3);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const auto p = pixel_coordinate(x, y, size, size);
            const double u = p[0], v = p[1];
            double r = 0.55 + 0.35 * u, g = 0.45 + 0.3 * v, b = 0.6 - 0.25 * (u + v) * 0.5;

            auto disc = [&](double cx, double cy, double rad, std::array<double, 3> col) {
                const double d = std::hypot(u - cx, v - cy);
                const double a = std::clamp((rad - d) * size * 0.25, 0.0, 1.0);
                r = r * (1 - a) + col[0] * a;
                g = g * (1 - a) + col[1] * a;
                b = b * (1 - a) + col[2] * a;
            };
            disc(-0.35, -0.3, 0.38, {0.9, 0.25, 0.2});
            disc(0.4, 0.35, 0.3, {0.15, 0.35, 0.85});
            disc(0.1, -0.05, 0.16, {0.95, 0.85, 0.2});

            if (u > 0.2 && v < -0.2) {
                const double s = 0.5 + 0.5 * std::sin(u * 18.0 * std::numbers::pi);
                r = r * 0.6 + 0.4 * s;
                g = g * 0.6 + 0.4 * (1 - s);
            }
            if (u < -0.3 && v > 0.3) {
                const bool check = (static_cast<int>(std::floor((u + 1) * 10)) + static_cast<int>(std::floor((v + 1) * 10))) % 2;
                const double c = check ? 0.85 : 0.15;
                r = g = b = c;
            }
            img.at(x, y, 0) = static_cast<float>(std::clamp(r, 0.0, 1.0));
            img.at(x, y, 1) = static_cast<float>(std::clamp(g, 0.0, 1.0));
            img.at(x, y, 2) = static_cast<float>(std::clamp(b, 0.0, 1.0));
        }
    }
    return img;
}

/// One sample per pixel center.
inline Dataset image_dataset(const Image& img) {
    if (img.channels < 3) throw FormatError("image dataset: expects an RGB image");
    Dataset d;
    d.task = TaskKind::Image;
    d.target_width = 3;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            d.points.push_back(pixel_coordinate(x, y, img.width, img.height));
            for (int c = 0; c < 3; ++c) d.targets.push_back(img.at(x, y, c));
        }
    }
    return d;
}

template <class S>
Image render_image(const NeuralField<S>& field, int width, int height, int lod) {
    Image img(width, height, 3);
    diff::Tape<S> tape;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const auto p = pixel_coordinate(x, y, width, height);
            const std::span<const double> xy(p.data(), 2);
            if (!in_domain(field.grid.layouts, xy)) continue;  // black outside the occupied region
            tape.clear();
            const auto v = tape.value(record_decode<S>(tape, field, nullptr, xy, nullptr, lod, vq::LookupPath::Hard));
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(v[c]);
        }
    }
    return img;
}

/// Analytic signed distance shapes in normalized coordinates.
struct SdfShape {
    std::string name = "sphere";  // sphere | box | torus
    std::vector<double> params;   // sphere: r; box: hx hy hz; torus: R r

    double operator()(const Vec3& p) const {
        if (name == "sphere") {
            const double r = params.empty() ? 0.6 : params[0];
            return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) - r;
        }
        if (name == "box") {
            const Vec3 h = params.size() >= 3 ? Vec3{params[0], params[1], params[2]} : Vec3{0.5, 0.4, 0.3};
            Vec3 q;
            for (int a = 0; a < 3; ++a) q[a] = std::abs(p[a]) - h[a];
            const double outside = std::sqrt(std::max(q[0], 0.0) * std::max(q[0], 0.0) +
                                             std::max(q[1], 0.0) * std::max(q[1], 0.0) +
                                             std::max(q[2], 0.0) * std::max(q[2], 0.0));
            return outside + std::min(std::max({q[0], q[1], q[2]}), 0.0);
        }
        if (name == "torus") {
            const double big = params.size() >= 2 ? params[0] : 0.55;
            const double small = params.size() >= 2 ? params[1] : 0.2;
            const double qx = std::sqrt(p[0] * p[0] + p[2] * p[2]) - big;
            return std::sqrt(qx * qx + p[1] * p[1]) - small;
        }
        throw FormatError("unknown SDF shape '" + name + "'");
    }
};

/// Points drawn uniformly from the cube, each labelled with its distance.
inline Dataset sdf_dataset(const SdfShape& shape, std::size_t count, std::uint64_t seed) {
    Dataset d;
    d.task = TaskKind::Sdf;
    d.target_width = 1;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (std::size_t i = 0; i < count; ++i) {
        const Vec3 p{u(rng), u(rng), u(rng)};
        d.points.push_back(p);
        d.targets.push_back(static_cast<float>(shape(p)));
    }
    return d;
}

/// Grayscale visualization of a distance value for slice images.
inline float sdf_shade(double value) { return static_cast<float>(std::clamp(0.5 + 2.0 * value, 0.0, 1.0)); }

inline Image sdf_slice_reference(const SdfShape& shape, int size) {
    Image img(size, size, 3);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const auto p = pixel_coordinate(x, y, size, size);
            const float v = sdf_shade(shape({p[0], p[1], 0.0}));
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
        }
    return img;
}

template <class S>
Image sdf_slice(const NeuralField<S>& field, int size, int lod) {
    Image img(size, size, 3);
    diff::Tape<S> tape;
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const auto p = pixel_coordinate(x, y, size, size);
            float v = 0.0f;
            if (in_domain(field.grid.layouts, p)) {
                tape.clear();
                const auto out = record_decode<S>(tape, field, nullptr, p, nullptr, lod, vq::LookupPath::Hard);
                v = sdf_shade(static_cast<double>(tape.value(out)[0]));
            } else {
                v = 1.0f;
            }
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = v;
        }
    return img;
}

/// Pinhole camera looking down its local -z axis; `to_world` is a row-major
/// 4x4 camera-to-world transform and `focal` is in pixels.
struct Camera {
    std::array<double, 16> to_world{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    double focal = 1.0;
    int width = 0;
    int height = 0;

    Ray ray(double px, double py) const {
        const Vec3 local{(px - 0.5 * width) / focal, -(py - 0.5 * height) / focal, -1.0};
        Vec3 dir{}, origin{};
        for (int r = 0; r < 3; ++r) {
            dir[r] = to_world[r * 4] * local[0] + to_world[r * 4 + 1] * local[1] + to_world[r * 4 + 2] * local[2];
            origin[r] = to_world[r * 4 + 3];
        }
        return Ray::make(origin, dir);
    }

    Ray pixel_ray(int x, int y) const { return ray(x + 0.5, y + 0.5); }
};

/// Camera at `eye` looking at `target` with +y up.
inline Camera look_at(const Vec3& eye, const Vec3& target, double focal, int width, int height) {
    auto normalize = [](Vec3 v) {
        const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        return Vec3{v[0] / n, v[1] / n, v[2] / n};
    };
    auto cross = [](const Vec3& a, const Vec3& b) {
        return Vec3{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
    };
    const Vec3 back = normalize({eye[0] - target[0], eye[1] - target[1], eye[2] - target[2]});
    Vec3 up{0, 1, 0};
    if (std::abs(back[1]) > 0.999) up = {0, 0, 1};
    const Vec3 right = normalize(cross(up, back));
    const Vec3 true_up = cross(back, right);
    Camera c;
    c.focal = focal;
    c.width = width;
    c.height = height;
    for (int r = 0; r < 3; ++r) {
        c.to_world[r * 4 + 0] = right[r];
        c.to_world[r * 4 + 1] = true_up[r];
        c.to_world[r * 4 + 2] = back[r];
        c.to_world[r * 4 + 3] = eye[r];
    }
    return c;
}

/// Constant-density, constant-color primitive.
struct VolumePrimitive {
    std::string shape = "sphere";  // sphere | box
    Vec3 center{0, 0, 0};
    Vec3 size{0.5, 0.5, 0.5};      // sphere: size[0] is the radius; box: half extents
    double density = 8.0;
    Vec3 color{0.8, 0.3, 0.2};

    /// Entry and exit distances along the ray, if it hits.
    std::optional<std::pair<double, double>> intersect(const Ray& ray) const {
        const Vec3 o{ray.origin[0] - center[0], ray.origin[1] - center[1], ray.origin[2] - center[2]};
        const Vec3& d = ray.direction;
        if (shape == "sphere") {
            const double b = o[0] * d[0] + o[1] * d[1] + o[2] * d[2];
            const double c = o[0] * o[0] + o[1] * o[1] + o[2] * o[2] - size[0] * size[0];
            const double disc = b * b - c;
            if (disc <= 0) return std::nullopt;
            const double s = std::sqrt(disc);
            return std::make_pair(-b - s, -b + s);
        }
        double t0 = -1e30, t1 = 1e30;
        for (int a = 0; a < 3; ++a) {
            if (std::abs(d[a]) < 1e-15) {
                if (std::abs(o[a]) > size[a]) return std::nullopt;
                continue;
            }
            double ta = (-size[a] - o[a]) / d[a], tb = (size[a] - o[a]) / d[a];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
        }
        if (!(t1 > t0)) return std::nullopt;
        return std::make_pair(t0, t1);
    }
};

struct VolumeScene {
    std::vector<VolumePrimitive> primitives;
    Vec3 background{1, 1, 1};

    /// Exact emission-absorption render; primitives must not overlap.
    std::array<double, 3> render(const Ray& ray) const {
        std::vector<std::pair<std::pair<double, double>, const VolumePrimitive*>> hits;
        for (const auto& p : primitives) {
            auto h = p.intersect(ray);
            if (!h) continue;
            h->first = std::max(h->first, ray.near);
            h->second = std::min(h->second, ray.far);
            if (h->second > h->first) hits.push_back({*h, &p});
        }
        std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.first.first < b.first.first; });
        std::array<double, 3> out{0, 0, 0};
        double transmittance = 1.0;
        for (const auto& [span, prim] : hits) {
            const double a = 1.0 - std::exp(-prim->density * (span.second - span.first));
            for (int c = 0; c < 3; ++c) out[c] += transmittance * a * prim->color[c];
            transmittance *= 1.0 - a;
        }
        for (int c = 0; c < 3; ++c) out[c] += transmittance * background[c];
        return out;
    }

    /// Occupancy covering every primitive's bounding box.
    OccupancyPredicate occupancy() const {
        std::vector<OccupancyPredicate> parts;
        for (const auto& p : primitives) {
            if (p.shape == "sphere") {
                parts.push_back(occupancy::sphere(p.center, p.size[0]));
            } else {
                parts.push_back(occupancy::box({p.center[0] - p.size[0], p.center[1] - p.size[1], p.center[2] - p.size[2]},
                                               {p.center[0] + p.size[0], p.center[1] + p.size[1], p.center[2] + p.size[2]}));
            }
        }
        return [parts](const CellBounds& c, int dims) {
            for (const auto& p : parts)
                if (p(c, dims)) return true;
            return false;
        };
    }
};

/// A red sphere and a blue box side by side.
inline VolumeScene default_volume_scene() {
    VolumeScene s;
    s.primitives.push_back({"sphere", {-0.35, 0.0, 0.0}, {0.4, 0.4, 0.4}, 10.0, {0.85, 0.25, 0.2}});
    s.primitives.push_back({"box", {0.45, 0.0, 0.05}, {0.25, 0.35, 0.3}, 6.0, {0.2, 0.35, 0.9}});
    return s;
}

struct View {
    Camera camera;
    Image image;  // RGB, alpha already composited over the background
};

/// Views on a ring around the origin.
inline std::vector<View> render_orbit(const VolumeScene& scene, int count, int size, double radius = 3.0,
                                      double elevation = 0.5) {
    std::vector<View> views;
    const double focal = size * 1.2;
    for (int i = 0; i < count; ++i) {
        const double phi = 2.0 * std::numbers::pi * i / count;
        const Vec3 eye{radius * std::cos(phi), elevation + 0.3 * std::sin(3.0 * phi), radius * std::sin(phi)};
        View v{look_at(eye, {0, 0, 0}, focal, size, size), Image(size, size, 3)};
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const auto c = scene.render(v.camera.pixel_ray(x, y));
                for (int ch = 0; ch < 3; ++ch) v.image.at(x, y, ch) = static_cast<float>(c[ch]);
            }
        views.push_back(std::move(v));
    }
    return views;
}

/// One ray per pixel of every view.
inline Dataset volume_dataset(const std::vector<View>& views) {
    Dataset d;
    d.task = TaskKind::Radiance;
    d.target_width = 3;
    for (const auto& v : views) {
        for (int y = 0; y < v.image.height; ++y)
            for (int x = 0; x < v.image.width; ++x) {
                d.rays.push_back(v.camera.pixel_ray(x, y));
                for (int c = 0; c < 3; ++c) d.targets.push_back(v.image.at(x, y, c));
            }
    }
    return d;
}

template <class S>
Image render_view(const NeuralField<S>& field, const Camera& camera, int lod, int per_cell) {
    Image img(camera.width, camera.height, 3);
    diff::Tape<S> tape;
    for (int y = 0; y < camera.height; ++y)
        for (int x = 0; x < camera.width; ++x) {
            tape.clear();
            const auto v = tape.value(record_render<S>(tape, field, nullptr, camera.pixel_ray(x, y), lod, per_cell,
                                                       nullptr, vq::LookupPath::Hard));
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(v[c]);
        }
    return img;
}

/// Loaded multi-view capture: cameras, composited images and, when depth maps
/// are supplied, the back-projected point cloud.
struct Capture {
    std::vector<View> views;
    std::vector<Vec3> points;
    Vec3 background{1, 1, 1};
};

/// Reads `cameras.json` from `dir`:
///   {"background": [r,g,b], "depth_scale": s,
///    "views": [{"image": "a.png", "transform": [[4x4 rows]], "focal": f,
///               "depth": "a_depth.png"}]}
/// Depth PNG values (0..1 of full range) times depth_scale give distance
/// along the camera -z axis; zero depth means no surface.
inline Capture load_capture(const std::filesystem::path& dir) {
    std::ifstream in(dir / "cameras.json");
    if (!in) throw FormatError("cannot open " + (dir / "cameras.json").string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("cameras.json: ") + e.what());
    }
    Capture cap;
    if (j.contains("background")) {
        for (int c = 0; c < 3; ++c) cap.background[c] = j["background"].at(c).get<double>();
    }
    const double depth_scale = j.value("depth_scale", 1.0);
    const float bg[3] = {static_cast<float>(cap.background[0]), static_cast<float>(cap.background[1]),
                         static_cast<float>(cap.background[2])};
    for (const auto& jv : j.at("views")) {
        View v;
        const Image raw = read_png(dir / jv.at("image").get<std::string>());
        v.image = premultiply_over(raw, bg);
        v.camera.width = raw.width;
        v.camera.height = raw.height;
        v.camera.focal = jv.at("focal").get<double>();
        const auto& m = jv.at("transform");
        for (int r = 0; r < 4; ++r)
            for (int c = 0; c < 4; ++c) v.camera.to_world[r * 4 + c] = m.at(r).at(c).get<double>();
        if (jv.contains("depth")) {
            const Image depth = read_png(dir / jv["depth"].get<std::string>());
            for (int y = 0; y < depth.height; ++y)
                for (int x = 0; x < depth.width; ++x) {
                    const double z = depth.at(x, y, 0) * depth_scale;
                    if (z <= 0) continue;
                    const Ray r = v.camera.pixel_ray(x, y);
                    // distance along -z converts to ray distance through the local direction length
                    const double lx = (x + 0.5 - 0.5 * v.camera.width) / v.camera.focal;
                    const double ly = (y + 0.5 - 0.5 * v.camera.height) / v.camera.focal;
                    const double t = z * std::sqrt(1.0 + lx * lx + ly * ly);
                    cap.points.push_back({r.origin[0] + t * r.direction[0], r.origin[1] + t * r.direction[1],
                                          r.origin[2] + t * r.direction[2]});
                }
        }
        cap.views.push_back(std::move(v));
    }
    if (cap.views.empty()) throw FormatError("cameras.json: no views");
    return cap;
}

}  // namespace vqad::scenes
