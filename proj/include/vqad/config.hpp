#pragma once

// JSON run configuration. Every section is checked for unknown keys and
// value ranges before any work starts. Relative paths resolve against the
// directory holding the config file.
//
// {
//   "task": "image" | "sdf" | "radiance",
//   "dataset": {"kind": "png", "path": "..."}
//            | {"kind": "synthetic_image", "size": 128}
//            | {"kind": "sdf_shape", "shape": "sphere", "params": [0.6], "samples": 20000, "seed": 1}
//            | {"kind": "views", "path": "dir-with-cameras.json"}
//            | {"kind": "synthetic_volume", "views": 8, "size": 32},
//   "grid": {"levels": 4, "base_resolution": 8, "feature_width": 8,
//            "occupancy": {"kind": "dense" | "box" | "sphere" | "scene" | "depth",
//                          "min": [...], "max": [...], "center": [...], "radius": r}},
//   "vq": {"bitwidth": 4},
//   "train": {"mode": "vqad", "epochs": 500, "steps": 0, "batch_size": 4096,
//             "learning_rate": 0.001, "grid_lr_multiplier": 100, "seed": 1,
//             "lod_sampling": "weighted" | "finest_only", "samples_per_cell": 16},
//   "model": {"hidden_width": 128},
//   "output_dir": "out"
// }

#include "vqad/error.hpp"
#include "vqad/eval.hpp"
#include "vqad/grid.hpp"
#include "vqad/scenes.hpp"
#include "vqad/train.hpp"
#include "vqad/vq.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

namespace vqad {

using Json = nlohmann::json;

struct DatasetConfig {
    std::string kind = "synthetic_image";
    std::filesystem::path path;
    int size = 128;
    scenes::SdfShape shape;
    std::size_t samples = 20000;
    std::uint64_t seed = 1;
    int views = 8;
};

struct OccupancyConfig {
    std::string kind = "dense";
    std::array<double, 3> min{-1, -1, -1};
    std::array<double, 3> max{1, 1, 1};
    std::array<double, 3> center{0, 0, 0};
    double radius = 1.0;
};

struct RunConfig {
    TaskKind task = TaskKind::Image;
    DatasetConfig dataset;
    GridConfig grid{2, 4, 8, 8};
    OccupancyConfig occupancy;
    TrainConfig train;
    std::filesystem::path output_dir = "out";
    Json source;  // the document as given
};

namespace config_detail {

inline void only_keys(const Json& j, const std::string& where, std::initializer_list<const char*> keys) {
    if (!j.is_object()) throw FormatError(where + ": expected an object");
    const std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw FormatError(where + ": unknown key '" + k + "'");
    }
}

template <class T>
T get(const Json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw FormatError(where + "." + key + ": wrong type");
    }
}

inline std::array<double, 3> vec3(const Json& j, const char* key, std::array<double, 3> fallback,
                                  const std::string& where) {
    if (!j.contains(key)) return fallback;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() < 2 || a.size() > 3) throw FormatError(where + "." + key + ": expected 2 or 3 numbers");
    std::array<double, 3> v{0, 0, 0};
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number()) throw FormatError(where + "." + key + ": expected numbers");
        v[i] = a[i].get<double>();
    }
    return v;
}

inline void positive(long long v, const std::string& what) {
    if (v < 1) throw FormatError(what + " must be positive");
}

}  // namespace config_detail

inline TaskKind parse_task(const std::string& s) {
    if (s == "image") return TaskKind::Image;
    if (s == "sdf") return TaskKind::Sdf;
    if (s == "radiance") return TaskKind::Radiance;
    throw FormatError("task must be image, sdf or radiance (got '" + s + "')");
}

inline std::string task_name(TaskKind t) {
    switch (t) {
    case TaskKind::Image: return "image";
    case TaskKind::Sdf: return "sdf";
    case TaskKind::Radiance: return "radiance";
    }
    return "?";
}

inline TrainMode parse_mode(const std::string& s) {
    if (s == "uncompressed") return TrainMode::Uncompressed;
    if (s == "vqad") return TrainMode::Vqad;
    if (s == "random_index" || s == "random-index") return TrainMode::RandomIndex;
    throw FormatError("train.mode must be uncompressed, vqad or random_index (got '" + s + "')");
}

inline RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir = ".") {
    using namespace config_detail;
    only_keys(j, "config", {"task", "dataset", "grid", "vq", "train", "model", "output_dir"});
    RunConfig c;
    c.source = j;
    if (!j.contains("task")) throw FormatError("config: missing 'task'");
    c.task = parse_task(get<std::string>(j, "task", "", "config"));

    const Json ds = j.value("dataset", Json::object());
    only_keys(ds, "dataset", {"kind", "path", "size", "shape", "params", "samples", "seed", "views"});
    auto& d = c.dataset;
    d.kind = get<std::string>(ds, "kind", c.task == TaskKind::Image ? "synthetic_image"
                                          : c.task == TaskKind::Sdf ? "sdf_shape"
                                                                    : "synthetic_volume",
                              "dataset");
    const std::set<std::string> image_kinds{"png", "synthetic_image"}, sdf_kinds{"sdf_shape"},
        volume_kinds{"views", "synthetic_volume"};
    const auto& allowed = c.task == TaskKind::Image ? image_kinds : c.task == TaskKind::Sdf ? sdf_kinds : volume_kinds;
    if (!allowed.count(d.kind)) throw FormatError("dataset.kind '" + d.kind + "' does not fit task " + task_name(c.task));
    if (ds.contains("path")) {
        d.path = get<std::string>(ds, "path", "", "dataset");
        if (d.path.is_relative()) d.path = base_dir / d.path;
    } else if (d.kind == "png" || d.kind == "views") {
        throw FormatError("dataset.path is required for kind " + d.kind);
    }
    d.size = get<int>(ds, "size", c.task == TaskKind::Radiance ? 32 : 128, "dataset");
    positive(d.size, "dataset.size");
    d.shape.name = get<std::string>(ds, "shape", "sphere", "dataset");
    d.shape.params = get<std::vector<double>>(ds, "params", {}, "dataset");
    d.shape({0.0, 0.0, 0.0});  // rejects unknown shape names
    d.samples = get<std::size_t>(ds, "samples", 20000, "dataset");
    positive(static_cast<long long>(d.samples), "dataset.samples");
    d.seed = get<std::uint64_t>(ds, "seed", 1, "dataset");
    d.views = get<int>(ds, "views", 8, "dataset");
    positive(d.views, "dataset.views");

    const Json g = j.value("grid", Json::object());
    only_keys(g, "grid", {"levels", "base_resolution", "feature_width", "occupancy"});
    c.grid.dims = task_dims(c.task);
    c.grid.levels = get<int>(g, "levels", 4, "grid");
    c.grid.base_resolution = get<int>(g, "base_resolution", 8, "grid");
    c.grid.feature_width = get<int>(g, "feature_width", 8, "grid");
    if (c.grid.levels > 255 || c.grid.feature_width > 255) throw FormatError("grid: levels and feature_width must fit in a byte");
    try {
        c.grid.validate();
    } catch (const std::exception& e) {
        throw FormatError(std::string("grid: ") + e.what());
    }
    const Json occ = g.value("occupancy", Json::object());
    only_keys(occ, "grid.occupancy", {"kind", "min", "max", "center", "radius"});
    auto& o = c.occupancy;
    o.kind = get<std::string>(occ, "kind", c.task == TaskKind::Radiance ? "scene" : "dense", "grid.occupancy");
    if (o.kind != "dense" && o.kind != "box" && o.kind != "sphere" && o.kind != "scene" && o.kind != "depth") {
        throw FormatError("grid.occupancy.kind must be dense, box, sphere, scene or depth");
    }
    if ((o.kind == "scene" && d.kind != "synthetic_volume") || (o.kind == "depth" && d.kind != "views")) {
        throw FormatError("grid.occupancy.kind '" + o.kind + "' needs a matching volume dataset");
    }
    o.min = vec3(occ, "min", o.min, "grid.occupancy");
    o.max = vec3(occ, "max", o.max, "grid.occupancy");
    o.center = vec3(occ, "center", o.center, "grid.occupancy");
    o.radius = get<double>(occ, "radius", 1.0, "grid.occupancy");
    if (!(o.radius > 0)) throw FormatError("grid.occupancy.radius must be positive");

    const Json v = j.value("vq", Json::object());
    only_keys(v, "vq", {"bitwidth"});
    c.train.bitwidth = get<int>(v, "bitwidth", 4, "vq");

    const Json t = j.value("train", Json::object());
    only_keys(t, "train", {"mode", "epochs", "steps", "batch_size", "learning_rate", "grid_lr_multiplier", "seed",
                           "lod_sampling", "samples_per_cell"});
    auto& tc = c.train;
    tc.mode = parse_mode(get<std::string>(t, "mode", "vqad", "train"));
    tc.epochs = get<int>(t, "epochs", 500, "train");
    tc.steps = get<int>(t, "steps", 0, "train");
    tc.batch_size = get<int>(t, "batch_size", 4096, "train");
    tc.learning_rate = get<double>(t, "learning_rate", 1e-3, "train");
    tc.grid_lr_multiplier = get<double>(t, "grid_lr_multiplier", 100.0, "train");
    tc.seed = get<std::uint64_t>(t, "seed", 1, "train");
    const auto lod = get<std::string>(t, "lod_sampling", "weighted", "train");
    if (lod == "weighted") {
        tc.lod_sampling = LodSampling::Weighted;
    } else if (lod == "finest_only") {
        tc.lod_sampling = LodSampling::FinestOnly;
    } else {
        throw FormatError("train.lod_sampling must be weighted or finest_only");
    }
    tc.samples_per_cell = get<int>(t, "samples_per_cell", 16, "train");
    if (tc.steps < 0 || tc.epochs < 0) throw FormatError("train: epochs and steps must not be negative");

    const Json m = j.value("model", Json::object());
    only_keys(m, "model", {"hidden_width"});
    tc.hidden_width = get<int>(m, "hidden_width", 128, "model");
    if (tc.hidden_width > 65535) throw FormatError("model.hidden_width must fit in 16 bits");
    tc.validate();

    c.output_dir = get<std::string>(j, "output_dir", "out", "config");
    if (c.output_dir.is_relative()) c.output_dir = base_dir / c.output_dir;
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config " + path.string());
    Json j;
    try {
        in >> j;
    } catch (const Json::exception& e) {
        throw FormatError("config " + path.string() + ": " + e.what());
    }
    return parse_run_config(j, path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

/// Training data, evaluation set and occupancy for a configuration.
struct TaskData {
    Dataset train;
    eval::EvalSet eval;
    OccupancyPredicate occupancy;
    std::array<double, 3> background{1, 1, 1};
};

inline TaskData load_task_data(const RunConfig& c) {
    TaskData td;
    const auto& d = c.dataset;
    if (d.kind == "png" || d.kind == "synthetic_image") {
        Image img;
        if (d.kind == "png") {
            const Image raw = read_png(d.path);
            const float white[3] = {1, 1, 1};
            img = premultiply_over(raw, white);
        } else {
            img = scenes::synthetic_image(d.size);
        }
        td.train = scenes::image_dataset(img);
        td.eval = eval::image_eval_set(img);
    } else if (d.kind == "sdf_shape") {
        td.train = scenes::sdf_dataset(d.shape, d.samples, d.seed);
        td.eval = eval::sdf_eval_set(d.shape, d.size);
    } else {
        std::vector<scenes::View> views;
        std::vector<std::array<double, 3>> points;
        if (d.kind == "views") {
            auto cap = scenes::load_capture(d.path);
            views = std::move(cap.views);
            points = std::move(cap.points);
            td.background = cap.background;
        } else {
            const auto scene = scenes::default_volume_scene();
            views = scenes::render_orbit(scene, d.views, d.size);
            td.background = scene.background;
            if (c.occupancy.kind == "scene") td.occupancy = scene.occupancy();
        }
        if (c.occupancy.kind == "depth") {
            if (points.empty()) throw FormatError("occupancy 'depth' needs depth maps in cameras.json");
            td.occupancy = occupancy::points(points);
        }
        td.train = scenes::volume_dataset(views);
        td.eval = eval::view_eval_set(views, c.train.samples_per_cell);
    }
    const auto& o = c.occupancy;
    if (o.kind == "dense") td.occupancy = occupancy::dense();
    if (o.kind == "box") td.occupancy = occupancy::box(o.min, o.max);
    if (o.kind == "sphere") td.occupancy = occupancy::sphere(o.center, o.radius);
    return td;
}

}  // namespace vqad
