#pragma once

// Stochastic optimization of a neural field against a dataset: one LOD is
// drawn per batch, the per-sample MSE is averaged over the batch and Adam
// updates the decoder at the base rate and the grid (features, logits,
// codebooks) at the base rate times a multiplier.

#include "vqad/baselines.hpp"
#include "vqad/diffcore.hpp"
#include "vqad/error.hpp"
#include "vqad/field.hpp"
#include "vqad/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace vqad {

enum class TrainMode { Uncompressed, Vqad, RandomIndex };
enum class LodSampling { Weighted, FinestOnly };

struct TrainConfig {
    TrainMode mode = TrainMode::Vqad;
    int epochs = 500;
    int steps = 0;  // overrides epochs when positive
    int batch_size = 4096;
    double learning_rate = 1e-3;
    double grid_lr_multiplier = 100.0;
    int bitwidth = 4;
    std::uint64_t seed = 1;
    LodSampling lod_sampling = LodSampling::Weighted;
    int samples_per_cell = 16;
    int hidden_width = 128;

    void validate() const {
        if (epochs < 1 && steps < 1) throw FormatError("train: epochs or steps must be positive");
        if (batch_size < 1) throw FormatError("train: batch size must be positive");
        if (!(learning_rate >= 0.0)) throw FormatError("train: learning rate must be non-negative");
        if (!(grid_lr_multiplier >= 1.0)) throw FormatError("train: grid learning-rate multiplier must be >= 1");
        if (samples_per_cell < 1) throw FormatError("train: samples per cell must be positive");
        if (hidden_width < 1) throw FormatError("train: hidden width must be positive");
        if (mode != TrainMode::Uncompressed && (bitwidth < 1 || bitwidth > 16)) {
            throw FormatError("train: bitwidth must be in [1, 16]");
        }
    }
};

/// Supervision for one task. Identity tasks use `points`; the radiance task
/// uses `rays`. Targets are `target_width` floats per sample.
struct Dataset {
    TaskKind task = TaskKind::Image;
    int target_width = 3;
    std::vector<std::array<double, 3>> points;
    std::vector<Ray> rays;
    std::vector<float> targets;

    std::size_t size() const { return task == TaskKind::Radiance ? rays.size() : points.size(); }

    void validate() const {
        if (size() == 0) throw FormatError("dataset: no samples");
        if (targets.size() != size() * static_cast<std::size_t>(target_width)) {
            throw FormatError("dataset: target count mismatch");
        }
        for (float t : targets) {
            if (!std::isfinite(t)) throw FormatError("dataset: non-finite target");
        }
    }
};

/// P(level l) = 2^l / (2^L - 1): each level is twice as likely as the one
/// coarser than it.
inline std::vector<double> lod_probabilities(int levels) {
    std::vector<double> p(levels);
    const double total = std::ldexp(1.0, levels) - 1.0;
    for (int l = 0; l < levels; ++l) p[l] = std::ldexp(1.0, l) / total;
    return p;
}

inline int sample_lod(int levels, std::mt19937_64& rng) {
    if (levels < 1 || levels > 62) throw std::out_of_range("sample_lod: bad level count");
    const std::uint64_t total = (std::uint64_t{1} << levels) - 1;
    const std::uint64_t u = std::uniform_int_distribution<std::uint64_t>(0, total - 1)(rng);
    // levels 0..l together cover 2^(l+1) - 1 slots
    int l = 0;
    while (u >= (std::uint64_t{1} << (l + 1)) - 1) ++l;
    return l;
}

/// Records the squared error of one sample at `lod`.
template <class S>
diff::NodeId record_sample_loss(diff::Tape<S>& tape, const NeuralField<S>& field, FieldGrads<S>* grads,
                                const Dataset& data, std::size_t i, int lod, int per_cell, std::mt19937_64* rng,
                                vq::LookupPath path) {
    const std::size_t w = data.target_width;
    std::array<S, 3> target{};
    for (std::size_t c = 0; c < w; ++c) target[c] = static_cast<S>(data.targets[i * w + c]);
    const std::span<const S> t(target.data(), w);
    if (data.task == TaskKind::Radiance) {
        const diff::NodeId out = record_render(tape, field, grads, data.rays[i], lod, per_cell, rng, path);
        return tape.mean_squared_error(tape.slice(out, 0, 3), t);
    }
    const diff::NodeId out = record_decode(tape, field, grads, data.points[i], nullptr, lod, path);
    return tape.mean_squared_error(out, t);
}

/// Mean over `batch` of the per-sample MSE at one LOD, evaluated on the hard
/// (stored) path.
template <class S>
double loss(const NeuralField<S>& field, const Dataset& data, std::span<const std::size_t> batch, int lod,
            int per_cell = 4) {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    diff::Tape<S> tape;
    double total = 0;
    for (std::size_t i : batch) {
        tape.clear();
        const auto node = record_sample_loss(tape, field, static_cast<FieldGrads<S>*>(nullptr), data, i, lod,
                                             per_cell, nullptr, vq::LookupPath::Hard);
        total += static_cast<double>(tape.value(node)[0]);
    }
    const double mean = total / static_cast<double>(batch.size());
    if (!std::isfinite(mean)) throw Divergence("loss: non-finite value at lod " + std::to_string(lod));
    return mean;
}

template <class S>
struct AdamMoments {
    std::string name;
    std::vector<S> first;
    std::vector<S> second;
};

/// Adam with beta = (0.9, 0.999) and eps = 1e-8.
template <class S>
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<AdamMoments<S>> blocks;

    static AdamState like(NeuralField<S>& field) {
        AdamState st;
        field.for_each_block([&](const std::string& name, std::vector<S>& v) {
            st.blocks.push_back({name, std::vector<S>(v.size(), S(0)), std::vector<S>(v.size(), S(0))});
        });
        return st;
    }

    /// One update of every block. Grid blocks use `grid_lr`, the decoder
    /// uses `lr`.
    void update(NeuralField<S>& field, FieldGrads<S>& grads, double lr, double grid_lr) {
        ++step;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
        std::vector<std::vector<S>*> gs;
        grads.for_each_block([&](const std::string&, std::vector<S>& g) { gs.push_back(&g); });

        std::size_t b = 0;
        field.for_each_block([&](const std::string& name, std::vector<S>& param) {
            auto& mom = blocks.at(b);
            const auto& g = *gs.at(b);
            ++b;
            if (mom.name != name || g.size() != param.size()) throw FormatError("adam: block layout changed");
            const double rate = name.rfind("mlp.", 0) == 0 ? lr : grid_lr;
            if (rate == 0.0) return;
            const S b1 = static_cast<S>(beta1), b2 = static_cast<S>(beta2);
            const S step_size = static_cast<S>(rate / c1);
            const S inv_c2 = static_cast<S>(1.0 / c2);
            const S eps = static_cast<S>(epsilon);
            for (std::size_t i = 0; i < param.size(); ++i) {
                mom.first[i] = b1 * mom.first[i] + (S(1) - b1) * g[i];
                mom.second[i] = b2 * mom.second[i] + (S(1) - b2) * g[i] * g[i];
                param[i] -= step_size * mom.first[i] / (std::sqrt(mom.second[i] * inv_c2) + eps);
                if (!std::isfinite(param[i])) {
                    throw Divergence("adam: non-finite parameter in " + name + " at step " + std::to_string(step));
                }
            }
        });
    }
};

template <class S>
struct TrainedModel {
    NeuralField<S> field;
    TrainConfig config;
    AdamState<S> optimizer;
    std::vector<double> loss_history;  // mean batch loss per step
};

/// Fresh model for a task: grid storage follows the training mode, every
/// grid entry starts at N(0, 0.01^2).
template <class S>
NeuralField<S> init_field(TaskKind task, const GridConfig& grid, const OccupancyPredicate& occupancy,
                          const TrainConfig& config) {
    config.validate();
    NeuralField<S> f;
    f.task = task;
    const StorageKind kind = config.mode == TrainMode::Uncompressed ? StorageKind::Raw
                             : config.mode == TrainMode::Vqad       ? StorageKind::SoftVQ
                                                                    : StorageKind::BakedVQ;
    f.grid = build_pyramid<S>(grid, occupancy, kind, config.bitwidth, GridInit::Normal, config.seed);
    if (kind == StorageKind::BakedVQ) {
        for (int l = 0; l < f.grid.level_count(); ++l) {
            f.grid.levels[l].indices =
                baselines::random_index_grid(f.grid.vertex_count(l), config.bitwidth, config.seed * 7919 + l);
        }
    }
    f.mlp = DecoderMLP<S>::make(mlp_input_width(task, grid.feature_width), config.hidden_width, head_width(task),
                                config.seed * 104729 + 17);
    return f;
}

inline int total_steps(const TrainConfig& config, std::size_t samples) {
    if (config.steps > 0) return config.steps;
    const std::size_t per_epoch = (samples + config.batch_size - 1) / config.batch_size;
    return static_cast<int>(per_epoch * static_cast<std::size_t>(config.epochs));
}

/// Runs `steps` optimizer steps on an existing model. Deterministic given
/// the model state and seed.
template <class S>
void train_steps(TrainedModel<S>& model, const Dataset& data, int steps) {
    data.validate();
    const TrainConfig& cfg = model.config;
    NeuralField<S>& field = model.field;
    if (data.task != field.task) throw FormatError("train: dataset task does not match the model");

    std::mt19937_64 rng(cfg.seed ^ (0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(model.optimizer.step + 1)));
    FieldGrads<S> grads = FieldGrads<S>::like(field);
    diff::Tape<S> tape;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;
    const std::size_t batch = std::min<std::size_t>(cfg.batch_size, data.size());
    const vq::LookupPath path =
        field.grid.kind == StorageKind::SoftVQ ? vq::LookupPath::StraightThrough : vq::LookupPath::Hard;
    const int levels = field.level_count();

    for (int s = 0; s < steps; ++s) {
        const int lod = cfg.lod_sampling == LodSampling::FinestOnly ? levels - 1 : sample_lod(levels, rng);
        grads.zero();
        double total = 0;
        const S seed = S(1) / static_cast<S>(batch);
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const std::size_t i = order[cursor++];
            tape.clear();
            const auto node = record_sample_loss(tape, field, &grads, data, i, lod, cfg.samples_per_cell, &rng, path);
            total += static_cast<double>(tape.value(node)[0]);
            tape.backward(node, seed);
        }
        const double mean = total / static_cast<double>(batch);
        if (!std::isfinite(mean)) {
            std::ostringstream msg;
            msg << "train: non-finite loss at step " << model.optimizer.step << " (lod " << lod << ")";
            throw Divergence(msg.str());
        }
        model.loss_history.push_back(mean);
        model.optimizer.update(field, grads, cfg.learning_rate, cfg.learning_rate * cfg.grid_lr_multiplier);
    }
}

template <class S>
TrainedModel<S> train(const TrainConfig& config, const Dataset& data, const GridConfig& grid,
                      const OccupancyPredicate& occupancy) {
    config.validate();
    data.validate();
    if (grid.dims != task_dims(data.task)) throw FormatError("train: grid dimensionality does not match the task");
    TrainedModel<S> model;
    model.config = config;
    model.field = init_field<S>(data.task, grid, occupancy, config);
    model.optimizer = AdamState<S>::like(model.field);
    train_steps(model, data, total_steps(config, data.size()));
    return model;
}

}  // namespace vqad
