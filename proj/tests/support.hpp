#pragma once

// Shared fixtures for the test binaries.

#include "vqad/field.hpp"

#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace vqad::fixtures {

/// A small random model: any task, raw or baked storage, sparse or dense
/// occupancy. Values are fp16-representable or not at random.
inline NeuralField<float> random_model(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, 1 << 20);
    const TaskKind task = static_cast<TaskKind>(pick(rng) % 3);
    const int dims = task_dims(task);
    const int levels = 1 + pick(rng) % 4;
    const int base = 1 + pick(rng) % 3;
    const int k = 1 + pick(rng) % 6;
    const bool quantized = pick(rng) % 2 == 0;
    const int b = 1 + pick(rng) % 8;
    const int hidden = 1 + pick(rng) % 12;

    std::uniform_real_distribution<double> u(-0.8, 0.8);
    const OccupancyPredicate occ = pick(rng) % 2 ? occupancy::dense()
                                                 : occupancy::sphere({u(rng) * 0.3, u(rng) * 0.3, u(rng) * 0.3},
                                                                     0.3 + 0.5 * std::abs(u(rng)));
    NeuralField<float> f;
    f.task = task;
    f.grid = build_pyramid<float>({dims, levels, base, k}, occ, quantized ? StorageKind::BakedVQ : StorageKind::Raw,
                                  b, GridInit::Normal, static_cast<std::uint64_t>(pick(rng)));
    f.mlp = DecoderMLP<float>::make(mlp_input_width(task, k), hidden, head_width(task),
                                    static_cast<std::uint64_t>(pick(rng)));
    for (auto& c : f.background) c = static_cast<float>(0.5 + 0.5 * u(rng));
    return f;
}

/// The model whose header is pinned in data/golden_header.hex.
inline NeuralField<float> golden_model() {
    NeuralField<float> f;
    f.task = TaskKind::Image;
    f.grid = build_pyramid<float>({2, 2, 2, 2}, occupancy::dense(), StorageKind::BakedVQ, 2, GridInit::Zero, 1);
    f.mlp = DecoderMLP<float>::make(2, 4, 3, 1);
    f.background = {1.0f, 0.5f, 0.25f};
    return f;
}

/// Whitespace-separated hex bytes; lines starting with '#' are comments.
inline std::vector<std::uint8_t> read_hex(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::uint8_t> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) out.push_back(static_cast<std::uint8_t>(std::stoul(tok, nullptr, 16)));
    }
    return out;
}

}  // namespace vqad::fixtures
