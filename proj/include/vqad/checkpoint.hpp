#pragma once

// Training checkpoint: the model's .vqad stream (structure, occupancy and the
// fp16 payload) plus full-precision parameters, Adam moments and JSON
// metadata, so training can resume and soft indices survive.
//
//   "VQCK" u16 version
//   u32 n, n bytes JSON metadata
//   u32 n, n bytes .vqad stream (soft indices baked for this copy)
//   u32 count, then count x { u16 n, name; u32 n, n x f32 }

#include "vqad/codec.hpp"
#include "vqad/error.hpp"
#include "vqad/train.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

namespace vqad {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
    NeuralField<float> field;
    AdamState<float> optimizer;  // empty blocks when not resumable
    std::vector<double> loss_history;
    nlohmann::json meta = nlohmann::json::object();  // run config and notes
};

inline codec::Bytes serialize_checkpoint(const Checkpoint& ck) {
    NeuralField<float> stored = ck.field;
    if (stored.grid.kind == StorageKind::SoftVQ) stored.grid.bake();
    const codec::Bytes stream = codec::encode(stored);

    nlohmann::json meta = ck.meta;
    meta["storage"] = ck.field.grid.kind == StorageKind::Raw      ? "raw"
                      : ck.field.grid.kind == StorageKind::SoftVQ ? "soft"
                                                                  : "baked";
    meta["optimizer_step"] = ck.optimizer.step;
    meta["loss_history"] = ck.loss_history;
    const std::string text = meta.dump();

    codec::ByteWriter w;
    for (char c : std::string("VQCK")) w.u8(static_cast<std::uint8_t>(c));
    w.u16(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.raw(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    w.u32(static_cast<std::uint32_t>(stream.size()));
    w.raw(stream);

    std::vector<std::pair<std::string, std::vector<float>>> blocks;
    NeuralField<float> params = ck.field;
    params.for_each_block([&](const std::string& name, std::vector<float>& v) { blocks.push_back({"param/" + name, v}); });
    for (const auto& m : ck.optimizer.blocks) {
        blocks.push_back({"adam.m/" + m.name, m.first});
        blocks.push_back({"adam.v/" + m.name, m.second});
    }
    w.u32(static_cast<std::uint32_t>(blocks.size()));
    for (const auto& [name, values] : blocks) {
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.raw(std::span(reinterpret_cast<const std::uint8_t*>(name.data()), name.size()));
        w.u32(static_cast<std::uint32_t>(values.size()));
        for (float f : values) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            w.u32(bits);
        }
    }
    return w.take();
}

inline Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    codec::ByteReader r(bytes);
    const auto magic = r.raw(4);
    if (std::string(magic.begin(), magic.end()) != "VQCK") throw FormatError("not a checkpoint (bad magic)");
    if (r.u16() != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
    Checkpoint ck;
    const auto text = r.raw(r.u32());
    try {
        ck.meta = nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint metadata: ") + e.what());
    }
    const auto stream = r.raw(r.u32());
    ck.field = codec::decode<float>(stream);

    std::map<std::string, std::vector<float>> blocks;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_bytes = r.raw(r.u16());
        std::vector<float> v(r.u32());
        for (auto& f : v) {
            const std::uint32_t bits = r.u32();
            std::memcpy(&f, &bits, 4);
        }
        blocks[std::string(name_bytes.begin(), name_bytes.end())] = std::move(v);
    }
    if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");

    const std::string storage = ck.meta.value("storage", "raw");
    if (storage == "soft") {
        auto& g = ck.field.grid;
        g.kind = StorageKind::SoftVQ;
        for (auto& st : g.levels) {
            st.logits.assign(st.indices.size() * g.codebook_rows(), 0.0f);
            st.indices.clear();
        }
    }
    auto take = [&](const std::string& name, std::vector<float>& dst) {
        const auto it = blocks.find(name);
        if (it == blocks.end()) throw FormatError("checkpoint: missing block " + name);
        if (it->second.size() != dst.size()) throw FormatError("checkpoint: block " + name + " has the wrong size");
        dst = it->second;
    };
    ck.field.for_each_block([&](const std::string& name, std::vector<float>& v) { take("param/" + name, v); });
    if (blocks.count("adam.m/mlp.w1")) {
        ck.optimizer = AdamState<float>::like(ck.field);
        for (auto& m : ck.optimizer.blocks) {
            take("adam.m/" + m.name, m.first);
            take("adam.v/" + m.name, m.second);
        }
        ck.optimizer.step = ck.meta.value("optimizer_step", std::int64_t{0});
    }
    ck.loss_history = ck.meta.value("loss_history", std::vector<double>{});
    ck.meta.erase("loss_history");
    ck.meta.erase("optimizer_step");
    ck.meta.erase("storage");
    ck.field.grid.validate();
    return ck;
}

inline codec::Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return codec::Bytes(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    write_file(path, serialize_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

/// Either container: a checkpoint, or a bare .vqad stream wrapped as one.
inline Checkpoint load_model(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "VQCK", 4) == 0) return deserialize_checkpoint(bytes);
    Checkpoint ck;
    ck.field = codec::decode<float>(bytes);
    return ck;
}

}  // namespace vqad
