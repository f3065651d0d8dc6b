#pragma once

// Command-line front end. run() returns 0 on success, 1 on usage errors and
// 2 on data or validation errors; diagnostics go to stderr.

#include "vqad/baselines.hpp"
#include "vqad/checkpoint.hpp"
#include "vqad/codec.hpp"
#include "vqad/config.hpp"
#include "vqad/eval.hpp"
#include "vqad/oracles.hpp"
#include "vqad/train.hpp"

#include <CLI11.hpp>
#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

namespace vqad::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Drops identity-task samples outside the level-0 occupancy.
inline void restrict_to_domain(Dataset& data, const std::vector<LevelLayout>& layouts) {
    if (data.task == TaskKind::Radiance) return;
    Dataset kept;
    kept.task = data.task;
    kept.target_width = data.target_width;
    const int dims = layouts.front().dims;
    for (std::size_t i = 0; i < data.points.size(); ++i) {
        if (!in_domain(layouts, std::span<const double>(data.points[i].data(), dims))) continue;
        kept.points.push_back(data.points[i]);
        for (int c = 0; c < data.target_width; ++c) kept.targets.push_back(data.targets[i * data.target_width + c]);
    }
    data = std::move(kept);
}

inline Checkpoint fit_model(const RunConfig& cfg, const TaskData& td, std::ostream& log) {
    TrainConfig tc = cfg.train;
    Dataset data = td.train;
    TrainedModel<float> model;
    model.config = tc;
    model.field = init_field<float>(cfg.task, cfg.grid, td.occupancy, tc);
    for (int c = 0; c < 3; ++c) model.field.background[c] = static_cast<float>(td.background[c]);
    model.optimizer = AdamState<float>::like(model.field);
    restrict_to_domain(data, model.field.grid.layouts);
    const int steps = total_steps(tc, data.size());
    log << "training " << task_name(cfg.task) << " field: " << data.size() << " samples, " << steps << " steps\n";
    const int report = std::max(1, steps / 10);
    for (int done = 0; done < steps;) {
        const int n = std::min(report, steps - done);
        train_steps(model, data, n);
        done += n;
        log << "  step " << done << "  loss " << model.loss_history.back() << '\n';
    }
    Checkpoint ck;
    ck.field = std::move(model.field);
    ck.optimizer = std::move(model.optimizer);
    ck.loss_history = std::move(model.loss_history);
    return ck;
}

/// The config a checkpoint was trained with, if recorded.
inline std::optional<RunConfig> stored_config(const Checkpoint& ck) {
    if (!ck.meta.contains("run")) return std::nullopt;
    return parse_run_config(ck.meta["run"], ck.meta.value("config_dir", std::string(".")));
}

/// Without a dataset, quality is measured against the full model's own
/// finest-level render.
inline eval::EvalSet self_reference_set(const NeuralField<float>& field, int size) {
    eval::EvalSet set;
    set.task = field.task;
    if (field.task == TaskKind::Radiance) {
        scenes::VolumeScene empty;
        for (const auto& v : scenes::render_orbit(empty, 4, size)) set.cameras.push_back(v.camera);
        set.references.resize(set.cameras.size(), Image(size, size, 3));
    } else {
        set.references.assign(1, Image(size, size, 3));
    }
    set.references = eval::render_set(field, set, field.level_count() - 1);
    return set;
}

inline eval::EvalSet resolve_eval_set(const std::string& config_path, const Checkpoint& ck, int size) {
    if (!config_path.empty()) return load_task_data(load_run_config(config_path)).eval;
    if (auto cfg = stored_config(ck)) return load_task_data(*cfg).eval;
    return self_reference_set(ck.field, size);
}

inline NeuralField<float> storable(NeuralField<float> f) {
    if (f.grid.kind == StorageKind::SoftVQ) f.grid.bake();
    return f;
}

inline void print_rd(std::ostream& out, const std::vector<eval::RDPoint>& points) {
    out << "lod  bytes      psnr_db  ssim\n";
    for (const auto& p : points) {
        out << std::left << std::setw(5) << p.lod << std::setw(11) << p.bytes << std::setw(9) << std::fixed
            << std::setprecision(3) << p.psnr_db << std::setprecision(4) << p.ssim << '\n';
        out.unsetf(std::ios::floatfield);
    }
}

inline void write_loss_csv(const fs::path& path, const std::vector<double>& history) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "step,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i) out << i + 1 << ',' << history[i] << '\n';
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Vector-quantized neural field grids: train, compress, stream and evaluate."};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    std::string config, input, output;
    int steps = 0, bitwidth = 4, components = 1, iters = 100, seeds = 20, size = 128, levels = 0;
    std::uint64_t seed = 1;
    bool compress = false;
    double tolerance = 1e-4;

    auto* fit = app.add_subcommand("fit", "Train a model from a JSON run config and write a checkpoint");
    fit->add_option("--config", config, "Run config (JSON)")->required();
    fit->add_option("--out", output, "Checkpoint path (default: <output_dir>/model.ckpt)");
    fit->add_option("--steps", steps, "Override the number of optimizer steps")->check(CLI::PositiveNumber);

    auto* bake = app.add_subcommand("bake", "Replace soft indices with their argmax");
    bake->add_option("--input", input, "Checkpoint")->required();
    bake->add_option("--out", output, "Baked checkpoint")->required();

    auto* encode = app.add_subcommand("encode", "Write a checkpoint as a .vqad stream");
    encode->add_option("--input", input, "Baked or uncompressed checkpoint")->required();
    encode->add_option("--out", output, ".vqad path")->required();
    encode->add_flag("--compress", compress, "Also write a zlib-compressed copy (<out>.z); reported sizes ignore it");

    auto* decode = app.add_subcommand("decode", "Read a .vqad stream (or a level prefix of it) into a checkpoint");
    decode->add_option("--input", input, ".vqad stream")->required();
    decode->add_option("--out", output, "Checkpoint path")->required();
    decode->add_option("--levels", levels, "Decode only this many levels")->check(CLI::PositiveNumber);

    auto* stream = app.add_subcommand("stream", "Simulate level-by-level delivery: one PNG and RD point per level");
    stream->add_option("--input", input, ".vqad stream or checkpoint")->required();
    stream->add_option("--out", output, "Output directory")->required();
    stream->add_option("--config", config, "Run config giving the reference data");
    stream->add_option("--size", size, "Render size when no reference data is given")->check(CLI::Range(11, 4096));

    auto* evaluate = app.add_subcommand("eval", "Write lod,bytes,psnr_db,ssim for every level");
    evaluate->add_option("--input", input, ".vqad stream or checkpoint")->required();
    evaluate->add_option("--out", output, "CSV path")->required();
    evaluate->add_option("--config", config, "Run config giving the reference data");
    evaluate->add_option("--size", size, "Render size when no reference data is given")->check(CLI::Range(11, 4096));

    auto* baseline = app.add_subcommand("baseline", "Post-hoc and fixed-index baselines");
    baseline->require_subcommand(1);
    auto* klt = baseline->add_subcommand("klt", "Keep the leading KLT coefficients of every feature row");
    klt->add_option("--input", input, "Uncompressed checkpoint")->required();
    klt->add_option("--out", output, "Checkpoint path")->required();
    klt->add_option("--components", components, "Coefficients kept per row")->check(CLI::PositiveNumber);
    auto* kmvq = baseline->add_subcommand("kmvq", "k-means vector quantization of a trained grid");
    kmvq->add_option("--input", input, "Uncompressed checkpoint")->required();
    kmvq->add_option("--out", output, "Checkpoint path")->required();
    kmvq->add_option("--bitwidth", bitwidth, "Index bits")->check(CLI::Range(0, 16));
    kmvq->add_option("--iters", iters, "Lloyd iterations")->check(CLI::PositiveNumber);
    kmvq->add_option("--seed", seed, "Seeding RNG");
    auto* randidx = baseline->add_subcommand("randidx", "Train with fixed random indices");
    randidx->add_option("--config", config, "Run config")->required();
    randidx->add_option("--out", output, "Checkpoint path")->required();
    randidx->add_option("--bitwidth", bitwidth, "Index bits")->check(CLI::Range(1, 16));
    randidx->add_option("--steps", steps, "Override the number of optimizer steps")->check(CLI::PositiveNumber);

    auto* gradcheck = app.add_subcommand("gradcheck", "Run the finite-difference gradient oracle suite");
    gradcheck->add_option("--seeds", seeds, "Random instances per check")->check(CLI::PositiveNumber);
    gradcheck->add_option("--tolerance", tolerance, "Maximum relative error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help on any subcommand lands here with exit code 0
        if (e.get_exit_code() == 0) {
            app.exit(e, out, err);
            return kExitOk;
        }
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (*fit) {
            RunConfig cfg = load_run_config(config);
            if (steps > 0) cfg.train.steps = steps;
            const TaskData td = load_task_data(cfg);
            Checkpoint ck = fit_model(cfg, td, out);
            ck.meta["run"] = cfg.source;
            if (steps > 0) ck.meta["run"]["train"]["steps"] = steps;
            ck.meta["config_dir"] = fs::absolute(fs::path(config)).parent_path().string();
            const fs::path path = output.empty() ? cfg.output_dir / "model.ckpt" : fs::path(output);
            save_checkpoint(path, ck);
            write_loss_csv(path.parent_path().empty() ? fs::path("loss.csv") : path.parent_path() / "loss.csv",
                           ck.loss_history);
            const auto q = eval::evaluate(storable(ck.field), td.eval, ck.field.level_count() - 1);
            out << "wrote " << path.string() << "  psnr " << q.psnr_db << " dB  ssim " << q.ssim << '\n';
        } else if (*bake) {
            Checkpoint ck = load_checkpoint(input);
            ck.field.grid.bake();
            ck.optimizer = AdamState<float>{};
            save_checkpoint(output, ck);
            out << "baked " << ck.field.level_count() << " levels -> " << output << '\n';
        } else if (*encode) {
            const Checkpoint ck = load_model(input);
            const auto bytes = codec::encode(ck.field);
            write_file(output, bytes);
            const auto report = codec::size_report(ck.field);
            out << "wrote " << output << ": " << bytes.size() << " bytes (header " << report.header << ", mlp "
                << report.mlp << ", grid " << report.grid_payload() << ", grid ratio " << report.grid_ratio() << ")\n";
            if (compress) {
                uLongf n = compressBound(static_cast<uLong>(bytes.size()));
                codec::Bytes z(n);
                if (compress2(z.data(), &n, bytes.data(), static_cast<uLong>(bytes.size()), Z_BEST_COMPRESSION) != Z_OK) {
                    throw FormatError("zlib compression failed");
                }
                z.resize(n);
                write_file(output + ".z", z);
                out << "wrote " << output << ".z: " << n << " bytes (zlib; not part of reported sizes)\n";
            }
        } else if (*decode) {
            const auto bytes = read_file(input);
            Checkpoint ck;
            ck.field = levels > 0 ? codec::decode_prefix<float>(bytes, levels) : codec::decode<float>(bytes);
            save_checkpoint(output, ck);
            out << "decoded " << ck.field.level_count() << " levels -> " << output << '\n';
        } else if (*stream || *evaluate) {
            const Checkpoint ck = load_model(input);
            const auto bytes = codec::encode(storable(ck.field));
            const auto set = resolve_eval_set(config, ck, size);
            std::vector<eval::RDPoint> points;
            if (*stream) {
                fs::create_directories(output);
                points = eval::rate_distortion<float>(set, bytes, [&](int lod, const std::vector<Image>& renders) {
                    write_png(fs::path(output) / ("lod_" + std::to_string(lod) + ".png"), renders.front());
                });
                eval::write_csv(fs::path(output) / "rd.csv", points);
            } else {
                points = eval::rate_distortion<float>(set, bytes);
                if (fs::path(output).has_parent_path()) fs::create_directories(fs::path(output).parent_path());
                eval::write_csv(output, points);
            }
            print_rd(out, points);
        } else if (*klt) {
            Checkpoint ck = load_checkpoint(input);
            Checkpoint res;
            res.meta = ck.meta;
            res.field = baselines::klt_compress(ck.field, components);
            save_checkpoint(output, res);
            out << "klt f=" << components << ": coefficient payload "
                << baselines::klt_payload_bytes(ck.field.grid.total_vertices(), components) << " bytes\n";
        } else if (*kmvq) {
            Checkpoint ck = load_checkpoint(input);
            Checkpoint res;
            res.meta = ck.meta;
            res.field = baselines::kmvq_compress(ck.field, bitwidth, iters, seed);
            save_checkpoint(output, res);
            const auto report = codec::size_report(res.field);
            out << "kmvq b=" << bitwidth << ": codebooks " << report.codebooks() << " bytes, indices "
                << report.indices() << " bytes\n";
        } else if (*randidx) {
            RunConfig cfg = load_run_config(config);
            cfg.train.mode = TrainMode::RandomIndex;
            cfg.train.bitwidth = bitwidth;
            if (steps > 0) cfg.train.steps = steps;
            const TaskData td = load_task_data(cfg);
            Checkpoint ck = fit_model(cfg, td, out);
            ck.meta["run"] = cfg.source;
            ck.meta["run"]["train"]["mode"] = "random_index";
            ck.meta["run"]["vq"]["bitwidth"] = bitwidth;
            if (steps > 0) ck.meta["run"]["train"]["steps"] = steps;
            ck.meta["config_dir"] = fs::absolute(fs::path(config)).parent_path().string();
            save_checkpoint(output, ck);
            const auto q = eval::evaluate(ck.field, td.eval, ck.field.level_count() - 1);
            out << "wrote " << output << "  psnr " << q.psnr_db << " dB\n";
        } else if (*gradcheck) {
            bool ok = true;
            for (const auto& r : oracles::run_suite(seeds)) {
                const bool pass = r.worst < tolerance;
                ok = ok && pass;
                out << std::left << std::setw(22) << r.name << std::setw(8) << r.seeds << std::scientific
                    << std::setprecision(3) << r.worst << (pass ? "  ok" : "  FAIL") << '\n';
                out.unsetf(std::ios::floatfield);
            }
            return ok ? kExitOk : kExitData;
        }
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitOk;
}

}  // namespace vqad::cli
