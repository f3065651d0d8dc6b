#include "vqad/cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "vqad");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = vqad::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("vqad_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        std::ofstream(dir / "cfg.json") << R"({
            "task": "image", "dataset": {"kind": "synthetic_image", "size": 16},
            "grid": {"levels": 3, "base_resolution": 2, "feature_width": 4},
            "vq": {"bitwidth": 3},
            "train": {"steps": 40, "batch_size": 64, "learning_rate": 0.003},
            "model": {"hidden_width": 16}, "output_dir": "out"})";
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
    fs::path dir;
};

std::vector<std::string> lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

}  // namespace

TEST_F(Cli, HelpExitsZeroEverywhere) {
    EXPECT_EQ(run({"--help"}).code, 0);
    for (const char* sub : {"fit", "bake", "encode", "decode", "stream", "eval", "baseline", "gradcheck"}) {
        const auto r = run({sub, "--help"});
        EXPECT_EQ(r.code, 0) << sub;
        EXPECT_NE(r.out.find("Usage"), std::string::npos) << sub;
    }
    for (const char* sub : {"klt", "kmvq", "randidx"}) {
        EXPECT_EQ(run({"baseline", sub, "--help"}).code, 0);
    }
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST_F(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"train"}).code, 1);
    EXPECT_EQ(run({"fit"}).code, 1);
    EXPECT_EQ(run({"fit", "--config", path("cfg.json"), "--steps", "-3"}).code, 1);
    EXPECT_EQ(run({"baseline"}).code, 1);
}

TEST_F(Cli, DataErrorsExitTwo) {
    EXPECT_EQ(run({"fit", "--config", path("missing.json")}).code, 2);
    std::ofstream(dir / "bad.json") << R"({"task": "image", "bogus": 1})";
    const auto r = run({"fit", "--config", path("bad.json")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("bogus"), std::string::npos);
    std::ofstream(dir / "junk.vqad") << "not a stream";
    EXPECT_EQ(run({"decode", "--input", path("junk.vqad"), "--out", path("x.ckpt")}).code, 2);
}

TEST_F(Cli, FitBakeEncodeStreamEval) {
    auto r = run({"fit", "--config", path("cfg.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_TRUE(fs::exists(dir / "out" / "model.ckpt"));
    EXPECT_EQ(lines(dir / "out" / "loss.csv").size(), 41u);

    // soft indices must be baked before encoding
    EXPECT_EQ(run({"encode", "--input", path("out/model.ckpt"), "--out", path("m.vqad")}).code, 2);
    ASSERT_EQ(run({"bake", "--input", path("out/model.ckpt"), "--out", path("baked.ckpt")}).code, 0);
    r = run({"encode", "--input", path("baked.ckpt"), "--out", path("m.vqad"), "--compress"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "m.vqad.z"));

    const auto model = vqad::load_model(dir / "baked.ckpt");
    const auto sizes = vqad::codec::size_report(model.field).prefix_sizes();
    EXPECT_EQ(fs::file_size(dir / "m.vqad"), sizes.back());

    r = run({"stream", "--input", path("m.vqad"), "--out", path("stream"), "--config", path("cfg.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    for (int l = 0; l < 3; ++l) EXPECT_TRUE(fs::exists(dir / "stream" / ("lod_" + std::to_string(l) + ".png")));
    const auto rd = lines(dir / "stream" / "rd.csv");
    ASSERT_EQ(rd.size(), 4u);
    EXPECT_EQ(rd[0], "lod,bytes,psnr_db,ssim");
    for (int l = 0; l < 3; ++l) {
        EXPECT_EQ(rd[l + 1].rfind(std::to_string(l) + "," + std::to_string(sizes[l]) + ",", 0), 0u);
    }

    // the checkpoint remembers its config, so eval needs no --config
    ASSERT_EQ(run({"eval", "--input", path("baked.ckpt"), "--out", path("e1.csv")}).code, 0);
    ASSERT_EQ(run({"eval", "--input", path("m.vqad"), "--out", path("e2.csv"), "--config", path("cfg.json")}).code, 0);
    EXPECT_EQ(lines(dir / "e1.csv"), lines(dir / "e2.csv"));
    EXPECT_EQ(lines(dir / "e1.csv"), rd);

    ASSERT_EQ(run({"decode", "--input", path("m.vqad"), "--out", path("p.ckpt"), "--levels", "2"}).code, 0);
    EXPECT_EQ(vqad::load_model(dir / "p.ckpt").field.level_count(), 2);
}

TEST_F(Cli, RerunIsDeterministic) {
    ASSERT_EQ(run({"fit", "--config", path("cfg.json"), "--out", path("a.ckpt"), "--steps", "10"}).code, 0);
    ASSERT_EQ(run({"fit", "--config", path("cfg.json"), "--out", path("b.ckpt"), "--steps", "10"}).code, 0);
    EXPECT_EQ(vqad::read_file(dir / "a.ckpt"), vqad::read_file(dir / "b.ckpt"));
}

TEST_F(Cli, Baselines) {
    std::ofstream(dir / "raw.json") << R"({
        "task": "image", "dataset": {"kind": "synthetic_image", "size": 16},
        "grid": {"levels": 2, "base_resolution": 2, "feature_width": 4},
        "train": {"mode": "uncompressed", "steps": 20, "batch_size": 64}, "model": {"hidden_width": 8}})";
    ASSERT_EQ(run({"fit", "--config", path("raw.json"), "--out", path("raw.ckpt")}).code, 0);
    auto r = run({"baseline", "klt", "--input", path("raw.ckpt"), "--out", path("klt.ckpt"), "--components", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"baseline", "kmvq", "--input", path("raw.ckpt"), "--out", path("km.ckpt"), "--bitwidth", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(vqad::load_model(dir / "km.ckpt").field.grid.bitwidth, 2);
    ASSERT_EQ(run({"eval", "--input", path("km.ckpt"), "--out", path("km.csv")}).code, 0);
    EXPECT_EQ(lines(dir / "km.csv").size(), 3u);
    r = run({"baseline", "randidx", "--config", path("raw.json"), "--out", path("rand.ckpt"), "--bitwidth", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(vqad::load_model(dir / "rand.ckpt").field.grid.bitwidth, 5);
    // klt and kmvq need an uncompressed model
    EXPECT_EQ(run({"baseline", "kmvq", "--input", path("km.ckpt"), "--out", path("x.ckpt")}).code, 2);
    EXPECT_EQ(run({"baseline", "klt", "--input", path("raw.ckpt"), "--out", path("x.ckpt"), "--components", "9"}).code, 2);
}

TEST_F(Cli, Gradcheck) {
    const auto r = run({"gradcheck", "--seeds", "2"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("render_ray_vq"), std::string::npos);
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
    EXPECT_EQ(run({"gradcheck", "--seeds", "2", "--tolerance", "0"}).code, 2);
}
