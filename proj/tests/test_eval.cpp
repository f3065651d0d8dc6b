#include "vqad/eval.hpp"
#include "vqad/scenes.hpp"
#include "vqad/train.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace vqad;

namespace {

Image random_image(std::mt19937_64& rng, int w, int h) {
    Image img(w, h, 3);
    std::uniform_real_distribution<float> u(0, 1);
    for (auto& v : img.data) v = u(rng);
    return img;
}

}  // namespace

TEST(Psnr, Examples) {
    std::mt19937_64 rng(1);
    const auto a = random_image(rng, 8, 8);
    EXPECT_EQ(eval::psnr(a, a), 99.0);
    Image zeros(8, 8, 3, 0.0f), halves(8, 8, 3, 0.5f), tenth(8, 8, 3, 0.1f);
    EXPECT_NEAR(eval::psnr(zeros, tenth), 20.0, 1e-5);  // 0.1f is not exactly 0.1
    EXPECT_NEAR(eval::psnr(zeros, halves), 10 * std::log10(4.0), 1e-12);
    EXPECT_NEAR(eval::psnr(zeros, halves), 6.0206, 1e-4);
}

TEST(Psnr, SymmetricMonotoneAndShapeChecked) {
    std::mt19937_64 rng(2);
    const auto a = random_image(rng, 8, 8), b = random_image(rng, 8, 8);
    EXPECT_EQ(eval::psnr(a, b), eval::psnr(b, a));
    Image near = a;
    for (std::size_t i = 0; i < near.data.size(); ++i) near.data[i] = 0.9f * a.data[i] + 0.1f * b.data[i];
    EXPECT_GT(eval::psnr(a, near), eval::psnr(a, b));
    EXPECT_THROW(eval::psnr(a, Image(8, 9, 3)), std::invalid_argument);
}

TEST(Ssim, IdenticalIsOne) {
    std::mt19937_64 rng(3);
    const auto a = random_image(rng, 20, 16);
    EXPECT_NEAR(eval::ssim(a, a), 1.0, 1e-9);
}

TEST(Ssim, ConstantImagesClosedForm) {
    Image a(16, 16, 3, 0.2f), b(16, 16, 3, 0.8f);
    const double x = 0.2f, y = 0.8f;  // the stored fp32 values
    const double c1 = 1e-4, c2 = 9e-4;
    const double want = (2 * x * y + c1) * c2 / ((x * x + y * y + c1) * c2);
    EXPECT_NEAR(eval::ssim(a, b), want, 1e-9);
    EXPECT_NEAR(want, (2 * 0.16 + 1e-4) / (0.04 + 0.64 + 1e-4), 1e-6);
}

TEST(Ssim, InvertedImageScoresBelowOneAndSymmetric) {
    std::mt19937_64 rng(4);
    const auto a = random_image(rng, 24, 24);
    Image inv = a;
    for (auto& v : inv.data) v = 1.0f - v;
    EXPECT_LT(eval::ssim(a, inv), 1.0);
    EXPECT_NEAR(eval::ssim(a, inv), eval::ssim(inv, a), 1e-12);
    EXPECT_THROW(eval::ssim(Image(10, 20, 3), Image(10, 20, 3)), std::invalid_argument);
}

TEST(RateDistortion, PointsFollowPrefixes) {
    const auto img = scenes::synthetic_image(16);
    TrainConfig cfg;
    cfg.steps = 200;
    cfg.batch_size = 64;
    cfg.learning_rate = 3e-3;
    cfg.hidden_width = 16;
    cfg.bitwidth = 4;
    auto model = train<float>(cfg, scenes::image_dataset(img), {2, 3, 2, 4}, occupancy::dense());
    model.field.grid.bake();
    const auto stream = codec::encode(model.field);
    const auto set = eval::image_eval_set(img);
    int renders = 0;
    const auto rd = eval::rate_distortion<float>(set, stream, [&](int, const std::vector<Image>& r) {
        renders += static_cast<int>(r.size());
    });
    EXPECT_EQ(renders, 3);
    const auto sizes = codec::size_report(model.field).prefix_sizes();
    ASSERT_EQ(rd.size(), 3u);
    for (int l = 0; l < 3; ++l) {
        EXPECT_EQ(rd[l].lod, l);
        EXPECT_EQ(rd[l].bytes, sizes[l]);
        if (l > 0) {
            EXPECT_GT(rd[l].bytes, rd[l - 1].bytes);
        }
    }
    EXPECT_EQ(rd.back().bytes, stream.size());
    EXPECT_GE(rd.back().psnr_db, rd.front().psnr_db);

    std::ostringstream csv;
    eval::write_csv(csv, rd);
    std::istringstream lines(csv.str());
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    EXPECT_EQ(header, "lod,bytes,psnr_db,ssim");
    EXPECT_EQ(first.rfind("0," + std::to_string(sizes[0]) + ",", 0), 0u);
}

TEST(Evaluate, TaskMismatchIsError) {
    NeuralField<float> f;
    f.task = TaskKind::Sdf;
    f.grid = build_pyramid<float>({3, 1, 2, 2}, occupancy::dense(), StorageKind::Raw, 0, GridInit::Zero, 1);
    f.mlp = DecoderMLP<float>::make(2, 4, 1, 1);
    EXPECT_THROW(eval::evaluate(f, eval::image_eval_set(Image(16, 16, 3)), 0), FormatError);
    const auto q = eval::evaluate(f, eval::sdf_eval_set(scenes::SdfShape{}, 16), 0);
    EXPECT_GT(q.psnr_db, 0.0);
}
