#include "ntklab/errors.hpp"
#include "ntklab/regress2d.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace ntklab;

namespace {

Image random_image(int w, int h, int channels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(w, h, channels);
    for (auto& v : img.data) v = u(rng);
    return img;
}

Image smooth_image(int w, int h, double phase) {
    Image img(w, h, 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                img.at(x, y, c) = 0.5 + 0.4 * std::sin(0.2 * x + 0.3 * y + phase + c);
            }
        }
    }
    return img;
}

// Direct-summation MS-SSIM: explicit 11×11 window weights per valid
// position, grayscale conversion and 2×2 averaging done by hand.
double reference_ms_ssim(const Image& pa, const Image& pb) {
    using Plane = std::vector<std::vector<double>>;
    auto gray = [](const Image& im) {
        Plane p(static_cast<std::size_t>(im.height), std::vector<double>(static_cast<std::size_t>(im.width)));
        for (int y = 0; y < im.height; ++y) {
            for (int x = 0; x < im.width; ++x) {
                p[y][x] = 0.299 * im.at(x, y, 0) + 0.587 * im.at(x, y, 1) + 0.114 * im.at(x, y, 2);
            }
        }
        return p;
    };
    double g[11];
    double gs = 0.0;
    for (int i = 0; i < 11; ++i) gs += g[i] = std::exp(-(i - 5) * (i - 5) / (2 * 1.5 * 1.5));
    for (double& v : g) v /= gs;
    const std::array<double, 5> weights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    Plane a = gray(pa), b = gray(pb);
    int scales = 0;
    while (scales < 5 && std::min(pa.width, pa.height) >= 11 << scales) ++scales;
    double wsum = 0.0;
    for (int s = 0; s < scales; ++s) wsum += weights[static_cast<std::size_t>(s)];
    const double c1 = 1e-4, c2 = 9e-4;
    double result = 1.0;
    for (int s = 0; s < scales; ++s) {
        const int h = static_cast<int>(a.size()), w = static_cast<int>(a[0].size());
        double cs_sum = 0.0, ssim_sum = 0.0;
        int count = 0;
        for (int y = 0; y + 11 <= h; ++y) {
            for (int x = 0; x + 11 <= w; ++x) {
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < 11; ++i) {
                    for (int j = 0; j < 11; ++j) {
                        const double k = g[i] * g[j];
                        const double va = a[y + i][x + j], vb = b[y + i][x + j];
                        ma += k * va;
                        mb += k * vb;
                        saa += k * va * va;
                        sbb += k * vb * vb;
                        sab += k * va * vb;
                    }
                }
                saa -= ma * ma;
                sbb -= mb * mb;
                sab -= ma * mb;
                const double l = (2 * ma * mb + c1) / (ma * ma + mb * mb + c1);
                const double cs = (2 * sab + c2) / (saa + sbb + c2);
                cs_sum += cs;
                ssim_sum += l * cs;
                ++count;
            }
        }
        const double e = weights[static_cast<std::size_t>(s)] / wsum;
        const double term = s + 1 == scales ? ssim_sum / count : cs_sum / count;
        result *= std::pow(std::max(term, 0.0), e);
        Plane da(static_cast<std::size_t>(h / 2), std::vector<double>(static_cast<std::size_t>(w / 2)));
        Plane db = da;
        for (int y = 0; y < h / 2; ++y) {
            for (int x = 0; x < w / 2; ++x) {
                da[y][x] = 0.25 * (a[2 * y][2 * x] + a[2 * y + 1][2 * x] + a[2 * y][2 * x + 1] + a[2 * y + 1][2 * x + 1]);
                db[y][x] = 0.25 * (b[2 * y][2 * x] + b[2 * y + 1][2 * x] + b[2 * y][2 * x + 1] + b[2 * y + 1][2 * x + 1]);
            }
        }
        a = std::move(da);
        b = std::move(db);
    }
    return result;
}

ExperimentConfig tiny_config(EncodingSpec enc) {
    ExperimentConfig c;
    c.name = "tiny";
    c.encoding = std::move(enc);
    c.hidden = {32, 32};
    c.learning_rate = 5.0;
    c.epochs = 6;
    c.batch_size = 16;
    c.gram_cap = 64;
    c.seed = 3;
    return c;
}

}  // namespace

TEST(Dataset, CoordinatesAndTargets) {
    Image img(4, 3, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<double>(i) / img.data.size();
    const RegressionDataset d = dataset_from_image(img);
    ASSERT_EQ(d.size(), 12);
    EXPECT_EQ(d.x(0, 0), 0.0);
    EXPECT_EQ(d.x(0, 1), 0.0);
    EXPECT_EQ(d.x(3, 0), 1.0);
    EXPECT_EQ(d.x(11, 1), 1.0);
    EXPECT_NEAR(d.x(5, 0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(d.x(5, 1), 0.5, 1e-15);
    EXPECT_EQ(d.y(5, 2), img.at(1, 1, 2));
    const Image back = dataset_image(d);
    EXPECT_EQ(back.data, img.data);
}

TEST(Dataset, GrayIsReplicated) {
    Image g(2, 2, 1);
    g.data = {0.1, 0.2, 0.3, 0.4};
    const RegressionDataset d = dataset_from_image(g);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(d.y(2, c), 0.3);
}

TEST(Dataset, BundledImagesLoad) {
    for (const char* name : {"cat", "coffee", "astronaut"}) {
        const RegressionDataset d = load_image_dataset(ntklab::testing::data_path(std::string("images/") + name + ".png"));
        EXPECT_EQ(d.width, 64);
        EXPECT_EQ(d.height, 64);
        EXPECT_GE(d.y.minCoeff(), 0.0);
        EXPECT_LE(d.y.maxCoeff(), 1.0);
        EXPECT_GT(d.y.maxCoeff() - d.y.minCoeff(), 0.5);
    }
    EXPECT_THROW(load_image_dataset(ntklab::testing::data_path("images/missing.png")), IoError);
}

TEST(ImageIo, PngRoundTripIsExactAt8Bits) {
    const Image img = quantize8(random_image(13, 7, 3, 1));
    const auto path = std::filesystem::temp_directory_path() / "ntklab_rt.png";
    write_png(path.string(), img);
    const Image back = read_image(path.string());
    EXPECT_EQ(back.width, 13);
    EXPECT_EQ(back.channels, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-12);
    std::filesystem::remove(path);
}

TEST(ImageIo, ReadsBinaryPpm) {
    const auto path = std::filesystem::temp_directory_path() / "ntklab_rt.ppm";
    {
        std::ofstream out(path, std::ios::binary);
        out << "P6\n# comment\n2 1\n255\n";
        const unsigned char px[] = {255, 0, 51, 0, 102, 255};
        out.write(reinterpret_cast<const char*>(px), sizeof(px));
    }
    const Image img = read_image(path.string());
    EXPECT_EQ(img.width, 2);
    EXPECT_EQ(img.height, 1);
    EXPECT_NEAR(img.at(0, 0, 2), 0.2, 1e-12);
    EXPECT_NEAR(img.at(1, 0, 1), 0.4, 1e-12);
    std::filesystem::remove(path);
}

TEST(ImageIo, GrayscaleAndQuantize) {
    Image px(1, 1, 3);
    px.data = {1.0, 0.5, 0.0};
    EXPECT_NEAR(to_grayscale(px).data[0], 0.299 + 0.5 * 0.587, 1e-15);
    px.data = {1.2, -0.1, 0.5};
    const Image q = quantize8(px);
    EXPECT_EQ(q.data[0], 1.0);
    EXPECT_EQ(q.data[1], 0.0);
    EXPECT_EQ(q.data[2], 128.0 / 255.0);
}

TEST(Psnr, KnownValuesAndCap) {
    const Image a(8, 8, 3, 0.5);
    EXPECT_EQ(psnr(a, a), kPsnrCap);
    const Image b(8, 8, 3, 0.6);
    EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
    const Image c(8, 8, 3, 0.5 + 1e-6);
    EXPECT_NEAR(psnr(a, c), 100.0, 1e-6);
    EXPECT_THROW(psnr(a, Image(4, 4, 3)), DimensionError);
}

TEST(MsSsim, ScaleCount) {
    EXPECT_EQ(ms_ssim_scale_count(64, 64), 3);
    EXPECT_EQ(ms_ssim_scale_count(11, 40), 1);
    EXPECT_EQ(ms_ssim_scale_count(10, 40), 0);
    EXPECT_EQ(ms_ssim_scale_count(176, 176), 5);
    EXPECT_EQ(ms_ssim_scale_count(512, 512), 5);
    EXPECT_EQ(ms_ssim_scale_count(512, 512, 2), 2);
}

TEST(MsSsim, MatchesDirectSummation) {
    const Image truth = smooth_image(64, 64, 0.0);
    Image noisy = truth;
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 0.05);
    for (auto& v : noisy.data) v = std::clamp(v + n(rng), 0.0, 1.0);
    EXPECT_NEAR(ms_ssim(noisy, truth), reference_ms_ssim(noisy, truth), 1e-10);
    const Image other = smooth_image(48, 37, 1.0);
    const Image other_b = smooth_image(48, 37, 1.3);
    EXPECT_NEAR(ms_ssim(other, other_b), reference_ms_ssim(other, other_b), 1e-10);
}

TEST(MsSsim, IdentitySymmetryAndRange) {
    const Image a = random_image(40, 40, 3, 2);
    const Image b = random_image(40, 40, 3, 3);
    EXPECT_NEAR(ms_ssim(a, a), 1.0, 1e-12);
    EXPECT_NEAR(ms_ssim(a, b), ms_ssim(b, a), 1e-12);
    const double v = ms_ssim(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LT(v, 0.5);
    EXPECT_THROW(ms_ssim(Image(10, 10, 3), Image(10, 10, 3)), DimensionError);
}

TEST(MsSsim, DegradesMonotonicallyWithNoise) {
    const Image truth = smooth_image(64, 64, 0.5);
    double previous = 1.0;
    for (double sigma : {0.01, 0.05, 0.2}) {
        Image noisy = truth;
        std::mt19937_64 rng(8);
        std::normal_distribution<double> n(0.0, sigma);
        for (auto& v : noisy.data) v = std::clamp(v + n(rng), 0.0, 1.0);
        const double s = ms_ssim(noisy, truth);
        EXPECT_LT(s, previous);
        previous = s;
    }
}

TEST(Experiment, TagsForEpochs) {
    EXPECT_EQ(tag_for_epoch(0, 10), SnapshotTag::Start);
    EXPECT_EQ(tag_for_epoch(10, 10), SnapshotTag::End);
    EXPECT_EQ(tag_for_epoch(5, 10), SnapshotTag::Mid);
}

TEST(Experiment, RunIsDeterministicAndRecordsSchedule) {
    const RegressionDataset d = dataset_from_image(smooth_image(16, 16, 0.2));
    ExperimentConfig c = tiny_config(MpeSpec{2, 2, {8}});
    c.snapshot_mlp_only = true;
    int calls = 0;
    const ExperimentResult a = run_experiment(c, d, [&](int epoch, double loss, double p) {
        ++calls;
        EXPECT_EQ(epoch, calls);
        EXPECT_TRUE(std::isfinite(loss));
        EXPECT_GT(p, 0.0);
    });
    EXPECT_EQ(calls, 6);
    ASSERT_EQ(a.loss.size(), 6u);
    ASSERT_EQ(a.psnr.size(), 6u);
    EXPECT_LT(a.loss.back(), a.loss.front());
    EXPECT_EQ(a.final_psnr, a.psnr.back());
    EXPECT_NEAR(a.final_psnr, psnr(predict_image(a.model, 16, 16), dataset_image(d)), 1e-12);
    EXPECT_EQ(a.prediction.width, 16);
    EXPECT_EQ(a.gram_samples.size(), 64u);

    // {0, 3, 6} × {full, mlp-only}.
    ASSERT_EQ(a.spectra.size(), 6u);
    int full = 0;
    for (const auto& s : a.spectra) {
        EXPECT_EQ(s.eigenvalues.size(), 64);
        full += s.component == KernelComponent::Full;
    }
    EXPECT_EQ(full, 3);
    EXPECT_EQ(a.spectra.front().tag, SnapshotTag::Start);
    EXPECT_EQ(a.spectra.back().epoch, 6);

    const ExperimentResult b = run_experiment(c, d);
    EXPECT_EQ(a.loss, b.loss);
    EXPECT_EQ(flatten_parameters(a.model), flatten_parameters(b.model));
    c.seed = 4;
    EXPECT_NE(run_experiment(c, d).loss, a.loss);
}

TEST(Experiment, CustomSnapshotEpochsAndSpectrum) {
    const RegressionDataset d = dataset_from_image(smooth_image(12, 12, 0.4));
    ExperimentConfig c = tiny_config(FfeSpec{3, 2});
    c.snapshot_epochs = {2};
    c.epochs = 3;
    const ExperimentResult r = run_experiment(c, d);
    ASSERT_EQ(r.spectra.size(), 1u);
    EXPECT_EQ(r.spectra[0].epoch, 2);
    EXPECT_EQ(r.spectra[0].tag, SnapshotTag::Mid);
    const Vector ev = image_spectrum(r.model, d, 30, true);
    EXPECT_LE(ev.size(), 30);
    for (Eigen::Index i = 1; i < ev.size(); ++i) EXPECT_LE(ev[i], ev[i - 1]);
}

TEST(Experiment, PredictionIsClampedAndRenderIsQuantized) {
    ExperimentConfig c = tiny_config(IdentitySpec{2});
    CoordinateModel m = init_model(c.encoding, c.mlp(), 1);
    // Push the output bias far out of range.
    m.network.layers.back().bias.setConstant(100.0);
    const Image p = predict_image(m, 9, 5);
    for (double v : p.data) EXPECT_EQ(v, 1.0);
    const Image q = render_prediction(init_model(c.encoding, c.mlp(), 2), 9, 5);
    for (double v : q.data) EXPECT_NEAR(v * 255.0, std::round(v * 255.0), 1e-9);
}
