#include "ntklab/regress2d.hpp"

#include "ntklab/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

namespace ntklab {

namespace {

constexpr std::array<double, 5> kMsSsimExponents{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
constexpr int kWindow = 11;
constexpr double kWindowSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void require_same_shape(const Image& a, const Image& b, const char* what) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
        throw DimensionError(std::string(what) + ": image shapes differ (" +
                             std::to_string(a.width) + "x" + std::to_string(a.height) + "x" +
                             std::to_string(a.channels) + " vs " + std::to_string(b.width) + "x" +
                             std::to_string(b.height) + "x" + std::to_string(b.channels) + ")");
    }
}

std::array<double, kWindow> gaussian_taps() {
    std::array<double, kWindow> taps{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kWindowSigma * kWindowSigma));
        sum += taps[static_cast<std::size_t>(i)];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

// Valid-region separable Gaussian filter; `m` is height × width.
Matrix filter_valid(const Matrix& m) {
    static const auto taps = gaussian_taps();
    const Eigen::Index rows = m.rows() - kWindow + 1;
    const Eigen::Index cols = m.cols() - kWindow + 1;
    Matrix horizontal = Matrix::Zero(m.rows(), cols);
    for (int t = 0; t < kWindow; ++t) horizontal += taps[static_cast<std::size_t>(t)] * m.middleCols(t, cols);
    Matrix out = Matrix::Zero(rows, cols);
    for (int t = 0; t < kWindow; ++t) out += taps[static_cast<std::size_t>(t)] * horizontal.middleRows(t, rows);
    return out;
}

struct SsimTerms {
    double ssim;
    double contrast_structure;
};

SsimTerms ssim_terms(const Matrix& a, const Matrix& b) {
    const Matrix mu_a = filter_valid(a);
    const Matrix mu_b = filter_valid(b);
    const Matrix aa = filter_valid(a.cwiseProduct(a)) - mu_a.cwiseProduct(mu_a);
    const Matrix bb = filter_valid(b.cwiseProduct(b)) - mu_b.cwiseProduct(mu_b);
    const Matrix ab = filter_valid(a.cwiseProduct(b)) - mu_a.cwiseProduct(mu_b);

    const auto lum = (2.0 * mu_a.array() * mu_b.array() + kC1) /
                     (mu_a.array().square() + mu_b.array().square() + kC1);
    const auto cs = (2.0 * ab.array() + kC2) / (aa.array() + bb.array() + kC2);
    return {(lum * cs).mean(), cs.mean()};
}

Matrix downsample(const Matrix& m) {
    const Eigen::Index rows = m.rows() / 2;
    const Eigen::Index cols = m.cols() / 2;
    Matrix out(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            out(r, c) = 0.25 * (m(2 * r, 2 * c) + m(2 * r + 1, 2 * c) + m(2 * r, 2 * c + 1) +
                                m(2 * r + 1, 2 * c + 1));
        }
    }
    return out;
}

Matrix gray_matrix(const Image& image) {
    const Image g = to_grayscale(image);
    Matrix m(g.height, g.width);
    for (int y = 0; y < g.height; ++y) {
        for (int x = 0; x < g.width; ++x) m(y, x) = g.at(x, y, 0);
    }
    return m;
}

}  // namespace

RegressionDataset dataset_from_image(const Image& image) {
    if (image.width < 1 || image.height < 1) throw DimensionError("dataset: empty image");
    RegressionDataset d;
    d.width = image.width;
    d.height = image.height;
    const auto n = static_cast<Eigen::Index>(image.pixel_count());
    d.x.resize(n, 2);
    d.y.resize(n, 3);
    const double sx = image.width > 1 ? 1.0 / (image.width - 1) : 0.0;
    const double sy = image.height > 1 ? 1.0 / (image.height - 1) : 0.0;
    for (int row = 0; row < image.height; ++row) {
        for (int col = 0; col < image.width; ++col) {
            const Eigen::Index i = static_cast<Eigen::Index>(row) * image.width + col;
            d.x(i, 0) = col * sx;
            d.x(i, 1) = row * sy;
            for (int c = 0; c < 3; ++c) {
                d.y(i, c) = image.at(col, row, image.channels == 1 ? 0 : c);
            }
        }
    }
    return d;
}

RegressionDataset load_image_dataset(const std::string& path) {
    return dataset_from_image(read_image(path));
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& ids) {
    Matrix out(static_cast<Eigen::Index>(ids.size()), m.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(ids[i]));
    }
    return out;
}

double psnr(const Image& pred, const Image& truth) {
    require_same_shape(pred, truth, "psnr");
    if (pred.data.empty()) throw DimensionError("psnr: empty images");
    double sse = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - truth.data[i];
        sse += d * d;
    }
    const double mse = sse / static_cast<double>(pred.data.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, -10.0 * std::log10(mse));
}

int ms_ssim_scale_count(int width, int height, int max_scales) {
    const int side = std::min(width, height);
    int scales = 0;
    while (scales < std::min(max_scales, 5) && side >= (kWindow << scales)) ++scales;
    return scales;
}

double ms_ssim(const Image& pred, const Image& truth, int max_scales) {
    require_same_shape(pred, truth, "ms_ssim");
    const int scales = ms_ssim_scale_count(pred.width, pred.height, max_scales);
    if (scales < 1) {
        throw DimensionError("ms_ssim: images must be at least 11x11 pixels");
    }
    double weight_sum = 0.0;
    for (int s = 0; s < scales; ++s) weight_sum += kMsSsimExponents[static_cast<std::size_t>(s)];

    Matrix a = gray_matrix(pred);
    Matrix b = gray_matrix(truth);
    double score = 1.0;
    for (int s = 0; s < scales; ++s) {
        const double exponent = kMsSsimExponents[static_cast<std::size_t>(s)] / weight_sum;
        const SsimTerms t = ssim_terms(a, b);
        if (s + 1 == scales) {
            score *= std::pow(std::max(t.ssim, 0.0), exponent);
        } else {
            score *= std::pow(std::max(t.contrast_structure, 0.0), exponent);
            a = downsample(a);
            b = downsample(b);
        }
    }
    return score;
}

Image predict_image(const CoordinateModel& model, int width, int height) {
    Image blank(width, height, 1);
    const RegressionDataset grid = dataset_from_image(blank);
    const Matrix out = forward_batch(model, grid.x);
    Image img(width, height, model.output_dim());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        for (Eigen::Index c = 0; c < out.cols(); ++c) {
            img.data[static_cast<std::size_t>(i * out.cols() + c)] = std::clamp(out(i, c), 0.0, 1.0);
        }
    }
    return img;
}

Image render_prediction(const CoordinateModel& model, int width, int height) {
    return quantize8(predict_image(model, width, height));
}

Image dataset_image(const RegressionDataset& dataset) {
    Image img(dataset.width, dataset.height, 3);
    for (Eigen::Index i = 0; i < dataset.size(); ++i) {
        for (int c = 0; c < 3; ++c) img.data[static_cast<std::size_t>(i * 3 + c)] = dataset.y(i, c);
    }
    return img;
}

SnapshotTag tag_for_epoch(int epoch, int total_epochs) {
    if (epoch == 0) return SnapshotTag::Start;
    if (epoch >= total_epochs) return SnapshotTag::End;
    return SnapshotTag::Mid;
}

Vector image_spectrum(const CoordinateModel& model, const RegressionDataset& dataset,
                      std::size_t gram_cap, bool include_grid) {
    const auto ids = stratified_pixel_subsample(dataset.width, dataset.height, gram_cap);
    NtkOptions options;
    options.cap = gram_cap;
    return sym_eig(empirical_ntk(model, gather_rows(dataset.x, ids), include_grid, options).k)
        .eigenvalues;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const RegressionDataset& dataset,
                                const EpochCallback& on_epoch) {
    validate(config);
    if (config.task != Task::Image) throw ConfigError("run_experiment: preset is not an image task");

    ExperimentResult result;
    result.config = config;
    result.model = init_model(config.encoding, config.mlp(), config.seed);
    result.gram_samples =
        stratified_pixel_subsample(dataset.width, dataset.height, config.gram_cap);
    const Matrix gram_points = gather_rows(dataset.x, result.gram_samples);
    const Image truth = dataset_image(dataset);

    const int epochs = config.effective_epochs();
    const std::vector<int> schedule = config.snapshot_schedule();
    const bool has_grid = result.model.grids() != nullptr;
    NtkOptions options;
    options.cap = config.gram_cap;
    auto snapshot = [&](int epoch) {
        if (!std::binary_search(schedule.begin(), schedule.end(), epoch)) return;
        const SnapshotTag tag = tag_for_epoch(epoch, epochs);
        auto record = [&](bool include_grid) {
            const NtkGram gram = empirical_ntk(result.model, gram_points, include_grid, options);
            result.spectra.push_back({tag, epoch, gram.component, sym_eig(gram.k).eigenvalues});
        };
        record(true);
        if (has_grid && config.snapshot_mlp_only) record(false);
    };

    snapshot(0);
    const auto n = static_cast<std::size_t>(dataset.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(config.seed + 1);
    const auto batch = static_cast<std::size_t>(config.batch_size);
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::vector<std::size_t> ids(order.begin() + static_cast<std::ptrdiff_t>(start),
                                               order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch)));
            loss_sum += train_step(result.model, gather_rows(dataset.x, ids),
                                   gather_rows(dataset.y, ids), config.learning_rate,
                                   Loss::MeanSquaredError);
            ++batches;
        }
        const double epoch_psnr = psnr(predict_image(result.model, dataset.width, dataset.height), truth);
        result.loss.push_back(loss_sum / batches);
        result.psnr.push_back(epoch_psnr);
        if (on_epoch) on_epoch(epoch, result.loss.back(), epoch_psnr);
        snapshot(epoch);
    }

    const Image pred = predict_image(result.model, dataset.width, dataset.height);
    result.final_psnr = psnr(pred, truth);
    result.final_ms_ssim = ms_ssim(pred, truth);
    result.prediction = quantize8(pred);
    return result;
}

}  // namespace ntklab
