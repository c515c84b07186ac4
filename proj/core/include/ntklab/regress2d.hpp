#pragma once

#include "ntklab/config.hpp"
#include "ntklab/image.hpp"
#include "ntklab/network.hpp"
#include "ntklab/ntk.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ntklab {

/// One sample per pixel, row-major. Row i of `x` is (col/(w−1), row/(h−1));
/// row i of `y` is the RGB value in [0,1] (gray images are replicated).
struct RegressionDataset {
    Matrix x;
    Matrix y;
    int width = 0;
    int height = 0;

    [[nodiscard]] Eigen::Index size() const { return x.rows(); }
};

RegressionDataset dataset_from_image(const Image& image);
RegressionDataset load_image_dataset(const std::string& path);

/// Rows of `m` picked by `ids`.
Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& ids);

inline constexpr double kPsnrCap = 100.0;

/// 10·log10(1/MSE) over all samples, peak 1. Zero MSE returns kPsnrCap.
double psnr(const Image& pred, const Image& truth);

/// Multi-scale SSIM on the grayscale conversion of both images.
///
/// 11×11 Gaussian window (σ = 1.5), valid region only, C1 = 0.01², C2 =
/// 0.03², 2×2 mean downsampling between scales. The scale count is the
/// largest s ≤ `max_scales` with min(width, height) ≥ 11·2^(s−1); the first s
/// exponents are renormalized to sum to 1. Finer scales contribute their mean
/// contrast-structure term, the coarsest its mean SSIM; negative terms are
/// clamped to 0. Throws DimensionError for images under 11 px.
double ms_ssim(const Image& pred, const Image& truth, int max_scales = 5);

/// Number of scales ms_ssim uses for an image of this size.
int ms_ssim_scale_count(int width, int height, int max_scales = 5);

/// Model output at every pixel center, clamped to [0,1]. Not quantized.
Image predict_image(const CoordinateModel& model, int width, int height);

/// predict_image quantized to 8 bits.
Image render_prediction(const CoordinateModel& model, int width, int height);

Image dataset_image(const RegressionDataset& dataset);

struct ExperimentResult {
    ExperimentConfig config;
    /// Per epoch, 1..E: mean batch loss and PSNR after the epoch.
    std::vector<double> loss;
    std::vector<double> psnr;
    double final_psnr = 0.0;
    double final_ms_ssim = 0.0;
    std::vector<SpectrumRecord> spectra;
    /// Pixel indices of the Gram subsample.
    std::vector<std::size_t> gram_samples;
    CoordinateModel model;
    Image prediction;
};

/// Called after every epoch with (epoch, mean loss, PSNR).
using EpochCallback = std::function<void(int, double, double)>;

/// Trains `config` on `dataset` and records the configured spectra. Batches
/// are drawn from a per-epoch shuffle seeded from `config.seed`, so the run
/// is deterministic.
ExperimentResult run_experiment(const ExperimentConfig& config, const RegressionDataset& dataset,
                                const EpochCallback& on_epoch = {});

SnapshotTag tag_for_epoch(int epoch, int total_epochs);

/// Spectrum of the kernel over the stratified pixel subsample.
Vector image_spectrum(const CoordinateModel& model, const RegressionDataset& dataset,
                      std::size_t gram_cap, bool include_grid);

}  // namespace ntklab
