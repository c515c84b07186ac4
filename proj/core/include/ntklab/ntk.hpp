#pragma once

#include "ntklab/linalg.hpp"
#include "ntklab/network.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ntklab {

enum class KernelComponent {
    Full,
    /// Grid-scalar block of every Jacobian zeroed before the inner products.
    MlpOnly,
};

/// Empirical NTK Gram matrix over a sample set at one parameter checkpoint.
struct NtkGram {
    Matrix k;
    std::vector<std::size_t> sample_ids;
    KernelComponent component = KernelComponent::Full;

    [[nodiscard]] Eigen::Index size() const { return k.rows(); }
};

enum class NtkMethod {
    /// Layer-wise assembly: Σ_l (Δ_l Δ_lᵀ) ∘ (A_l A_lᵀ / n_l + β²) plus the
    /// sparse grid term. Never materializes the N × P Jacobian.
    Factored,
    /// Materializes every per-sample Jacobian and takes J Jᵀ.
    Stacked,
};

inline constexpr std::size_t kDefaultGramCap = 1024;

struct NtkOptions {
    int channel = 0;
    std::size_t cap = kDefaultGramCap;
    NtkMethod method = NtkMethod::Factored;
};

/// K[i][j] = <∂f/∂θ(x_i), ∂f/∂θ(x_j)> at the model's current parameters,
/// for rows of `points`. Throws CapacityError when N exceeds `options.cap`.
NtkGram empirical_ntk(const CoordinateModel& model, const Matrix& points, bool include_grid,
                      const NtkOptions& options = {});

/// Cross kernel between two point sets (rows of `a` against rows of `b`).
Matrix cross_ntk(const CoordinateModel& model, const Matrix& a, const Matrix& b,
                 bool include_grid, int channel = 0);

/// Mean of the empirical kernel over independently initialized models.
Matrix seed_averaged_ntk(const EncodingSpec& encoding, const MlpConfig& mlp,
                         std::span<const std::uint64_t> seeds, const Matrix& points,
                         bool include_grid, int channel = 0);

/// Up to `cap` evenly spaced indices of [0, n).
std::vector<std::size_t> stratified_subsample(std::size_t n, std::size_t cap);

/// Row-major pixel indices on a regular stride covering the image, at most
/// `cap` of them.
std::vector<std::size_t> stratified_pixel_subsample(int width, int height, std::size_t cap);

struct WeylRow {
    std::size_t index;
    double lambda_base;
    double lambda_composed;
    double margin;
};

/// Eigenvalue lift check for K_composed = K_base + K⁺:
/// λ_i(composed) ≥ λ_i(base) + λ_min(K⁺) − ε and λ_i(composed) ≥ λ_i(base) − ε,
/// with ε = 1e-8·||K_composed||_max.
struct WeylReport {
    std::vector<WeylRow> rows;
    double plus_min_eigenvalue = 0.0;
    double epsilon = 0.0;
    double min_margin = 0.0;
    /// False when K_composed − K_base has an eigenvalue below −ε.
    bool precondition_ok = true;
    bool pass = false;
};

WeylReport weyl_check(const NtkGram& base, const NtkGram& composed);
void write_weyl_csv(std::ostream& out, const WeylReport& report);

struct DynamicsPrediction {
    std::vector<double> times;
    /// predictions[t]: predicted test outputs at times[t].
    std::vector<Vector> predictions;
    /// residuals[t][i] = exp(−λ_i t)·|(QY)_i| on the training kernel.
    std::vector<Vector> residuals;
    bool ridge_applied = false;
    double ridge = 0.0;
};

/// K_test K⁻¹ (I − exp(−K t)) Y evaluated through the spectrum of K. When
/// λ_min < 1e-10·λ_max a ridge of 1e-8·trace(K)/N is added to K; if that
/// still leaves the system unsolvable ConditioningError is thrown. Time is
/// learning_rate × step_count.
DynamicsPrediction predict_dynamics(const NtkGram& train, const Matrix& k_test, const Vector& y,
                                    std::span<const double> times);

/// exp(−λ_i t)·|(QY)_i| for every eigenindex and time.
std::vector<Vector> residual_decay(const NtkGram& k, const Vector& y,
                                   std::span<const double> times);

enum class SnapshotTag { Start, Mid, End };
std::string to_string(SnapshotTag tag);

struct SpectrumSnapshot {
    Spectrum spectrum;
    SnapshotTag tag = SnapshotTag::Start;
    int epoch = 0;
    bool include_grid = true;

    [[nodiscard]] Vector clamped() const { return clamped_eigenvalues(spectrum.eigenvalues); }
};

SpectrumSnapshot spectrum_snapshot(const CoordinateModel& model, const Matrix& points,
                                   bool include_grid, SnapshotTag tag, int epoch,
                                   const NtkOptions& options = {});

/// Eigenvalues recorded during training, without eigenvectors.
struct SpectrumRecord {
    SnapshotTag tag = SnapshotTag::Start;
    int epoch = 0;
    KernelComponent component = KernelComponent::Full;
    Vector eigenvalues;
};

inline constexpr std::size_t kResampledSpectrumLength = 8000;

/// Resamples a descending spectrum to `length` values by linear
/// interpolation of log10(λ) against normalized rank in [0, 1].
Vector resample_spectrum(const Vector& eigenvalues, std::size_t length = kResampledSpectrumLength,
                         double floor = kEigenvalueFloor);

/// Rank-wise arithmetic mean of resampled spectra.
Vector mean_spectrum(const std::vector<Vector>& spectra,
                     std::size_t length = kResampledSpectrumLength,
                     double floor = kEigenvalueFloor);

/// `t,sample_id,predicted,actual` rows.
struct DynamicsRow {
    double t;
    std::size_t sample_id;
    double predicted;
    double actual;
};
void write_dynamics_csv(std::ostream& out, std::span<const DynamicsRow> rows);

}  // namespace ntklab
