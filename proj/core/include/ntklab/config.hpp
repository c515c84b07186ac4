#pragma once

#include "ntklab/encoding.hpp"
#include "ntklab/network.hpp"
#include "ntklab/ntk.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ntklab {

enum class Task {
    /// RGB image regression with MSE.
    Image,
    /// Occupancy regression with sigmoid + BCE.
    Surface,
};

/// Everything needed to reproduce one training run.
///
/// Config files are plain `key = value` lines; `#` starts a comment. See
/// docs/formats.md for the key list and data/configs/example.cfg for an
/// annotated example.
struct ExperimentConfig {
    std::string name = "custom";
    std::string description;
    Task task = Task::Image;
    EncodingSpec encoding = IdentitySpec{};
    std::vector<int> hidden{512, 512};
    double beta = 0.1;
    double learning_rate = 100.0;
    int epochs = 300;
    /// Multiplies `epochs` to obtain the epoch count actually run.
    double epoch_scale = 1.0;
    int batch_size = 32;
    std::uint64_t seed = 0;
    /// Epochs at which kernel spectra are recorded; empty means {0, E/2, E}.
    std::vector<int> snapshot_epochs;
    std::size_t gram_cap = kDefaultGramCap;
    /// Also record spectra with the grid block of the Jacobian zeroed.
    bool snapshot_mlp_only = false;
    /// Surface task: fresh points drawn per epoch (0 means one batch).
    int samples_per_epoch = 0;
    /// Surface task: size of the fixed spectrum probe set.
    int probe_points = 512;
    /// Surface task: depth render resolution (square).
    int render_size = 128;

    [[nodiscard]] int effective_epochs() const;
    [[nodiscard]] std::vector<int> snapshot_schedule() const;
    [[nodiscard]] int output_dim() const { return task == Task::Image ? 3 : 1; }
    [[nodiscard]] MlpConfig mlp() const;
};

void validate(const ExperimentConfig& config);

/// Built-in presets: image regression settings, their desk-scale variants,
/// the tuned image settings and the mesh occupancy settings.
const std::vector<ExperimentConfig>& builtin_presets();

/// Throws ConfigError listing the known names when `name` is not a preset.
const ExperimentConfig& find_preset(const std::string& name);

/// Applies every `key = value` line of `in` on top of `config`. Unknown keys
/// and malformed values throw ConfigError naming the line.
void apply_config(std::istream& in, ExperimentConfig& config);
void apply_config_file(const std::string& path, ExperimentConfig& config);

/// Round-trippable text form (every key, full precision).
std::string format_config(const ExperimentConfig& config);

std::string to_string(Task task);

}  // namespace ntklab
