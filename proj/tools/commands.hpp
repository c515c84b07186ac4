#pragma once

#include "ntklab/config.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace ntklab::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kRuntimeFailure = 1;
inline constexpr int kUsageError = 2;

/// Thrown for bad invocations the parser cannot catch (e.g. a non-grid
/// preset passed to ablate-grid); mapped to kUsageError.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flags shared by the training commands. Resolution order is preset, then
/// config file, then explicit flags.
struct RunOptions {
    std::string preset;
    std::string config_file;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> epochs;
    std::optional<std::size_t> gram_cap;
    bool quiet = false;
};

ExperimentConfig resolve_config(const RunOptions& options);

int cmd_regress2d(const std::string& image_path, const RunOptions& options);
int cmd_ablate_grid(const std::string& image_path, const RunOptions& options);
int cmd_dynamics(const std::string& image_path, const RunOptions& options, int samples, int steps);
int cmd_surface3d(const std::string& mesh_path, const RunOptions& options);
int cmd_diagnostics(const std::string& checkpoint_path, const std::string& out_dir, int resolution);
int cmd_presets(const std::string& show);

}  // namespace ntklab::cli
