#pragma once

#include "ntklab/config.hpp"
#include "ntklab/network.hpp"

#include <string>

namespace ntklab {

/// Binary checkpoint:
///   8 bytes   magic "NTKLABCK"
///   u32       format version (1)
///   u64       byte length of the config text
///   ...       config text as written by format_config
///   u64       parameter count P
///   P × f64   parameters in flatten_parameters order
/// Integers and doubles are little-endian.
struct Checkpoint {
    ExperimentConfig config;
    CoordinateModel model;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ExperimentConfig& config,
                     const CoordinateModel& model);

/// Rebuilds the model from the stored config and overwrites its parameters.
/// Throws IoError on a bad magic, version, truncation or size mismatch.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ntklab
