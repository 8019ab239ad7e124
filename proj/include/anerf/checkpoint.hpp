#pragma once

#include <filesystem>
#include <optional>

#include "anerf/mlp.hpp"

namespace anerf {

// Trained state for the coarse/fine pair. Optimizer state rides along so
// training can resume.
struct Checkpoint {
    MlpConfig config;
    MlpParams coarse;
    MlpParams fine;
    std::optional<AdamState> opt_coarse;
    std::optional<AdamState> opt_fine;
};

// Binary format: "ANRF" magic, u32 version, config block, then per network
// the tensors in a fixed order as row-major little-endian f32 with shape
// headers, then an optional optimizer section. Round-trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace anerf
