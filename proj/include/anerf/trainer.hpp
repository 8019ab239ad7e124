#pragma once

#include <filesystem>

#include "anerf/dataset.hpp"
#include "anerf/renderer.hpp"

namespace anerf {

struct TrainConfig {
    int iterations = 1500;
    int rays_per_batch = 512;
    float lr = 5e-4f;
    float lr_final = 5e-5f;  // exponential decay target at the last iteration
    int n_coarse = 64;
    int n_fine = 64;
    uint64_t seed = 1;
    int threads = 1;
    int checkpoint_every = 0;  // 0: only the final checkpoint
    int log_every = 10;
    BackgroundMode background = BackgroundMode::White;

    void validate() const {
        if (iterations < 0 || rays_per_batch < 1 || n_coarse < 1 || n_fine < 0)
            throw ConfigError("TrainConfig: counts must be positive");
        if (lr <= 0.f || lr_final <= 0.f) throw ConfigError("TrainConfig: lr must be > 0");
    }
};

// Batch photometric loss: mean over rays of
//   ||c_coarse - gt||^2 + ||c_fine - gt||^2   (squared L2 over rgb).
double photometric_loss(std::span<const Vec3> coarse, std::span<const Vec3> fine,
                        std::span<const Vec3> gt);

struct LossRow {
    int iteration = 0;
    double coarse_mse = 0.0;  // mean ||c_c - gt||^2 over the batch
    double fine_mse = 0.0;
    double psnr = 0.0;  // from the per-channel fine MSE
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<LossRow> curve;
    bool aborted_non_finite = false;
    int completed_iterations = 0;
};

// Joint coarse+fine optimization with Adam. Deterministic in cfg.seed for
// any thread count: batches come from a seeded shuffle and gradients are
// reduced in fixed chunk order. A non-finite loss aborts and the last good
// parameters are returned. Periodic checkpoints land in checkpoint_dir when
// checkpoint_every > 0.
TrainResult train(const Dataset& dataset, const MlpConfig& mlp_cfg, const TrainConfig& cfg,
                  const std::filesystem::path& checkpoint_dir = {}, bool verbose = false);

void write_loss_csv(const std::filesystem::path& path, std::span<const LossRow> curve);

}  // namespace anerf
