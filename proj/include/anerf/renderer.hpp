#pragma once

#include <optional>

#include "anerf/activation.hpp"
#include "anerf/checkpoint.hpp"
#include "anerf/image.hpp"
#include "anerf/mlp.hpp"
#include "anerf/quadrature.hpp"
#include "anerf/sampling.hpp"
#include "anerf/scene.hpp"

namespace anerf {

// What the pipelines consume: the trained coarse/fine pair plus the scene
// domain flag (unbounded applies contract() before encoding).
struct NerfModel {
    MlpConfig config;
    MlpParams coarse;
    MlpParams fine;
    bool unbounded = false;
};

inline NerfModel model_from_checkpoint(Checkpoint&& ckpt, bool unbounded = false) {
    return NerfModel{ckpt.config, std::move(ckpt.coarse), std::move(ckpt.fine), unbounded};
}

enum class BackgroundMode { White, Black, Transparent };

inline Vec3 background_color(BackgroundMode mode) {
    return mode == BackgroundMode::White ? Vec3{1.f, 1.f, 1.f} : Vec3{0.f, 0.f, 0.f};
}

struct RenderOptions {
    int n_coarse = 64;
    int n_fine = 64;
    BackgroundMode background = BackgroundMode::White;
    bool stratified = false;         // coarse samples: jittered vs bin midpoints
    bool jitter_u = false;           // fine u-draws: jittered vs midpoints
    bool merge_uniform = true;       // fine pass sees uniform + resampled t (NeRF style)
    int tap_layer = 2;               // activation pipelines: trunk layer to read
    Estimator estimator = Estimator::F2;
    bool estimator_relu = true;      // ablation: drop the ReLU in f1/f2/f3
    bool upsample_half = false;      // record activations at half res, upsample
    bool exact_weight_hook = false;  // test hook: estimator replaced by true coarse weights
    uint64_t seed = 0;
    int threads = 1;
};

// Per-sample encodings for a ray. Positions run through contract() first
// when the model is unbounded.
Mat encode_ray_positions(const MlpConfig& cfg, const Ray& ray, std::span<const float> t,
                         bool contract_domain);
Mat encode_ray_direction(const MlpConfig& cfg, const Vec3& dir, int n);

struct RayShade {
    Vec3 rgb;
    float alpha = 0.f;
};

// Coarse pass over one ray: uniform samples, full forward, quadrature.
struct CoarsePass {
    SampleSet samples;
    std::vector<float> weights;  // raw w_i (un-normalized)
    RayShade shade;
    float v_layer = 0.f;         // per-ray activation scalar of opts.tap_layer
    std::vector<float> sigma;
    int64_t flops = 0;
};

CoarsePass run_coarse(const NerfModel& model, const Ray& ray, uint64_t ray_id,
                      const RenderOptions& opts);

// Resample-and-shade stage shared by every pipeline. A missing pdf engages
// the uniform fallback (equal bin weights) and sets `fallback`.
struct FineStage {
    RayShade shade;
    bool fallback = false;
    int64_t flops = 0;
};

FineStage run_fine(const NerfModel& model, const Ray& ray, uint64_t ray_id,
                   const RenderOptions& opts, const std::optional<WeightPdf>& pdf,
                   const SampleSet* merge_with);

struct BaselineRay {
    RayShade coarse;
    RayShade fine;
    bool fallback = false;
    int64_t flops = 0;
};

// Coarse -> pdf -> inverse transform -> merge -> fine (Θ_fine on N_c + N_f).
BaselineRay render_ray_baseline(const NerfModel& model, const Ray& ray, uint64_t ray_id,
                                const RenderOptions& opts);

struct ActivationRay {
    RayShade fine;
    bool degenerate = false;  // estimator produced an all-zero density
    int64_t flops = 0;
};

// Truncated coarse pass to opts.tap_layer -> f_l -> estimator -> pdf ->
// fine pass only. With exact_weight_hook the estimator is bypassed and the
// pdf comes from a full coarse pass (baseline arithmetic), which isolates
// the estimator as the only difference from render_ray_baseline.
ActivationRay render_ray_activation(const NerfModel& model, const Ray& ray, uint64_t ray_id,
                                    const RenderOptions& opts);

struct RenderStats {
    double seconds = 0.0;  // MLP + quadrature wall clock, file IO excluded
    int64_t mlp_flops = 0;
    int failure_rays = 0;
    double fine_ray_fraction = 1.0;
    int threads = 1;
};

struct ImageRender {
    ImageF image;
    std::vector<float> alpha;
    ImageF coarse_image;             // baseline and mask-skip
    std::vector<uint8_t> fine_mask;  // mask-skip: pixels whose fine pass ran
    ActivationImage act_image;       // mask-skip: the v_l field behind the mask
    RenderStats stats;
};

ImageRender render_image_baseline(const NerfModel& model, const Camera& cam,
                                  const RenderOptions& opts);

// Activation-informed image; honors opts.upsample_half (requires even
// image dims and even n_coarse).
ImageRender render_image_activation(const NerfModel& model, const Camera& cam,
                                    const RenderOptions& opts);

// Two-pass mask pipeline: coarse everywhere recording v_l, threshold at the
// image mean, fine pass only where v_l < mean.
ImageRender render_image_mask_skip(const NerfModel& model, const Camera& cam,
                                   const RenderOptions& opts);

// Coarse-pass introspection for the analysis CLI.
struct AnalysisResult {
    std::vector<ActivationImage> per_layer;  // index l-1 holds layer l
    ImageF coarse_image;
    std::vector<int> dense_counts;      // per pixel, sigma > tau_d
    std::vector<uint8_t> failure_flags; // estimator degenerate at opts.tap_layer
    RenderStats stats;
};

AnalysisResult analyze_image(const NerfModel& model, const Camera& cam,
                             const RenderOptions& opts, float tau_d);

// f_l, sigma and the density estimate along one ray (histogram fodder).
struct RayProfile {
    std::vector<float> feature;
    std::vector<float> sigma;
    std::vector<float> density_estimate;
};

RayProfile profile_ray(const NerfModel& model, const Ray& ray, uint64_t ray_id,
                       const RenderOptions& opts);

}  // namespace anerf
