#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "anerf/dataset.hpp"
#include "anerf/renderer.hpp"

namespace anerf {

// 10 log10(1 / MSE) over rgb in [0,1]; identical images report the cap 99.0.
double psnr(const ImageF& a, const ImageF& b);

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
// C2 = 0.03^2, computed per channel over valid windows then averaged.
double ssim(const ImageF& a, const ImageF& b);

// Speedup as a percentage of the pipeline's own time: (t_base - t_pipe) / t_pipe.
double speedup_percent(double t_baseline, double t_pipeline);

struct PipelineSpec {
    enum class Kind { Baseline, Activation, MaskSkip };
    Kind kind = Kind::Baseline;
    int layer = 0;
    Estimator estimator = Estimator::F2;
    bool estimator_relu = true;
    bool upsample_half = false;

    std::string label() const;
};

// One pipeline matrix: baseline plus act(l, f) for l in 1..max_layer.
std::vector<PipelineSpec> standard_matrix(int max_layer = 3);

struct MetricsRow {
    std::string scene;
    std::string pipeline;
    double psnr_db = 0.0;
    double ssim = 0.0;
    double seconds = 0.0;  // median over repeats, summed over views
    int64_t mlp_flops = 0;
    double fine_ray_fraction = 1.0;
    int failure_rays = 0;
    int threads = 1;
};

// Render every view with every pipeline `repeats` times (after one discarded
// warmup) and report median wall-clock plus quality vs the ground truth.
std::vector<MetricsRow> bench(const NerfModel& model, const std::vector<DatasetView>& views,
                              const std::vector<PipelineSpec>& pipelines,
                              const RenderOptions& base_opts, int repeats,
                              const std::string& scene_id);

ImageRender render_pipeline(const NerfModel& model, const Camera& cam,
                            const PipelineSpec& spec, const RenderOptions& base_opts);

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
void write_metrics_json(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

}  // namespace anerf
