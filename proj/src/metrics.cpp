#include "anerf/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "anerf/errors.hpp"

namespace anerf {

double psnr(const ImageF& a, const ImageF& b) {
    if (a.width != b.width || a.height != b.height)
        throw ConfigError("psnr: image dims differ");
    double sq = 0.0;
    for (size_t i = 0; i < a.rgb.size(); ++i) {
        double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
        sq += d * d;
    }
    double mse = sq / static_cast<double>(a.rgb.size());
    if (mse <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / mse));
}

namespace {

constexpr int kWin = 11;

const std::array<float, kWin * kWin>& gaussian_window() {
    static const std::array<float, kWin * kWin> window = [] {
        std::array<float, kWin * kWin> w;
        const float sigma = 1.5f;
        float total = 0.f;
        for (int y = 0; y < kWin; ++y) {
            for (int x = 0; x < kWin; ++x) {
                float dx = static_cast<float>(x - kWin / 2);
                float dy = static_cast<float>(y - kWin / 2);
                float v = std::exp(-(dx * dx + dy * dy) / (2.f * sigma * sigma));
                w[static_cast<size_t>(y) * kWin + x] = v;
                total += v;
            }
        }
        for (float& v : w) v /= total;
        return w;
    }();
    return window;
}

}  // namespace

double ssim(const ImageF& a, const ImageF& b) {
    if (a.width != b.width || a.height != b.height)
        throw ConfigError("ssim: image dims differ");
    if (a.width < kWin || a.height < kWin)
        throw ConfigError("ssim: image smaller than the 11x11 window");

    const auto& win = gaussian_window();
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;

    double total = 0.0;
    size_t count = 0;
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y + kWin <= a.height; ++y) {
            for (int x = 0; x + kWin <= a.width; ++x) {
                double mu_a = 0, mu_b = 0, aa = 0, bb = 0, ab = 0;
                for (int wy = 0; wy < kWin; ++wy) {
                    for (int wx = 0; wx < kWin; ++wx) {
                        double w = win[static_cast<size_t>(wy) * kWin + wx];
                        double va = a.pixel(x + wx, y + wy)[c];
                        double vb = b.pixel(x + wx, y + wy)[c];
                        mu_a += w * va;
                        mu_b += w * vb;
                        aa += w * va * va;
                        bb += w * vb * vb;
                        ab += w * va * vb;
                    }
                }
                double var_a = aa - mu_a * mu_a;
                double var_b = bb - mu_b * mu_b;
                double cov = ab - mu_a * mu_b;
                double s = ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) /
                           ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                total += s;
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

double speedup_percent(double t_baseline, double t_pipeline) {
    return 100.0 * (t_baseline - t_pipeline) / t_pipeline;
}

std::string PipelineSpec::label() const {
    switch (kind) {
        case Kind::Baseline: return "baseline";
        case Kind::Activation: {
            std::string s = "act(l=" + std::to_string(layer) + "," +
                            estimator_name(estimator) + ")";
            if (!estimator_relu) s += "[no-relu]";
            if (upsample_half) s += "[upsampled]";
            return s;
        }
        case Kind::MaskSkip: return "mask-skip(l=" + std::to_string(layer) + ")";
    }
    return "?";
}

std::vector<PipelineSpec> standard_matrix(int max_layer) {
    std::vector<PipelineSpec> specs;
    specs.push_back({PipelineSpec::Kind::Baseline});
    for (int l = 1; l <= max_layer; ++l)
        for (Estimator e : {Estimator::F1, Estimator::F2, Estimator::F3})
            specs.push_back({PipelineSpec::Kind::Activation, l, e});
    return specs;
}

ImageRender render_pipeline(const NerfModel& model, const Camera& cam,
                            const PipelineSpec& spec, const RenderOptions& base_opts) {
    RenderOptions opts = base_opts;
    switch (spec.kind) {
        case PipelineSpec::Kind::Baseline:
            return render_image_baseline(model, cam, opts);
        case PipelineSpec::Kind::Activation:
            opts.tap_layer = spec.layer;
            opts.estimator = spec.estimator;
            opts.estimator_relu = spec.estimator_relu;
            opts.upsample_half = spec.upsample_half;
            return render_image_activation(model, cam, opts);
        case PipelineSpec::Kind::MaskSkip:
            opts.tap_layer = spec.layer;
            return render_image_mask_skip(model, cam, opts);
    }
    throw ConfigError("render_pipeline: unknown pipeline kind");
}

std::vector<MetricsRow> bench(const NerfModel& model, const std::vector<DatasetView>& views,
                              const std::vector<PipelineSpec>& pipelines,
                              const RenderOptions& base_opts, int repeats,
                              const std::string& scene_id) {
    if (views.empty()) throw ConfigError("bench: no views");
    repeats = std::max(1, repeats);

    std::vector<MetricsRow> rows;
    for (const PipelineSpec& spec : pipelines) {
        MetricsRow row;
        row.scene = scene_id;
        row.pipeline = spec.label();
        row.threads = base_opts.threads;

        // warmup, discarded
        render_pipeline(model, views.front().camera, spec, base_opts);

        std::vector<double> times(static_cast<size_t>(repeats), 0.0);
        double psnr_sum = 0.0, ssim_sum = 0.0, frac_sum = 0.0;
        for (int rep = 0; rep < repeats; ++rep) {
            int64_t flops = 0;
            int failures = 0;
            for (const DatasetView& view : views) {
                ImageRender render = render_pipeline(model, view.camera, spec, base_opts);
                times[static_cast<size_t>(rep)] += render.stats.seconds;
                if (rep == 0) {
                    psnr_sum += psnr(render.image, view.image);
                    ssim_sum += ssim(render.image, view.image);
                    frac_sum += render.stats.fine_ray_fraction;
                    flops += render.stats.mlp_flops;
                    failures += render.stats.failure_rays;
                }
            }
            if (rep == 0) {
                row.mlp_flops = flops;
                row.failure_rays = failures;
            }
        }
        std::sort(times.begin(), times.end());
        row.seconds = times[times.size() / 2];
        row.psnr_db = psnr_sum / static_cast<double>(views.size());
        row.ssim = ssim_sum / static_cast<double>(views.size());
        row.fine_ray_fraction = frac_sum / static_cast<double>(views.size());
        rows.push_back(row);
    }
    return rows;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
    std::ofstream os(path);
    if (!os) throw RuntimeFailure("cannot write " + path.string());
    os << "scene,pipeline,psnr_db,ssim,seconds,mlp_flops,fine_ray_fraction,failure_rays,"
          "threads\n";
    char buf[256];
    for (const MetricsRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%s,%.4f,%.6f,%.6f,%lld,%.6f,%d,%d\n",
                      r.scene.c_str(), r.pipeline.c_str(), r.psnr_db, r.ssim, r.seconds,
                      static_cast<long long>(r.mlp_flops), r.fine_ray_fraction, r.failure_rays,
                      r.threads);
        os << buf;
    }
}

void write_metrics_json(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
    nlohmann::json root = nlohmann::json::array();
    for (const MetricsRow& r : rows) {
        root.push_back({{"scene", r.scene},
                        {"pipeline", r.pipeline},
                        {"psnr_db", r.psnr_db},
                        {"ssim", r.ssim},
                        {"seconds", r.seconds},
                        {"mlp_flops", r.mlp_flops},
                        {"fine_ray_fraction", r.fine_ray_fraction},
                        {"failure_rays", r.failure_rays},
                        {"threads", r.threads}});
    }
    std::ofstream os(path);
    if (!os) throw RuntimeFailure("cannot write " + path.string());
    os << root.dump(2) << "\n";
}

}  // namespace anerf
