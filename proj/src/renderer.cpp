#include "anerf/renderer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>

#include "anerf/errors.hpp"
#include "anerf/parallel.hpp"

namespace anerf {

Mat encode_ray_positions(const MlpConfig& cfg, const Ray& ray, std::span<const float> t,
                         bool contract_domain) {
    Mat out(static_cast<Eigen::Index>(t.size()), cfg.pos_dim());
    std::vector<float> enc(static_cast<size_t>(cfg.pos_dim()));
    for (size_t i = 0; i < t.size(); ++i) {
        Vec3 p = ray.at(t[i]);
        if (contract_domain) p = contract(p);
        float coords[3] = {p.x, p.y, p.z};
        positional_encoding(coords, cfg.pe_frequencies_pos, cfg.include_input_in_encoding, enc);
        for (int c = 0; c < cfg.pos_dim(); ++c) out(static_cast<Eigen::Index>(i), c) = enc[c];
    }
    return out;
}

Mat encode_ray_direction(const MlpConfig& cfg, const Vec3& dir, int n) {
    std::vector<float> enc(static_cast<size_t>(cfg.dir_dim()));
    float coords[3] = {dir.x, dir.y, dir.z};
    positional_encoding(coords, cfg.pe_frequencies_dir, cfg.include_input_in_encoding, enc);
    Mat out(n, cfg.dir_dim());
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < cfg.dir_dim(); ++c) out(i, c) = enc[c];
    return out;
}

namespace {

// Full forward + quadrature of one network over a sample set.
struct ShadedSamples {
    ForwardTrace trace;
    std::vector<float> weights;
    std::vector<float> transmittance;
    RayShade shade;
};

ShadedSamples shade_samples(const MlpConfig& cfg, const MlpParams& params, const Ray& ray,
                            const SampleSet& samples, bool unbounded, BackgroundMode bg) {
    ShadedSamples out;
    size_t n = samples.size();
    Mat pos = encode_ray_positions(cfg, ray, samples.t, unbounded);
    Mat dir = encode_ray_direction(cfg, ray.dir, static_cast<int>(n));
    out.trace = forward_with_taps(cfg, params, std::move(pos), std::move(dir),
                                  cfg.trunk_layers, true);
    out.weights.resize(n);
    out.transmittance.resize(n + 1);
    compute_weights<float>({out.trace.sigma.data(), n}, samples.delta,
                           out.weights, out.transmittance);
    Vec3 bgc = background_color(bg);
    float bg_arr[3] = {bgc.x, bgc.y, bgc.z};
    float rgb[3];
    out.shade.alpha = composite_ray<float>(out.weights, {out.trace.color.data(), 3 * n},
                                           bg_arr, rgb);
    out.shade.rgb = {rgb[0], rgb[1], rgb[2]};
    return out;
}

WeightPdf uniform_pdf(const Ray& ray, int n_bins) {
    WeightPdf pdf;
    pdf.bin_edges = uniform_bin_edges(ray, n_bins);
    pdf.bin_weights.assign(static_cast<size_t>(n_bins), 1.f / static_cast<float>(n_bins));
    return pdf;
}

}  // namespace

CoarsePass run_coarse(const NerfModel& model, const Ray& ray, uint64_t ray_id,
                      const RenderOptions& opts) {
    Rng rng = make_ray_rng(opts.seed, ray_id, kStreamCoarseJitter);
    CoarsePass out;
    out.samples = uniform_samples(ray, opts.n_coarse, opts.stratified, rng);
    ShadedSamples shaded = shade_samples(model.config, model.coarse, ray, out.samples,
                                         model.unbounded, opts.background);
    out.weights = std::move(shaded.weights);
    out.shade = shaded.shade;
    out.flops = shaded.trace.flops;
    out.sigma.assign(shaded.trace.sigma.data(), shaded.trace.sigma.data() + out.samples.size());
    if (opts.tap_layer >= 1 && opts.tap_layer <= model.config.trunk_layers)
        out.v_layer = ray_scalar(shaded.trace.activations[opts.tap_layer - 1]);
    return out;
}

FineStage run_fine(const NerfModel& model, const Ray& ray, uint64_t ray_id,
                   const RenderOptions& opts, const std::optional<WeightPdf>& pdf,
                   const SampleSet* merge_with) {
    FineStage out;
    out.fallback = !pdf.has_value();

    SampleSet fine_samples;
    if (opts.n_fine > 0) {
        Rng rng = make_ray_rng(opts.seed, ray_id, kStreamFineU);
        std::vector<float> u = stratified_uniforms(opts.n_fine, opts.jitter_u, rng);
        const WeightPdf& effective = pdf ? *pdf : uniform_pdf(ray, opts.n_coarse);
        fine_samples = inverse_transform_sample(effective, u);
    } else {
        fine_samples.t_near = ray.t_near;
        fine_samples.t_far = ray.t_far;
    }

    SampleSet shaded_set =
        merge_with ? merge_and_sort(*merge_with, fine_samples) : std::move(fine_samples);
    if (shaded_set.size() == 0)
        throw ConfigError("run_fine: no samples (n_fine = 0 without merged uniforms)");

    ShadedSamples shaded = shade_samples(model.config, model.fine, ray, shaded_set,
                                         model.unbounded, opts.background);
    out.shade = shaded.shade;
    out.flops = shaded.trace.flops;
    return out;
}

BaselineRay render_ray_baseline(const NerfModel& model, const Ray& ray, uint64_t ray_id,
                                const RenderOptions& opts) {
    CoarsePass coarse = run_coarse(model, ray, ray_id, opts);
    std::optional<WeightPdf> pdf =
        pdf_from_weights(coarse.weights, uniform_bin_edges(ray, opts.n_coarse));
    FineStage fine = run_fine(model, ray, ray_id, opts, pdf, &coarse.samples);

    BaselineRay out;
    out.coarse = coarse.shade;
    out.fine = fine.shade;
    out.fallback = fine.fallback;
    out.flops = coarse.flops + fine.flops;
    return out;
}

ActivationRay render_ray_activation(const NerfModel& model, const Ray& ray, uint64_t ray_id,
                                    const RenderOptions& opts) {
    ActivationRay out;
    std::optional<WeightPdf> pdf;
    SampleSet uniform_set;
    int64_t coarse_stage_flops = 0;

    if (opts.exact_weight_hook) {
        CoarsePass coarse = run_coarse(model, ray, ray_id, opts);
        pdf = pdf_from_weights(coarse.weights, uniform_bin_edges(ray, opts.n_coarse));
        uniform_set = std::move(coarse.samples);
        coarse_stage_flops = coarse.flops;
    } else {
        Rng rng = make_ray_rng(opts.seed, ray_id, kStreamCoarseJitter);
        uniform_set = uniform_samples(ray, opts.n_coarse, opts.stratified, rng);
        Mat pos = encode_ray_positions(model.config, ray, uniform_set.t, model.unbounded);
        ForwardTrace trace = forward_with_taps(model.config, model.coarse, std::move(pos),
                                               Mat(), opts.tap_layer, false);
        coarse_stage_flops = trace.flops;
        ActivationFeature f =
            feature_per_sample(trace.activations[opts.tap_layer - 1], opts.tap_layer);
        DensityEstimate d = estimate_density(f, opts.estimator, opts.estimator_relu);
        pdf = weights_from_density(d, uniform_bin_edges(ray, opts.n_coarse));
        out.degenerate = !pdf.has_value();
    }

    FineStage fine = run_fine(model, ray, ray_id, opts, pdf,
                              opts.merge_uniform ? &uniform_set : nullptr);
    out.fine = fine.shade;
    out.flops = coarse_stage_flops + fine.flops;
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

void store_shade(ImageF& img, std::vector<float>& alpha, int x, int y, const RayShade& s) {
    float* px = img.pixel(x, y);
    px[0] = s.rgb.x;
    px[1] = s.rgb.y;
    px[2] = s.rgb.z;
    alpha[static_cast<size_t>(y) * img.width + x] = s.alpha;
}

}  // namespace

ImageRender render_image_baseline(const NerfModel& model, const Camera& cam,
                                  const RenderOptions& opts) {
    ImageRender out;
    out.image = ImageF::make(cam.width, cam.height);
    out.coarse_image = ImageF::make(cam.width, cam.height);
    out.alpha.assign(static_cast<size_t>(cam.width) * cam.height, 0.f);
    out.stats.threads = opts.threads;

    std::atomic<int64_t> flops{0};
    std::atomic<int> failures{0};
    auto t0 = Clock::now();
    parallel_for_chunks(cam.height, opts.threads, [&](int y) {
        int64_t row_flops = 0;
        int row_failures = 0;
        for (int x = 0; x < cam.width; ++x) {
            uint64_t ray_id = static_cast<uint64_t>(y) * cam.width + x;
            BaselineRay r = render_ray_baseline(model, cam.ray_for_pixel(x, y), ray_id, opts);
            store_shade(out.image, out.alpha, x, y, r.fine);
            float* cpx = out.coarse_image.pixel(x, y);
            cpx[0] = r.coarse.rgb.x;
            cpx[1] = r.coarse.rgb.y;
            cpx[2] = r.coarse.rgb.z;
            row_flops += r.flops;
            if (r.fallback) ++row_failures;
        }
        flops += row_flops;
        failures += row_failures;
    });
    out.stats.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.stats.mlp_flops = flops;
    out.stats.failure_rays = failures;
    out.stats.fine_ray_fraction = 1.0;
    return out;
}

namespace {

ImageRender render_image_activation_full(const NerfModel& model, const Camera& cam,
                                         const RenderOptions& opts) {
    ImageRender out;
    out.image = ImageF::make(cam.width, cam.height);
    out.alpha.assign(static_cast<size_t>(cam.width) * cam.height, 0.f);
    out.stats.threads = opts.threads;

    std::atomic<int64_t> flops{0};
    std::atomic<int> failures{0};
    auto t0 = Clock::now();
    parallel_for_chunks(cam.height, opts.threads, [&](int y) {
        int64_t row_flops = 0;
        int row_failures = 0;
        for (int x = 0; x < cam.width; ++x) {
            uint64_t ray_id = static_cast<uint64_t>(y) * cam.width + x;
            ActivationRay r = render_ray_activation(model, cam.ray_for_pixel(x, y), ray_id, opts);
            store_shade(out.image, out.alpha, x, y, r.fine);
            row_flops += r.flops;
            if (r.degenerate) ++row_failures;
        }
        flops += row_flops;
        failures += row_failures;
    });
    out.stats.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.stats.mlp_flops = flops;
    out.stats.failure_rays = failures;
    return out;
}

ImageRender render_image_activation_upsampled(const NerfModel& model, const Camera& cam,
                                              const RenderOptions& opts) {
    if (cam.width % 2 || cam.height % 2 || opts.n_coarse % 2)
        throw ConfigError("upsampled activations need even image dims and even n_coarse");

    ImageRender out;
    out.image = ImageF::make(cam.width, cam.height);
    out.alpha.assign(static_cast<size_t>(cam.width) * cam.height, 0.f);
    out.stats.threads = opts.threads;

    Camera half = cam;
    half.width /= 2;
    half.height /= 2;
    half.focal *= 0.5f;

    Volume half_features;
    half_features.height = half.height;
    half_features.width = half.width;
    half_features.depth = opts.n_coarse / 2;
    half_features.data.resize(static_cast<size_t>(half.height) * half.width *
                              half_features.depth);

    std::atomic<int64_t> flops{0};
    std::atomic<int> failures{0};
    auto t0 = Clock::now();

    // Half-res truncated pass: one feature value per (pixel, sample).
    parallel_for_chunks(half.height, opts.threads, [&](int hy) {
        int64_t row_flops = 0;
        for (int hx = 0; hx < half.width; ++hx) {
            uint64_t ray_id = static_cast<uint64_t>(hy) * half.width + hx;
            Ray ray = half.ray_for_pixel(hx, hy);
            Rng rng = make_ray_rng(opts.seed, ray_id, kStreamCoarseJitter);
            SampleSet samples = uniform_samples(ray, opts.n_coarse / 2, opts.stratified, rng);
            Mat pos = encode_ray_positions(model.config, ray, samples.t, model.unbounded);
            ForwardTrace trace = forward_with_taps(model.config, model.coarse, std::move(pos),
                                                   Mat(), opts.tap_layer, false);
            row_flops += trace.flops;
            ActivationFeature f =
                feature_per_sample(trace.activations[opts.tap_layer - 1], opts.tap_layer);
            for (int k = 0; k < half_features.depth; ++k)
                half_features.at(hx, hy, k) = f.values[static_cast<size_t>(k)];
        }
        flops += row_flops;
    });

    Volume full = upsample_nearest(half_features);

    parallel_for_chunks(cam.height, opts.threads, [&](int y) {
        int64_t row_flops = 0;
        int row_failures = 0;
        for (int x = 0; x < cam.width; ++x) {
            uint64_t ray_id = static_cast<uint64_t>(y) * cam.width + x;
            Ray ray = cam.ray_for_pixel(x, y);

            ActivationFeature f;
            f.layer = opts.tap_layer;
            f.values.resize(static_cast<size_t>(opts.n_coarse));
            for (int k = 0; k < opts.n_coarse; ++k) f.values[static_cast<size_t>(k)] = full.at(x, y, k);

            DensityEstimate d = estimate_density(f, opts.estimator, opts.estimator_relu);
            std::optional<WeightPdf> pdf =
                weights_from_density(d, uniform_bin_edges(ray, opts.n_coarse));
            if (!pdf) ++row_failures;

            SampleSet uniform_set;
            if (opts.merge_uniform) {
                Rng rng = make_ray_rng(opts.seed, ray_id, kStreamCoarseJitter);
                uniform_set = uniform_samples(ray, opts.n_coarse, opts.stratified, rng);
            }
            FineStage fine = run_fine(model, ray, ray_id, opts, pdf,
                                      opts.merge_uniform ? &uniform_set : nullptr);
            store_shade(out.image, out.alpha, x, y, fine.shade);
            row_flops += fine.flops;
        }
        flops += row_flops;
        failures += row_failures;
    });

    out.stats.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.stats.mlp_flops = flops;
    out.stats.failure_rays = failures;
    return out;
}

}  // namespace

ImageRender render_image_activation(const NerfModel& model, const Camera& cam,
                                    const RenderOptions& opts) {
    if (opts.tap_layer < 1 || opts.tap_layer > model.config.trunk_layers)
        throw ConfigError("render_image_activation: tap_layer out of range");
    return opts.upsample_half ? render_image_activation_upsampled(model, cam, opts)
                              : render_image_activation_full(model, cam, opts);
}

ImageRender render_image_mask_skip(const NerfModel& model, const Camera& cam,
                                   const RenderOptions& opts) {
    if (opts.tap_layer < 1 || opts.tap_layer > model.config.trunk_layers)
        throw ConfigError("render_image_mask_skip: tap_layer out of range");

    size_t n_px = static_cast<size_t>(cam.width) * cam.height;
    ImageRender out;
    out.image = ImageF::make(cam.width, cam.height);
    out.coarse_image = ImageF::make(cam.width, cam.height);
    out.alpha.assign(n_px, 0.f);
    out.act_image = ActivationImage{cam.width, cam.height, opts.tap_layer,
                                    std::vector<float>(n_px, 0.f)};
    out.stats.threads = opts.threads;

    // Pass 1: coarse everywhere, keeping per-ray weights and samples so the
    // fine pass resumes with identical arithmetic.
    std::vector<std::vector<float>> weights(n_px);
    std::vector<SampleSet> samples(n_px);
    std::atomic<int64_t> flops{0};
    std::atomic<int> failures{0};

    auto t0 = Clock::now();
    parallel_for_chunks(cam.height, opts.threads, [&](int y) {
        int64_t row_flops = 0;
        for (int x = 0; x < cam.width; ++x) {
            uint64_t ray_id = static_cast<uint64_t>(y) * cam.width + x;
            CoarsePass coarse = run_coarse(model, cam.ray_for_pixel(x, y), ray_id, opts);
            store_shade(out.coarse_image, out.alpha, x, y, coarse.shade);
            out.act_image.v[ray_id] = coarse.v_layer;
            weights[ray_id] = std::move(coarse.weights);
            samples[ray_id] = std::move(coarse.samples);
            row_flops += coarse.flops;
        }
        flops += row_flops;
    });

    // Threshold at the image mean; strictly-below pixels get the fine pass.
    out.fine_mask = derive_mask(out.act_image);
    std::vector<uint32_t> masked;
    masked.reserve(n_px);
    for (uint32_t i = 0; i < n_px; ++i)
        if (out.fine_mask[i]) masked.push_back(i);

    int chunk = 256;
    int n_chunks = static_cast<int>((masked.size() + chunk - 1) / chunk);
    parallel_for_chunks(n_chunks, opts.threads, [&](int ci) {
        int64_t chunk_flops = 0;
        int chunk_failures = 0;
        size_t begin = static_cast<size_t>(ci) * chunk;
        size_t end = std::min(masked.size(), begin + chunk);
        for (size_t k = begin; k < end; ++k) {
            uint32_t ray_id = masked[k];
            int x = static_cast<int>(ray_id % cam.width);
            int y = static_cast<int>(ray_id / cam.width);
            Ray ray = cam.ray_for_pixel(x, y);
            std::optional<WeightPdf> pdf =
                pdf_from_weights(weights[ray_id], uniform_bin_edges(ray, opts.n_coarse));
            if (!pdf) ++chunk_failures;
            FineStage fine = run_fine(model, ray, ray_id, opts, pdf, &samples[ray_id]);
            store_shade(out.image, out.alpha, x, y, fine.shade);
            chunk_flops += fine.flops;
        }
        flops += chunk_flops;
        failures += chunk_failures;
    });

    // Everywhere else the coarse radiance is the final output.
    for (size_t i = 0; i < n_px; ++i) {
        if (!out.fine_mask[i]) {
            out.image.rgb[3 * i + 0] = out.coarse_image.rgb[3 * i + 0];
            out.image.rgb[3 * i + 1] = out.coarse_image.rgb[3 * i + 1];
            out.image.rgb[3 * i + 2] = out.coarse_image.rgb[3 * i + 2];
        }
    }
    out.stats.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.stats.mlp_flops = flops;
    out.stats.failure_rays = failures;
    out.stats.fine_ray_fraction =
        n_px > 0 ? static_cast<double>(masked.size()) / static_cast<double>(n_px) : 0.0;
    return out;
}

AnalysisResult analyze_image(const NerfModel& model, const Camera& cam,
                             const RenderOptions& opts, float tau_d) {
    size_t n_px = static_cast<size_t>(cam.width) * cam.height;
    AnalysisResult out;
    out.coarse_image = ImageF::make(cam.width, cam.height);
    out.dense_counts.assign(n_px, 0);
    out.failure_flags.assign(n_px, 0);
    out.per_layer.resize(static_cast<size_t>(model.config.trunk_layers));
    for (int l = 1; l <= model.config.trunk_layers; ++l)
        out.per_layer[l - 1] =
            ActivationImage{cam.width, cam.height, l, std::vector<float>(n_px, 0.f)};
    out.stats.threads = opts.threads;

    std::atomic<int64_t> flops{0};
    auto t0 = Clock::now();
    parallel_for_chunks(cam.height, opts.threads, [&](int y) {
        int64_t row_flops = 0;
        for (int x = 0; x < cam.width; ++x) {
            uint64_t ray_id = static_cast<uint64_t>(y) * cam.width + x;
            Ray ray = cam.ray_for_pixel(x, y);
            Rng rng = make_ray_rng(opts.seed, ray_id, kStreamCoarseJitter);
            SampleSet samples = uniform_samples(ray, opts.n_coarse, opts.stratified, rng);
            ShadedSamples shaded = shade_samples(model.config, model.coarse, ray, samples,
                                                 model.unbounded, opts.background);
            row_flops += shaded.trace.flops;
            float* px = out.coarse_image.pixel(x, y);
            px[0] = shaded.shade.rgb.x;
            px[1] = shaded.shade.rgb.y;
            px[2] = shaded.shade.rgb.z;
            for (int l = 1; l <= model.config.trunk_layers; ++l)
                out.per_layer[l - 1].v[ray_id] = ray_scalar(shaded.trace.activations[l - 1]);
            out.dense_counts[ray_id] = count_dense_samples(
                {shaded.trace.sigma.data(), samples.size()}, tau_d);
            if (opts.tap_layer >= 1 && opts.tap_layer <= model.config.trunk_layers) {
                ActivationFeature f = feature_per_sample(
                    shaded.trace.activations[opts.tap_layer - 1], opts.tap_layer);
                DensityEstimate d = estimate_density(f, opts.estimator, opts.estimator_relu);
                auto pdf = weights_from_density(d, uniform_bin_edges(ray, opts.n_coarse));
                out.failure_flags[ray_id] = pdf ? 0 : 1;
            }
        }
        flops += row_flops;
    });
    out.stats.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    out.stats.mlp_flops = flops;
    return out;
}

RayProfile profile_ray(const NerfModel& model, const Ray& ray, uint64_t ray_id,
                       const RenderOptions& opts) {
    Rng rng = make_ray_rng(opts.seed, ray_id, kStreamCoarseJitter);
    SampleSet samples = uniform_samples(ray, opts.n_coarse, opts.stratified, rng);
    Mat pos = encode_ray_positions(model.config, ray, samples.t, model.unbounded);
    Mat dir = encode_ray_direction(model.config, ray.dir, static_cast<int>(samples.size()));
    ForwardTrace trace = forward_with_taps(model.config, model.coarse, std::move(pos),
                                           std::move(dir), model.config.trunk_layers, true);

    RayProfile out;
    ActivationFeature f =
        feature_per_sample(trace.activations[opts.tap_layer - 1], opts.tap_layer);
    out.feature = f.values;
    out.sigma.assign(trace.sigma.data(), trace.sigma.data() + samples.size());
    out.density_estimate = estimate_density(f, opts.estimator, opts.estimator_relu).d;
    return out;
}

}  // namespace anerf
