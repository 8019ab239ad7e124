#include "anerf/trainer.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include "anerf/parallel.hpp"

namespace anerf {

double photometric_loss(std::span<const Vec3> coarse, std::span<const Vec3> fine,
                        std::span<const Vec3> gt) {
    if (coarse.size() != gt.size() || fine.size() != gt.size())
        throw ConfigError("photometric_loss: batch shapes differ");
    double total = 0.0;
    for (size_t i = 0; i < gt.size(); ++i) {
        Vec3 dc = coarse[i] - gt[i];
        Vec3 df = fine[i] - gt[i];
        total += dc.dot(dc) + df.dot(df);
    }
    return gt.empty() ? 0.0 : total / static_cast<double>(gt.size());
}

namespace {

struct RayRef {
    uint32_t view = 0;
    uint16_t x = 0, y = 0;
};

struct ChunkResult {
    Gradients g_coarse;
    Gradients g_fine;
    double coarse_sq = 0.0;
    double fine_sq = 0.0;
};

// One network pass over a chunk of rays: forward, per-ray quadrature,
// loss gradient, backward. Samples per ray must be uniform across the chunk.
struct ChunkPass {
    ForwardTrace trace;
    std::vector<float> weights;        // packed per ray
    std::vector<float> transmittance;  // n+1 per ray
    std::vector<Vec3> rgb;
};

ChunkPass forward_chunk(const MlpConfig& cfg, const MlpParams& params,
                        std::span<const Ray> rays,
                        std::span<const SampleSet> samples, bool unbounded, const Vec3& bg) {
    size_t n_rays = rays.size();
    size_t per_ray = samples[0].size();
    size_t total = n_rays * per_ray;

    Mat pos(static_cast<Eigen::Index>(total), cfg.pos_dim());
    Mat dir(static_cast<Eigen::Index>(total), cfg.dir_dim());
    for (size_t r = 0; r < n_rays; ++r) {
        pos.middleRows(static_cast<Eigen::Index>(r * per_ray),
                       static_cast<Eigen::Index>(per_ray)) =
            encode_ray_positions(cfg, rays[r], samples[r].t, unbounded);
        dir.middleRows(static_cast<Eigen::Index>(r * per_ray),
                       static_cast<Eigen::Index>(per_ray)) =
            encode_ray_direction(cfg, rays[r].dir, static_cast<int>(per_ray));
    }

    ChunkPass out;
    out.trace = forward_with_taps(cfg, params, std::move(pos), std::move(dir), cfg.trunk_layers,
                                  true);
    out.weights.resize(total);
    out.transmittance.resize(total + n_rays);
    out.rgb.resize(n_rays);
    float bg_arr[3] = {bg.x, bg.y, bg.z};
    for (size_t r = 0; r < n_rays; ++r) {
        std::span<const float> sigma{out.trace.sigma.data() + r * per_ray, per_ray};
        std::span<float> w{out.weights.data() + r * per_ray, per_ray};
        std::span<float> tr{out.transmittance.data() + r * (per_ray + 1), per_ray + 1};
        compute_weights<float>(sigma, samples[r].delta, w, tr);
        float rgb[3];
        composite_ray<float>(w, {out.trace.color.data() + 3 * r * per_ray, 3 * per_ray},
                             bg_arr, rgb);
        out.rgb[r] = {rgb[0], rgb[1], rgb[2]};
    }
    return out;
}

void backward_chunk(const MlpConfig& cfg, const MlpParams& params, const ChunkPass& pass,
                    std::span<const SampleSet> samples, std::span<const Vec3> d_rgb,
                    const Vec3& bg, Gradients& grads) {
    size_t n_rays = d_rgb.size();
    size_t per_ray = samples[0].size();
    size_t total = n_rays * per_ray;

    VecX d_sigma(static_cast<Eigen::Index>(total));
    Mat d_color(static_cast<Eigen::Index>(total), 3);
    float bg_arr[3] = {bg.x, bg.y, bg.z};
    for (size_t r = 0; r < n_rays; ++r) {
        float dr[3] = {d_rgb[r].x, d_rgb[r].y, d_rgb[r].z};
        quadrature_backward<float>(
            {pass.trace.sigma.data() + r * per_ray, per_ray}, samples[r].delta,
            {pass.weights.data() + r * per_ray, per_ray},
            {pass.transmittance.data() + r * (per_ray + 1), per_ray + 1},
            {pass.trace.color.data() + 3 * r * per_ray, 3 * per_ray}, bg_arr, dr,
            {d_sigma.data() + r * per_ray, per_ray},
            {d_color.data() + 3 * r * per_ray, 3 * per_ray});
    }
    backward(cfg, params, pass.trace, d_sigma, d_color, grads);
}

}  // namespace

TrainResult train(const Dataset& dataset, const MlpConfig& mlp_cfg, const TrainConfig& cfg,
                  const std::filesystem::path& checkpoint_dir, bool verbose) {
    mlp_cfg.validate();
    cfg.validate();
    if (dataset.train.empty()) throw ConfigError("train: dataset has no training views");

    // Flatten every training pixel into the ray pool.
    std::vector<RayRef> pool;
    for (uint32_t v = 0; v < dataset.train.size(); ++v) {
        const DatasetView& view = dataset.train[v];
        for (int y = 0; y < view.camera.height; ++y)
            for (int x = 0; x < view.camera.width; ++x)
                pool.push_back({v, static_cast<uint16_t>(x), static_cast<uint16_t>(y)});
    }

    TrainResult result;
    result.checkpoint.config = mlp_cfg;
    result.checkpoint.coarse = init_params(mlp_cfg, hash_combine(cfg.seed, 0xc0a25e));
    result.checkpoint.fine = init_params(mlp_cfg, hash_combine(cfg.seed, 0xf14e));
    AdamState opt_coarse = make_adam_state(mlp_cfg);
    AdamState opt_fine = make_adam_state(mlp_cfg);

    MlpParams& coarse_params = result.checkpoint.coarse;
    MlpParams& fine_params = result.checkpoint.fine;
    const bool unbounded = dataset.unbounded;
    Vec3 bg = background_color(cfg.background);

    constexpr int kChunkRays = 128;
    int batch = cfg.rays_per_batch;
    size_t pool_pos = pool.size();  // force initial shuffle
    uint64_t epoch = 0;

    std::vector<RayRef> batch_refs(static_cast<size_t>(batch));
    int n_chunks = (batch + kChunkRays - 1) / kChunkRays;
    std::vector<ChunkResult> chunks(static_cast<size_t>(n_chunks));
    for (auto& c : chunks) {
        c.g_coarse = make_gradients(mlp_cfg);
        c.g_fine = make_gradients(mlp_cfg);
    }

    float decay = cfg.iterations > 1 ? std::pow(cfg.lr_final / cfg.lr,
                                                1.f / static_cast<float>(cfg.iterations - 1))
                                     : 1.f;

    for (int it = 0; it < cfg.iterations; ++it) {
        // Refill the batch from the shuffled pool, reshuffling at epoch ends.
        for (int i = 0; i < batch; ++i) {
            if (pool_pos >= pool.size()) {
                Rng shuffle_rng(hash_combine(cfg.seed, epoch), kStreamShuffle);
                shuffle_in_place<RayRef>(pool, shuffle_rng);
                pool_pos = 0;
                ++epoch;
            }
            batch_refs[static_cast<size_t>(i)] = pool[pool_pos++];
        }

        parallel_for_chunks(n_chunks, cfg.threads, [&](int ci) {
            ChunkResult& res = chunks[static_cast<size_t>(ci)];
            res.g_coarse.set_zero();
            res.g_fine.set_zero();
            res.coarse_sq = res.fine_sq = 0.0;

            int begin = ci * kChunkRays;
            int end = std::min(batch, begin + kChunkRays);
            int n_rays = end - begin;
            if (n_rays <= 0) return;

            std::vector<Ray> rays(static_cast<size_t>(n_rays));
            std::vector<SampleSet> coarse_samples(static_cast<size_t>(n_rays));
            std::vector<SampleSet> fine_samples(static_cast<size_t>(n_rays));
            std::vector<Vec3> gt(static_cast<size_t>(n_rays));

            for (int i = 0; i < n_rays; ++i) {
                const RayRef& ref = batch_refs[static_cast<size_t>(begin + i)];
                const DatasetView& view = dataset.train[ref.view];
                rays[static_cast<size_t>(i)] = view.camera.ray_for_pixel(ref.x, ref.y);
                const float* px = view.image.pixel(ref.x, ref.y);
                gt[static_cast<size_t>(i)] = {px[0], px[1], px[2]};

                uint64_t ray_uid = (static_cast<uint64_t>(ref.view) << 32) |
                                   (static_cast<uint64_t>(ref.y) << 16) | ref.x;
                Rng rng = make_ray_rng(cfg.seed, ray_uid, kStreamCoarseJitter,
                                       static_cast<uint64_t>(it));
                coarse_samples[static_cast<size_t>(i)] =
                    uniform_samples(rays[static_cast<size_t>(i)], cfg.n_coarse, true, rng);
            }

            ChunkPass coarse = forward_chunk(mlp_cfg, coarse_params, rays, coarse_samples,
                                             unbounded, bg);

            // Fine sample placement from the coarse weights (stop-gradient
            // on the t-values), NeRF-style merge with the uniforms.
            for (int i = 0; i < n_rays; ++i) {
                const RayRef& ref = batch_refs[static_cast<size_t>(begin + i)];
                uint64_t ray_uid = (static_cast<uint64_t>(ref.view) << 32) |
                                   (static_cast<uint64_t>(ref.y) << 16) | ref.x;
                const Ray& ray = rays[static_cast<size_t>(i)];
                std::optional<WeightPdf> pdf = pdf_from_weights(
                    {coarse.weights.data() + static_cast<size_t>(i) * cfg.n_coarse,
                     static_cast<size_t>(cfg.n_coarse)},
                    uniform_bin_edges(ray, cfg.n_coarse));
                Rng rng = make_ray_rng(cfg.seed, ray_uid, kStreamFineU,
                                       static_cast<uint64_t>(it));
                std::vector<float> u = stratified_uniforms(cfg.n_fine, true, rng);
                SampleSet resampled =
                    pdf ? inverse_transform_sample(*pdf, u)
                        : uniform_samples(ray, cfg.n_fine, true, rng);
                fine_samples[static_cast<size_t>(i)] =
                    merge_and_sort(coarse_samples[static_cast<size_t>(i)], resampled);
            }

            ChunkPass fine = forward_chunk(mlp_cfg, fine_params, rays, fine_samples,
                                           unbounded, bg);

            std::vector<Vec3> d_coarse(static_cast<size_t>(n_rays));
            std::vector<Vec3> d_fine(static_cast<size_t>(n_rays));
            float inv_b = 1.f / static_cast<float>(batch);
            for (int i = 0; i < n_rays; ++i) {
                Vec3 dc = coarse.rgb[static_cast<size_t>(i)] - gt[static_cast<size_t>(i)];
                Vec3 df = fine.rgb[static_cast<size_t>(i)] - gt[static_cast<size_t>(i)];
                res.coarse_sq += dc.dot(dc);
                res.fine_sq += df.dot(df);
                d_coarse[static_cast<size_t>(i)] = 2.f * inv_b * dc;
                d_fine[static_cast<size_t>(i)] = 2.f * inv_b * df;
            }

            backward_chunk(mlp_cfg, coarse_params, coarse, coarse_samples, d_coarse, bg,
                           res.g_coarse);
            backward_chunk(mlp_cfg, fine_params, fine, fine_samples, d_fine, bg, res.g_fine);
        });

        // Fixed-order reduction keeps gradients identical across thread counts.
        Gradients& g_coarse = chunks[0].g_coarse;
        Gradients& g_fine = chunks[0].g_fine;
        double coarse_sq = chunks[0].coarse_sq;
        double fine_sq = chunks[0].fine_sq;
        for (int ci = 1; ci < n_chunks; ++ci) {
            g_coarse.add(chunks[static_cast<size_t>(ci)].g_coarse);
            g_fine.add(chunks[static_cast<size_t>(ci)].g_fine);
            coarse_sq += chunks[static_cast<size_t>(ci)].coarse_sq;
            fine_sq += chunks[static_cast<size_t>(ci)].fine_sq;
        }

        double coarse_mse = coarse_sq / batch;
        double fine_mse = fine_sq / batch;
        double loss = coarse_mse + fine_mse;
        if (!std::isfinite(loss)) {
            std::cerr << "train: non-finite loss at iteration " << it
                      << ", keeping last good checkpoint\n";
            result.aborted_non_finite = true;
            break;
        }

        float lr = cfg.lr * std::pow(decay, static_cast<float>(it));
        try {
            adam_step(coarse_params, g_coarse, opt_coarse, lr);
            adam_step(fine_params, g_fine, opt_fine, lr);
        } catch (const RuntimeFailure& e) {
            std::cerr << "train: " << e.what() << " at iteration " << it << "\n";
            result.aborted_non_finite = true;
            break;
        }
        result.completed_iterations = it + 1;

        if (it % cfg.log_every == 0 || it + 1 == cfg.iterations) {
            double mse_per_channel = fine_mse / 3.0;
            double psnr = mse_per_channel > 0.0 ? 10.0 * std::log10(1.0 / mse_per_channel) : 99.0;
            psnr = std::min(psnr, 99.0);
            result.curve.push_back({it, coarse_mse, fine_mse, psnr});
            if (verbose)
                std::cout << "iter " << it << "  coarse_mse " << coarse_mse << "  fine_mse "
                          << fine_mse << "  psnr " << psnr << "\n";
        }
        if (cfg.checkpoint_every > 0 && !checkpoint_dir.empty() &&
            (it + 1) % cfg.checkpoint_every == 0 && it + 1 < cfg.iterations) {
            result.checkpoint.opt_coarse = opt_coarse;
            result.checkpoint.opt_fine = opt_fine;
            save_checkpoint(checkpoint_dir / ("ckpt_" + std::to_string(it + 1) + ".anrf"),
                            result.checkpoint);
        }
    }

    result.checkpoint.opt_coarse = std::move(opt_coarse);
    result.checkpoint.opt_fine = std::move(opt_fine);
    return result;
}

void write_loss_csv(const std::filesystem::path& path, std::span<const LossRow> curve) {
    std::ofstream os(path);
    if (!os) throw RuntimeFailure("cannot write " + path.string());
    os << "iteration,coarse_mse,fine_mse,psnr\n";
    char buf[128];
    for (const LossRow& row : curve) {
        std::snprintf(buf, sizeof buf, "%d,%.8g,%.8g,%.4f\n", row.iteration, row.coarse_mse,
                      row.fine_mse, row.psnr);
        os << buf;
    }
}

}  // namespace anerf
