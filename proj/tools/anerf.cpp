// anerf command line: make-scene, train, render, analyze, bench.
// Flags override config-file values; every run prints its resolved config
// and writes a manifest under the run directory.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <map>

#include "anerf/colormap.hpp"
#include "anerf/runtime.hpp"
#include "anerf/metrics.hpp"
#include "anerf/trainer.hpp"

using namespace anerf;
using nlohmann::json;

namespace {

// key = value lines, '#' comments. Applied as CLI defaults so explicit
// flags win.
std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open config file " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw ParseError(path + ":" + std::to_string(line_no) +
                                 ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            size_t a = s.find_first_not_of(" \t\r");
            size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError(path + ":" + std::to_string(line_no) + ": empty key");
        kv[key] = value;
    }
    return kv;
}

void apply_config_file(CLI::App* cmd, const std::map<std::string, std::string>& kv) {
    for (const auto& [key, value] : kv) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt && opt->empty()) opt->default_val(value);
    }
}

void print_resolved(const CLI::App* cmd) {
    std::cout << "# resolved config (" << cmd->get_name() << ")\n";
    for (const CLI::Option* opt : cmd->get_options()) {
        if (opt->get_lnames().empty()) continue;
        std::string name = opt->get_lnames().front();
        if (name == "help" || name == "config") continue;
        std::string value = opt->empty() ? opt->get_default_str() : opt->as<std::string>();
        std::cout << name << " = " << value << "\n";
    }
}

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const json& config, const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["config"] = config;
    m["outputs"] = outputs;
    std::ofstream os(dir / "manifest.json");
    os << m.dump(2) << "\n";
}

BackgroundMode background_from_string(const std::string& s) {
    if (s == "white") return BackgroundMode::White;
    if (s == "black") return BackgroundMode::Black;
    if (s == "transparent") return BackgroundMode::Transparent;
    throw ConfigError("unknown background '" + s + "' (white|black|transparent)");
}

Estimator estimator_from_string(const std::string& s) {
    if (s == "f1") return Estimator::F1;
    if (s == "f2") return Estimator::F2;
    if (s == "f3") return Estimator::F3;
    throw ConfigError("unknown estimator '" + s + "' (f1|f2|f3)");
}

struct MlpFlags {
    int trunk_layers = 4;
    int hidden = 64;
    int pe_pos = 6;
    int pe_dir = 2;
    int skip_at = 0;
    int color_units = 32;
    bool softplus = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--trunk-layers", trunk_layers, "trunk depth");
        cmd->add_option("--hidden", hidden, "hidden units per layer");
        cmd->add_option("--pe-pos", pe_pos, "position encoding frequencies");
        cmd->add_option("--pe-dir", pe_dir, "direction encoding frequencies");
        cmd->add_option("--skip-at", skip_at, "skip connection layer (0 = none)");
        cmd->add_option("--color-units", color_units, "color head width");
        cmd->add_flag("--softplus-density", softplus, "softplus density activation");
    }
    MlpConfig to_config() const {
        MlpConfig cfg;
        cfg.trunk_layers = trunk_layers;
        cfg.hidden_units = hidden;
        cfg.pe_frequencies_pos = pe_pos;
        cfg.pe_frequencies_dir = pe_dir;
        cfg.skip_connection_at = skip_at;
        cfg.color_head_units = color_units;
        cfg.softplus_density = softplus;
        cfg.validate();
        return cfg;
    }
};

int cmd_make_scene(const std::string& out_dir, const std::string& scene_path, int size,
                   int train_views, int val_views, int test_views, int supersample,
                   uint64_t seed) {
    std::filesystem::create_directories(out_dir);
    AnalyticScene scene = scene_path.empty() ? tri_sphere_scene() : load_scene(scene_path);
    save_scene(std::filesystem::path(out_dir) / "scene.txt", scene);

    // Disjoint azimuths: train on an even circle, val/test offset between
    // train stations. Elevation wobbles deterministically.
    Rng rng(seed);
    auto make_views = [&](int count, float offset_deg) {
        std::vector<DatasetView> views;
        for (int i = 0; i < count; ++i) {
            float az = offset_deg + 360.f * static_cast<float>(i) / static_cast<float>(count);
            float el = -30.f + 10.f * (rng.next_float() - 0.5f);
            DatasetView v;
            v.camera = orbit_camera(size, size, 0.6911f, az, el, 4.f, scene.t_near, scene.t_far);
            v.image = analytic_render(scene, v.camera, supersample);
            views.push_back(std::move(v));
        }
        return views;
    };

    auto dir = std::filesystem::path(out_dir);
    save_blender_split(dir, "train", make_views(train_views, 0.f));
    if (val_views > 0) save_blender_split(dir, "val", make_views(val_views, 4.5f));
    save_blender_split(dir, "test", make_views(test_views, 9.f));

    std::cout << "wrote " << train_views << " train / " << val_views << " val / " << test_views
              << " test views at " << size << "x" << size << " to " << out_dir << "\n";
    return 0;
}

json options_json(const RenderOptions& o) {
    return json{{"n_coarse", o.n_coarse},
                {"n_fine", o.n_fine},
                {"stratified", o.stratified},
                {"merge_uniform", o.merge_uniform},
                {"tap_layer", o.tap_layer},
                {"estimator", estimator_name(o.estimator)},
                {"estimator_relu", o.estimator_relu},
                {"upsample_half", o.upsample_half},
                {"seed", o.seed},
                {"threads", o.threads}};
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"anerf: tiny CPU NeRF engine with activation-informed sampling"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "key = value config file; flags override")
        ->expected(1);

    // ---- make-scene ----
    auto* mk = app.add_subcommand("make-scene", "generate a procedural dataset");
    std::string mk_out = "runs/scene";
    std::string mk_scene;
    int mk_size = 64, mk_train = 20, mk_val = 0, mk_test = 5, mk_ss = 2;
    uint64_t mk_seed = 1;
    mk->add_option("--out", mk_out, "output dataset directory");
    mk->add_option("--scene", mk_scene, "scene description file (default: tri-sphere)");
    mk->add_option("--size", mk_size, "image width and height");
    mk->add_option("--train-views", mk_train, "training views");
    mk->add_option("--val-views", mk_val, "validation views");
    mk->add_option("--test-views", mk_test, "test views");
    mk->add_option("--supersample", mk_ss, "ground-truth supersampling grid");
    mk->add_option("--seed", mk_seed, "elevation jitter seed");

    // ---- train ----
    auto* tr = app.add_subcommand("train", "optimize a coarse/fine pair");
    std::string tr_data, tr_out = "runs/train";
    MlpFlags tr_mlp;
    TrainConfig tr_cfg;
    std::string tr_background = "white";
    tr->add_option("--dataset", tr_data, "dataset directory")->required();
    tr->add_option("--out", tr_out, "run directory");
    tr_mlp.attach(tr);
    tr->add_option("--iterations", tr_cfg.iterations, "optimization steps");
    tr->add_option("--rays-per-batch", tr_cfg.rays_per_batch, "rays per batch");
    tr->add_option("--lr", tr_cfg.lr, "initial learning rate");
    tr->add_option("--lr-final", tr_cfg.lr_final, "final learning rate");
    tr->add_option("--n-coarse", tr_cfg.n_coarse, "coarse samples per ray");
    tr->add_option("--n-fine", tr_cfg.n_fine, "fine samples per ray");
    tr->add_option("--seed", tr_cfg.seed, "training seed");
    tr->add_option("--threads", tr_cfg.threads, "worker threads");
    tr->add_option("--checkpoint-every", tr_cfg.checkpoint_every, "periodic checkpoint stride");
    tr->add_option("--background", tr_background, "white|black|transparent");

    // ---- render ----
    auto* rd = app.add_subcommand("render", "render one view from a checkpoint");
    std::string rd_ckpt, rd_out = "runs/render", rd_pipeline = "baseline";
    std::string rd_estimator = "f2", rd_background = "white";
    int rd_size = 64, rd_layer = 2, rd_nc = 64, rd_nf = 64, rd_threads = 1;
    float rd_azimuth = 9.f, rd_elevation = -30.f, rd_radius = 4.f;
    uint64_t rd_seed = 0;
    bool rd_no_merge = false, rd_no_relu = false, rd_upsample = false, rd_ppm = false;
    bool rd_unbounded = false;
    rd->add_option("--checkpoint", rd_ckpt, "ANRF checkpoint")->required();
    rd->add_option("--out", rd_out, "run directory");
    rd->add_option("--pipeline", rd_pipeline, "baseline|act|mask-skip");
    rd->add_option("--layer", rd_layer, "tap layer for act/mask-skip");
    rd->add_option("--estimator", rd_estimator, "f1|f2|f3");
    rd->add_option("--size", rd_size, "image width and height");
    rd->add_option("--azimuth", rd_azimuth, "camera azimuth (degrees)");
    rd->add_option("--elevation", rd_elevation, "camera elevation (degrees)");
    rd->add_option("--radius", rd_radius, "camera orbit radius");
    rd->add_option("--n-coarse", rd_nc, "coarse samples per ray");
    rd->add_option("--n-fine", rd_nf, "fine samples per ray");
    rd->add_option("--threads", rd_threads, "worker threads");
    rd->add_option("--seed", rd_seed, "render seed");
    rd->add_option("--background", rd_background, "white|black|transparent");
    rd->add_flag("--no-merge", rd_no_merge, "fine pass without the uniform samples");
    rd->add_flag("--no-relu", rd_no_relu, "estimator without the ReLU");
    rd->add_flag("--upsample", rd_upsample, "half-resolution activations, upsampled");
    rd->add_flag("--ppm", rd_ppm, "also emit a P6 .ppm");
    rd->add_flag("--unbounded", rd_unbounded, "contract sample positions (unbounded scene)");

    // ---- analyze ----
    auto* an = app.add_subcommand("analyze", "activation heatmaps, histograms, mask overlay");
    std::string an_ckpt, an_out = "runs/analyze";
    int an_size = 64, an_layer = 2, an_nc = 64, an_threads = 1;
    float an_azimuth = 9.f, an_elevation = -30.f, an_radius = 4.f, an_tau_d = 0.01f;
    std::string an_estimator = "f2";
    uint64_t an_seed = 0;
    bool an_unbounded = false;
    an->add_option("--checkpoint", an_ckpt, "ANRF checkpoint")->required();
    an->add_option("--out", an_out, "run directory");
    an->add_option("--size", an_size, "image width and height");
    an->add_option("--layer", an_layer, "mask layer");
    an->add_option("--estimator", an_estimator, "f1|f2|f3 for ray profiles");
    an->add_option("--azimuth", an_azimuth, "camera azimuth (degrees)");
    an->add_option("--elevation", an_elevation, "camera elevation (degrees)");
    an->add_option("--radius", an_radius, "camera orbit radius");
    an->add_option("--n-coarse", an_nc, "coarse samples per ray");
    an->add_option("--tau-d", an_tau_d, "density threshold for the per-ray counts");
    an->add_option("--threads", an_threads, "worker threads");
    an->add_option("--seed", an_seed, "seed");
    an->add_flag("--unbounded", an_unbounded, "contract sample positions (unbounded scene)");

    // ---- bench ----
    auto* bn = app.add_subcommand("bench", "pipeline matrix benchmark");
    std::string bn_ckpt, bn_data, bn_out = "runs/bench";
    int bn_nc = 64, bn_nf = 64, bn_threads = 1, bn_repeats = 3, bn_layers = 3;
    int bn_mask_layer = 0;
    uint64_t bn_seed = 0;
    bool bn_no_merge = false;
    bn->add_option("--checkpoint", bn_ckpt, "ANRF checkpoint")->required();
    bn->add_option("--dataset", bn_data, "dataset directory (test split)")->required();
    bn->add_option("--out", bn_out, "run directory");
    bn->add_option("--n-coarse", bn_nc, "coarse samples per ray");
    bn->add_option("--n-fine", bn_nf, "fine samples per ray");
    bn->add_option("--repeats", bn_repeats, "timing repeats (median)");
    bn->add_option("--layers", bn_layers, "tap layers 1..N in the matrix");
    bn->add_option("--mask-layer", bn_mask_layer, "also bench mask-skip at this layer");
    bn->add_option("--threads", bn_threads, "worker threads");
    bn->add_option("--seed", bn_seed, "seed");
    bn->add_flag("--no-merge", bn_no_merge, "activation fine pass without uniforms");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (!config_path.empty()) {
            auto kv = read_config_file(config_path);
            apply_config_file(app.get_subcommands().front(), kv);
        }
        CLI::App* sub = app.get_subcommands().front();
        print_resolved(sub);

        if (sub == mk) {
            return cmd_make_scene(mk_out, mk_scene, mk_size, mk_train, mk_val, mk_test, mk_ss,
                                  mk_seed);
        }

        if (sub == tr) {
            tr_cfg.background = background_from_string(tr_background);
            std::filesystem::create_directories(tr_out);
            Dataset ds = load_blender_dataset(tr_data);
            MlpConfig mlp = tr_mlp.to_config();
            TrainResult result = train(ds, mlp, tr_cfg, tr_out, true);
            auto ckpt_path = std::filesystem::path(tr_out) / "checkpoint.anrf";
            save_checkpoint(ckpt_path, result.checkpoint);
            write_loss_csv(std::filesystem::path(tr_out) / "loss.csv", result.curve);
            write_manifest(tr_out, "train",
                           json{{"dataset", tr_data},
                                {"iterations", tr_cfg.iterations},
                                {"rays_per_batch", tr_cfg.rays_per_batch},
                                {"seed", tr_cfg.seed},
                                {"threads", tr_cfg.threads}},
                           {"checkpoint.anrf", "loss.csv"});
            if (result.aborted_non_finite) {
                std::cerr << "training aborted on a non-finite loss; last good checkpoint kept\n";
                return 2;
            }
            std::cout << "checkpoint: " << ckpt_path.string() << "\n";
            return 0;
        }

        if (sub == rd) {
            std::filesystem::create_directories(rd_out);
            NerfModel model = model_from_checkpoint(load_checkpoint(rd_ckpt), rd_unbounded);
            Camera cam =
                orbit_camera(rd_size, rd_size, 0.6911f, rd_azimuth, rd_elevation, rd_radius,
                             2.f, 6.f);
            RenderOptions opts;
            opts.n_coarse = rd_nc;
            opts.n_fine = rd_nf;
            opts.background = background_from_string(rd_background);
            opts.merge_uniform = !rd_no_merge;
            opts.tap_layer = rd_layer;
            opts.estimator = estimator_from_string(rd_estimator);
            opts.estimator_relu = !rd_no_relu;
            opts.upsample_half = rd_upsample;
            opts.seed = rd_seed;
            opts.threads = rd_threads;

            ImageRender render;
            if (rd_pipeline == "baseline") {
                render = render_image_baseline(model, cam, opts);
            } else if (rd_pipeline == "act") {
                render = render_image_activation(model, cam, opts);
            } else if (rd_pipeline == "mask-skip") {
                render = render_image_mask_skip(model, cam, opts);
            } else {
                throw ConfigError("unknown pipeline '" + rd_pipeline + "'");
            }

            auto dir = std::filesystem::path(rd_out);
            std::vector<std::string> outputs = {"image.png", "report.json"};
            write_png(dir / "image.png", to_8bit(render.image));
            if (rd_ppm) {
                write_ppm(dir / "image.ppm", to_8bit(render.image));
                outputs.push_back("image.ppm");
            }
            if (!render.coarse_image.rgb.empty()) {
                write_png(dir / "coarse.png", to_8bit(render.coarse_image));
                outputs.push_back("coarse.png");
            }
            json report;
            report["pipeline"] = rd_pipeline;
            report["options"] = options_json(opts);
            report["seconds_mlp_quadrature"] = render.stats.seconds;
            report["mlp_flops"] = render.stats.mlp_flops;
            report["fine_ray_fraction"] = render.stats.fine_ray_fraction;
            report["failure_rays"] = render.stats.failure_rays;
            {
                std::ofstream os(dir / "report.json");
                os << report.dump(2) << "\n";
            }
            write_manifest(dir, "render", report, outputs);
            std::cout << "image: " << (dir / "image.png").string() << "\n"
                      << "mlp+quadrature seconds: " << render.stats.seconds << "\n"
                      << "mlp flops: " << render.stats.mlp_flops << "\n";
            return 0;
        }

        if (sub == an) {
            std::filesystem::create_directories(an_out);
            NerfModel model = model_from_checkpoint(load_checkpoint(an_ckpt), an_unbounded);
            if (an_layer < 1 || an_layer > model.config.trunk_layers)
                throw ConfigError("analyze: --layer out of range for this checkpoint");
            Camera cam = orbit_camera(an_size, an_size, 0.6911f, an_azimuth, an_elevation,
                                      an_radius, 2.f, 6.f);
            RenderOptions opts;
            opts.n_coarse = an_nc;
            opts.tap_layer = an_layer;
            opts.estimator = estimator_from_string(an_estimator);
            opts.seed = an_seed;
            opts.threads = an_threads;

            AnalysisResult res = analyze_image(model, cam, opts, an_tau_d);
            auto dir = std::filesystem::path(an_out);
            std::vector<std::string> outputs;
            for (const ActivationImage& img : res.per_layer) {
                std::string name = "activations_l" + std::to_string(img.layer) + ".png";
                write_png(dir / name, render_heatmap(img));
                outputs.push_back(name);
            }
            write_png(dir / "coarse.png", to_8bit(res.coarse_image));
            outputs.push_back("coarse.png");

            // mask overlay: red tint where the fine pass would run
            const ActivationImage& chosen = res.per_layer[static_cast<size_t>(an_layer - 1)];
            std::vector<uint8_t> mask = derive_mask(chosen);
            ImageF overlay = res.coarse_image;
            for (size_t i = 0; i < mask.size(); ++i) {
                if (mask[i]) {
                    overlay.rgb[3 * i + 0] = 0.6f * overlay.rgb[3 * i + 0] + 0.4f;
                    overlay.rgb[3 * i + 1] *= 0.6f;
                    overlay.rgb[3 * i + 2] *= 0.6f;
                }
            }
            write_png(dir / "mask_overlay.png", to_8bit(overlay));
            outputs.push_back("mask_overlay.png");

            // per-ray histograms of f_l and sigma for a few probe pixels
            int cx = an_size / 2, cy = an_size / 2;
            std::vector<std::pair<int, int>> probes = {
                {cx, cy}, {an_size / 4, an_size / 4}, {3 * an_size / 4, 3 * an_size / 4}};
            for (auto [px, py] : probes) {
                uint64_t rid = static_cast<uint64_t>(py) * an_size + px;
                RayProfile prof = profile_ray(model, cam.ray_for_pixel(px, py), rid, opts);
                std::string base = "ray_" + std::to_string(px) + "_" + std::to_string(py);
                write_png(dir / (base + "_feature_hist.png"), render_histogram(prof.feature));
                write_png(dir / (base + "_sigma_hist.png"), render_histogram(prof.sigma));
                outputs.push_back(base + "_feature_hist.png");
                outputs.push_back(base + "_sigma_hist.png");
            }

            // per-pixel table
            std::ofstream csv(dir / "activations.csv");
            csv << "x,y,v_l,in_mask,failure,dense_count\n";
            for (int y = 0; y < an_size; ++y)
                for (int x = 0; x < an_size; ++x) {
                    size_t i = static_cast<size_t>(y) * an_size + x;
                    csv << x << ',' << y << ',' << chosen.v[i] << ','
                        << static_cast<int>(mask[i]) << ','
                        << static_cast<int>(res.failure_flags[i]) << ','
                        << res.dense_counts[i] << "\n";
                }
            outputs.push_back("activations.csv");
            write_manifest(dir, "analyze",
                           json{{"layer", an_layer}, {"size", an_size}, {"seed", an_seed}},
                           outputs);
            std::cout << "analysis written to " << an_out << "\n";
            return 0;
        }

        if (sub == bn) {
            std::filesystem::create_directories(bn_out);
            Dataset ds = load_blender_dataset(bn_data);
            NerfModel model = model_from_checkpoint(load_checkpoint(bn_ckpt), ds.unbounded);
            const auto& views = ds.test.empty() ? ds.train : ds.test;

            RenderOptions opts;
            opts.n_coarse = bn_nc;
            opts.n_fine = bn_nf;
            opts.merge_uniform = !bn_no_merge;
            opts.seed = bn_seed;
            opts.threads = bn_threads;

            std::vector<PipelineSpec> specs = standard_matrix(bn_layers);
            if (bn_mask_layer > 0)
                specs.push_back({PipelineSpec::Kind::MaskSkip, bn_mask_layer});

            auto rows = bench(model, views, specs, opts, bn_repeats, bn_data);
            double t_base = rows.front().seconds;
            std::cout << "pipeline                 psnr    ssim    sec     speedup  fine%\n";
            for (const MetricsRow& r : rows) {
                std::printf("%-24s %-7.2f %-7.4f %-7.3f %-8.1f %.0f%%\n", r.pipeline.c_str(),
                            r.psnr_db, r.ssim, r.seconds,
                            r.pipeline == "baseline" ? 0.0 : speedup_percent(t_base, r.seconds),
                            100.0 * r.fine_ray_fraction);
            }
            auto dir = std::filesystem::path(bn_out);
            write_metrics_csv(dir / "metrics.csv", rows);
            write_metrics_json(dir / "metrics.json", rows);
            write_manifest(dir, "bench",
                           json{{"checkpoint", bn_ckpt},
                                {"dataset", bn_data},
                                {"repeats", bn_repeats},
                                {"threads", bn_threads},
                                {"seed", bn_seed}},
                           {"metrics.csv", "metrics.json"});
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
