#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "anerf/renderer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace anerf;

TEST_CASE("zero density: weights zero, transmittance one") {
    std::vector<float> sigma(4, 0.f), delta(4, 0.25f), w(4), tr(5);
    compute_weights<float>(sigma, delta, w, tr);
    for (float x : w) CHECK(x == 0.f);
    for (float x : tr) CHECK(x == 1.f);
}

TEST_CASE("hand-evaluated weights for sigma = ln 2") {
    float ln2 = std::log(2.f);
    std::vector<float> sigma = {ln2, ln2}, delta = {1.f, 1.f}, w(2), tr(3);
    compute_weights<float>(sigma, delta, w, tr);
    CHECK(tr[0] == doctest::Approx(1.f));
    CHECK(tr[1] == doctest::Approx(0.5f));
    CHECK(w[0] == doctest::Approx(0.5f));
    CHECK(w[1] == doctest::Approx(0.25f));
}

TEST_CASE("opaque first sample takes all the weight") {
    std::vector<float> sigma = {50.f, 1.f, 1.f}, delta = {1.f, 1.f, 1.f}, w(3), tr(4);
    compute_weights<float>(sigma, delta, w, tr);
    CHECK(w[0] == doctest::Approx(1.f).epsilon(1e-6));
    CHECK(w[1] < 1e-6f);
    CHECK(w[0] + w[1] + w[2] == doctest::Approx(1.f).epsilon(1e-6));
}

TEST_CASE("weight sum equals 1 - final transmittance, transmittance non-increasing") {
    Rng rng(3);
    for (int trial = 0; trial < 500; ++trial) {
        size_t n = 1 + rng.next_below(32);
        std::vector<float> sigma(n), delta(n), w(n), tr(n + 1);
        for (size_t i = 0; i < n; ++i) {
            sigma[i] = 4.f * rng.next_float();
            delta[i] = 0.2f * rng.next_float();
        }
        compute_weights<float>(sigma, delta, w, tr);
        float sum = 0.f;
        for (size_t i = 0; i < n; ++i) {
            sum += w[i];
            CHECK(tr[i + 1] <= tr[i]);
        }
        CHECK(sum == doctest::Approx(1.f - tr[n]).epsilon(1e-5));
        CHECK(sum >= 0.f);
        CHECK(sum <= 1.f + 1e-5f);
    }
}

TEST_CASE("composite: trivial and hand-derived cases") {
    {
        std::vector<float> w(3, 0.f), colors(9, 0.4f);
        float bg[3] = {1.f, 1.f, 1.f}, rgb[3];
        float alpha = composite_ray<float>(w, colors, bg, rgb);
        CHECK(alpha == 0.f);
        CHECK(rgb[0] == 1.f);
        CHECK(rgb[2] == 1.f);
    }
    {
        std::vector<float> w = {0.5f, 0.25f};
        std::vector<float> colors = {1.f, 0.f, 0.f, 0.f, 1.f, 0.f};
        float black[3] = {0.f, 0.f, 0.f}, rgb[3];
        composite_ray<float>(w, colors, black, rgb);
        CHECK(rgb[0] == doctest::Approx(0.5f));
        CHECK(rgb[1] == doctest::Approx(0.25f));
        CHECK(rgb[2] == doctest::Approx(0.f));
        float white[3] = {1.f, 1.f, 1.f};
        composite_ray<float>(w, colors, white, rgb);
        CHECK(rgb[0] == doctest::Approx(0.75f));
        CHECK(rgb[1] == doctest::Approx(0.5f));
        CHECK(rgb[2] == doctest::Approx(0.25f));
    }
}

TEST_CASE("quadrature converges monotonically on an analytic slab") {
    // slab edges deliberately off the bin grid
    const double slab_lo = 0.31741, slab_hi = 0.73214, sigma = 2.3;
    double exact = oracles::slab_alpha(sigma, slab_lo, slab_hi, 0.0, 1.0);

    double prev_err = 1e9;
    for (int n = 8; n <= 256; n *= 2) {
        std::vector<float> sig(static_cast<size_t>(n)), delta(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            double t = (i + 0.5) / n;  // midpoint quadrature
            sig[static_cast<size_t>(i)] =
                (t >= slab_lo && t <= slab_hi) ? static_cast<float>(sigma) : 0.f;
            delta[static_cast<size_t>(i)] = 1.f / static_cast<float>(n);
        }
        std::vector<float> w(static_cast<size_t>(n)), tr(static_cast<size_t>(n) + 1);
        compute_weights<float>(sig, delta, w, tr);
        double alpha = 1.0 - tr[static_cast<size_t>(n)];
        double err = std::fabs(alpha - exact);
        CHECK(err < prev_err);
        prev_err = err;
        if (n == 256) CHECK(err < 1e-3);
    }
}

TEST_CASE("quadrature backward matches finite differences in double") {
    Rng rng(8);
    const size_t n = 12;
    std::vector<double> sigma(n), delta(n), colors(3 * n);
    for (size_t i = 0; i < n; ++i) {
        sigma[i] = 3.0 * rng.next_double();
        delta[i] = 0.05 + 0.1 * rng.next_double();
        for (int c = 0; c < 3; ++c) colors[3 * i + c] = rng.next_double();
    }
    double bg[3] = {1.0, 0.5, 0.25};
    double d_rgb[3] = {0.7, -0.4, 1.1};

    auto loss = [&](std::span<const double> s, std::span<const double> col) {
        std::vector<double> w(n), tr(n + 1);
        compute_weights<double>(s, delta, w, tr);
        double rgb[3];
        composite_ray<double>(w, col, bg, rgb);
        return d_rgb[0] * rgb[0] + d_rgb[1] * rgb[1] + d_rgb[2] * rgb[2];
    };

    std::vector<double> w(n), tr(n + 1);
    compute_weights<double>(sigma, delta, w, tr);
    std::vector<double> d_sigma(n), d_color(3 * n);
    quadrature_backward<double>(sigma, delta, w, tr, colors, bg, d_rgb, d_sigma, d_color);

    const double h = 1e-6;
    for (size_t i = 0; i < n; ++i) {
        double saved = sigma[i];
        sigma[i] = saved + h;
        double fp = loss(sigma, colors);
        sigma[i] = saved - h;
        double fm = loss(sigma, colors);
        sigma[i] = saved;
        double fd = (fp - fm) / (2 * h);
        CHECK(d_sigma[i] == doctest::Approx(fd).epsilon(1e-5));
    }
    for (size_t i = 0; i < 3 * n; ++i) {
        double saved = colors[i];
        colors[i] = saved + h;
        double fp = loss(sigma, colors);
        colors[i] = saved - h;
        double fm = loss(sigma, colors);
        colors[i] = saved;
        double fd = (fp - fm) / (2 * h);
        CHECK(d_color[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("zero-density model renders the background") {
    MlpConfig cfg = testutil::raw_input_config(2, 4);
    NerfModel model{cfg, make_gradients(cfg), make_gradients(cfg), false};
    // color heads at zero give sigmoid(0) = gray, but with sigma == 0 only
    // the background shows
    RenderOptions opts;
    opts.n_coarse = 8;
    opts.n_fine = 8;
    opts.background = BackgroundMode::White;
    BaselineRay r = render_ray_baseline(model, testutil::z_ray(), 0, opts);
    CHECK(r.fine.rgb.x == doctest::Approx(1.f));
    CHECK(r.fine.rgb.y == doctest::Approx(1.f));
    CHECK(r.fine.alpha == doctest::Approx(0.f));
    CHECK(r.fallback);  // all-zero coarse weights engage the uniform fallback
}

TEST_CASE("opaque slab concentrates fine samples inside the slab interval") {
    testutil::SlabNet net = testutil::make_slab_net(0.50f, 0.52f, 0.60f, 0.62f, 2500.f);
    NerfModel model = testutil::slab_model(net);
    Ray ray = testutil::z_ray();

    RenderOptions opts;
    opts.n_coarse = 64;
    opts.n_fine = 64;
    opts.jitter_u = true;
    opts.seed = 5;

    // run the coarse stage, resample, and inspect the t-values directly
    CoarsePass coarse = run_coarse(model, ray, 0, opts);
    auto pdf = pdf_from_weights(coarse.weights, uniform_bin_edges(ray, opts.n_coarse));
    REQUIRE(pdf.has_value());
    Rng rng = make_ray_rng(opts.seed, 0, kStreamFineU);
    std::vector<float> u = stratified_uniforms(opts.n_fine, true, rng);
    SampleSet fine = inverse_transform_sample(*pdf, u);

    int inside = 0;
    for (float t : fine.t)
        if (t >= net.z_lo && t <= net.z_hi) ++inside;
    CHECK(inside >= static_cast<int>(0.8 * opts.n_fine));
}

TEST_CASE("N_f = 0: fine pass consumes exactly the coarse samples") {
    testutil::SlabNet net = testutil::make_slab_net(0.3f, 0.35f, 0.5f, 0.55f, 100.f);
    NerfModel model = testutil::slab_model(net);
    RenderOptions opts;
    opts.n_coarse = 16;
    opts.n_fine = 0;
    BaselineRay base = render_ray_baseline(model, testutil::z_ray(), 0, opts);
    // with both networks identical and the same sample set, coarse == fine
    CHECK(base.fine.rgb.x == doctest::Approx(base.coarse.rgb.x));
    CHECK(base.fine.alpha == doctest::Approx(base.coarse.alpha));
}

TEST_CASE("exact-weight hook makes the activation pipeline bit-identical to baseline") {
    MlpConfig cfg;
    cfg.trunk_layers = 4;
    cfg.hidden_units = 16;
    cfg.pe_frequencies_pos = 4;
    cfg.pe_frequencies_dir = 2;
    cfg.color_head_units = 8;
    NerfModel model{cfg, init_params(cfg, 41), init_params(cfg, 42), false};

    Camera cam = orbit_camera(16, 16, 0.6911f, 30.f, -20.f, 4.f, 2.f, 6.f);
    RenderOptions opts;
    opts.n_coarse = 24;
    opts.n_fine = 24;
    opts.merge_uniform = true;
    opts.jitter_u = true;
    opts.stratified = true;
    opts.seed = 97;

    ImageRender base = render_image_baseline(model, cam, opts);
    RenderOptions hook = opts;
    hook.exact_weight_hook = true;
    ImageRender act = render_image_activation(model, cam, hook);

    REQUIRE(base.image.rgb.size() == act.image.rgb.size());
    CHECK(std::memcmp(base.image.rgb.data(), act.image.rgb.data(),
                      base.image.rgb.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(base.alpha.data(), act.alpha.data(),
                      base.alpha.size() * sizeof(float)) == 0);
}

TEST_CASE("constant activations raise the degenerate flag and fall back to uniform") {
    NerfModel model = testutil::make_constant_activation_model(0.5f);
    RenderOptions opts;
    opts.n_coarse = 16;
    opts.n_fine = 16;
    opts.tap_layer = 1;
    for (Estimator e : {Estimator::F1, Estimator::F2, Estimator::F3}) {
        opts.estimator = e;
        ActivationRay r = render_ray_activation(model, testutil::z_ray(), 3, opts);
        CHECK(r.degenerate);
        CHECK(std::isfinite(r.fine.rgb.x));
    }
}

TEST_CASE("activation pipeline uses strictly fewer MLP flops than baseline") {
    MlpConfig cfg;
    cfg.trunk_layers = 4;
    cfg.hidden_units = 32;
    cfg.pe_frequencies_pos = 4;
    cfg.pe_frequencies_dir = 2;
    cfg.color_head_units = 16;
    NerfModel model{cfg, init_params(cfg, 4), init_params(cfg, 5), false};
    RenderOptions opts;
    opts.n_coarse = 32;
    opts.n_fine = 32;

    BaselineRay base = render_ray_baseline(model, testutil::z_ray(), 0, opts);
    int64_t prev = 0;
    for (int l = 1; l <= cfg.trunk_layers; ++l) {  // taps-only even at full depth
        opts.tap_layer = l;
        ActivationRay act = render_ray_activation(model, testutil::z_ray(), 0, opts);
        CHECK(act.flops < base.flops);
        CHECK(act.flops > prev);  // strictly increasing in the tap layer
        prev = act.flops;
    }
}

TEST_CASE("mask-skip: constant activations leave the mask empty") {
    NerfModel model = testutil::make_constant_activation_model(0.25f);
    Camera cam = orbit_camera(8, 8, 0.6911f, 0.f, -30.f, 4.f, 2.f, 6.f);
    RenderOptions opts;
    opts.n_coarse = 8;
    opts.n_fine = 8;
    opts.tap_layer = 1;
    ImageRender r = render_image_mask_skip(model, cam, opts);
    CHECK(r.stats.fine_ray_fraction == 0.0);
    // entire image equals the coarse render
    CHECK(std::memcmp(r.image.rgb.data(), r.coarse_image.rgb.data(),
                      r.image.rgb.size() * sizeof(float)) == 0);
}

TEST_CASE("mask-skip pixels in P match the baseline fine image bit-for-bit") {
    MlpConfig cfg;
    cfg.trunk_layers = 3;
    cfg.hidden_units = 16;
    cfg.pe_frequencies_pos = 4;
    cfg.pe_frequencies_dir = 1;
    cfg.color_head_units = 8;
    NerfModel model{cfg, init_params(cfg, 7), init_params(cfg, 8), false};
    Camera cam = orbit_camera(12, 12, 0.6911f, 75.f, -25.f, 4.f, 2.f, 6.f);

    RenderOptions opts;
    opts.n_coarse = 16;
    opts.n_fine = 16;
    opts.tap_layer = 2;
    opts.seed = 11;

    ImageRender base = render_image_baseline(model, cam, opts);
    ImageRender mask = render_image_mask_skip(model, cam, opts);

    int in_mask = 0;
    for (size_t px = 0; px < mask.fine_mask.size(); ++px) {
        if (!mask.fine_mask[px]) continue;
        ++in_mask;
        for (int c = 0; c < 3; ++c)
            CHECK(mask.image.rgb[3 * px + c] == base.image.rgb[3 * px + c]);
    }
    CHECK(in_mask > 0);  // random nets vary per pixel, some fall below the mean
    CHECK(mask.stats.fine_ray_fraction < 1.0);
}

TEST_CASE("renders are bit-identical across runs and thread counts") {
    MlpConfig cfg;
    cfg.trunk_layers = 3;
    cfg.hidden_units = 16;
    cfg.pe_frequencies_pos = 3;
    cfg.pe_frequencies_dir = 1;
    cfg.color_head_units = 8;
    NerfModel model{cfg, init_params(cfg, 70), init_params(cfg, 71), false};
    Camera cam = orbit_camera(16, 16, 0.6911f, 10.f, -35.f, 4.f, 2.f, 6.f);

    RenderOptions opts;
    opts.n_coarse = 16;
    opts.n_fine = 16;
    opts.stratified = true;
    opts.jitter_u = true;
    opts.seed = 123;
    opts.threads = 1;

    ImageRender a = render_image_baseline(model, cam, opts);
    opts.threads = 4;
    ImageRender b = render_image_baseline(model, cam, opts);
    CHECK(std::memcmp(a.image.rgb.data(), b.image.rgb.data(),
                      a.image.rgb.size() * sizeof(float)) == 0);

    RenderOptions act = opts;
    act.tap_layer = 2;
    act.threads = 1;
    ImageRender c = render_image_activation(model, cam, act);
    act.threads = 4;
    ImageRender d = render_image_activation(model, cam, act);
    CHECK(std::memcmp(c.image.rgb.data(), d.image.rgb.data(),
                      c.image.rgb.size() * sizeof(float)) == 0);
}

TEST_CASE("upsampled activation rendering works on even dims and rejects odd") {
    MlpConfig cfg = testutil::raw_input_config(2, 8);
    NerfModel model{cfg, init_params(cfg, 20), init_params(cfg, 21), false};
    Camera cam = orbit_camera(8, 8, 0.6911f, 40.f, -25.f, 4.f, 2.f, 6.f);
    RenderOptions opts;
    opts.n_coarse = 8;
    opts.n_fine = 8;
    opts.tap_layer = 1;
    opts.upsample_half = true;
    ImageRender r = render_image_activation(model, cam, opts);
    CHECK(r.image.width == 8);
    for (float v : r.image.rgb) CHECK(std::isfinite(v));

    Camera odd = orbit_camera(9, 8, 0.6911f, 40.f, -25.f, 4.f, 2.f, 6.f);
    CHECK_THROWS_AS(render_image_activation(model, odd, opts), ConfigError);
}

TEST_CASE("profile_ray exposes feature, sigma and density estimate") {
    testutil::SlabNet net = testutil::make_slab_net(0.5f, 0.52f, 0.6f, 0.62f, 2500.f);
    NerfModel model = testutil::slab_model(net);
    RenderOptions opts;
    opts.n_coarse = 32;
    opts.tap_layer = 2;
    RayProfile prof = profile_ray(model, testutil::z_ray(), 0, opts);
    CHECK(prof.feature.size() == 32);
    CHECK(prof.sigma.size() == 32);
    CHECK(prof.density_estimate.size() == 32);
    // the slab net's density peaks inside the slab
    float peak_sigma = *std::max_element(prof.sigma.begin(), prof.sigma.end());
    CHECK(peak_sigma == doctest::Approx(net.sigma_plateau).epsilon(0.05));
}

TEST_CASE("background modes: white, black, transparent") {
    MlpConfig cfg = testutil::raw_input_config(2, 4);
    NerfModel model{cfg, make_gradients(cfg), make_gradients(cfg), false};  // zero density
    RenderOptions opts;
    opts.n_coarse = 4;
    opts.n_fine = 4;

    opts.background = BackgroundMode::White;
    BaselineRay white = render_ray_baseline(model, testutil::z_ray(), 0, opts);
    CHECK(white.fine.rgb.x == 1.f);

    opts.background = BackgroundMode::Black;
    BaselineRay black = render_ray_baseline(model, testutil::z_ray(), 0, opts);
    CHECK(black.fine.rgb.x == 0.f);

    opts.background = BackgroundMode::Transparent;
    BaselineRay clear = render_ray_baseline(model, testutil::z_ray(), 0, opts);
    CHECK(clear.fine.rgb.x == 0.f);
    CHECK(clear.fine.alpha == 0.f);  // alpha carries the coverage
}
