#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "anerf/trainer.hpp"

using namespace anerf;

namespace {

MlpConfig tiny_mlp() {
    MlpConfig cfg;
    cfg.trunk_layers = 2;
    cfg.hidden_units = 16;
    cfg.pe_frequencies_pos = 4;
    cfg.pe_frequencies_dir = 1;
    cfg.color_head_units = 8;
    return cfg;
}

Dataset tiny_dataset(int views, int size) {
    AnalyticScene scene = tri_sphere_scene();
    Dataset ds;
    ds.t_near = scene.t_near;
    ds.t_far = scene.t_far;
    for (int i = 0; i < views; ++i) {
        DatasetView v;
        v.camera = orbit_camera(size, size, 0.6911f, 360.f * i / views, -30.f, 4.f, 2.f, 6.f);
        v.image = analytic_render(scene, v.camera, 2);
        ds.train.push_back(std::move(v));
    }
    return ds;
}

bool params_equal(const MlpParams& a, const MlpParams& b) {
    bool equal = true;
    std::vector<const float*> pb;
    std::vector<size_t> sizes;
    b.visit([&](const auto& t) {
        pb.push_back(t.data());
        sizes.push_back(static_cast<size_t>(t.size()));
    });
    size_t i = 0;
    a.visit([&](const auto& t) {
        if (std::memcmp(t.data(), pb[i], sizes[i] * sizeof(float)) != 0) equal = false;
        ++i;
    });
    return equal;
}

}  // namespace

TEST_CASE("photometric loss: zero when both heads match the target") {
    std::vector<Vec3> c = {{0.5f, 0.5f, 0.5f}}, gt = c;
    CHECK(photometric_loss(c, c, gt) == 0.0);
}

TEST_CASE("photometric loss: one off-channel ray contributes 0.01/batch") {
    const int batch = 4;
    std::vector<Vec3> gt(batch, {0.2f, 0.4f, 0.6f});
    std::vector<Vec3> coarse = gt;
    std::vector<Vec3> fine = gt;
    fine[2].x += 0.1f;
    CHECK(photometric_loss(coarse, fine, gt) == doctest::Approx(0.01 / batch).epsilon(1e-4));
}

TEST_CASE("photometric loss is symmetric in the two heads") {
    std::vector<Vec3> gt = {{0.1f, 0.2f, 0.3f}, {0.9f, 0.8f, 0.7f}};
    std::vector<Vec3> a = {{0.15f, 0.2f, 0.3f}, {0.9f, 0.85f, 0.7f}};
    std::vector<Vec3> b = {{0.1f, 0.25f, 0.3f}, {0.8f, 0.8f, 0.7f}};
    CHECK(photometric_loss(a, b, gt) == doctest::Approx(photometric_loss(b, a, gt)));
}

TEST_CASE("photometric loss rejects shape mismatches") {
    std::vector<Vec3> one(1), two(2);
    CHECK_THROWS_AS(photometric_loss(one, two, two), ConfigError);
}

TEST_CASE("zero iterations return the seeded initialization") {
    Dataset ds = tiny_dataset(1, 8);
    TrainConfig cfg;
    cfg.iterations = 0;
    cfg.rays_per_batch = 16;
    cfg.n_coarse = 8;
    cfg.n_fine = 8;
    cfg.seed = 5;
    TrainResult r = train(ds, tiny_mlp(), cfg);
    MlpParams expect_coarse = init_params(tiny_mlp(), hash_combine(5, 0xc0a25e));
    CHECK(params_equal(r.checkpoint.coarse, expect_coarse));
    CHECK(r.completed_iterations == 0);
}

TEST_CASE("overfitting one small batch cuts the loss by 10x") {
    Dataset ds = tiny_dataset(1, 8);  // 64 rays, fully covered by each batch
    TrainConfig cfg;
    cfg.iterations = 200;
    cfg.rays_per_batch = 64;
    cfg.n_coarse = 16;
    cfg.n_fine = 16;
    cfg.lr = 5e-3f;
    cfg.lr_final = 1e-3f;
    cfg.seed = 11;
    cfg.log_every = 1;
    TrainResult r = train(ds, tiny_mlp(), cfg);
    REQUIRE(!r.curve.empty());
    double initial = r.curve.front().coarse_mse + r.curve.front().fine_mse;
    double final = r.curve.back().coarse_mse + r.curve.back().fine_mse;
    CHECK(final < 0.1 * initial);
    for (const LossRow& row : r.curve) {
        CHECK(std::isfinite(row.coarse_mse));
        CHECK(std::isfinite(row.fine_mse));
    }
}

TEST_CASE("training is bit-deterministic across runs and thread counts") {
    Dataset ds = tiny_dataset(2, 8);
    TrainConfig cfg;
    cfg.iterations = 25;
    cfg.rays_per_batch = 48;
    cfg.n_coarse = 8;
    cfg.n_fine = 8;
    cfg.seed = 77;
    cfg.threads = 1;
    TrainResult a = train(ds, tiny_mlp(), cfg);
    TrainResult b = train(ds, tiny_mlp(), cfg);
    CHECK(params_equal(a.checkpoint.coarse, b.checkpoint.coarse));
    CHECK(params_equal(a.checkpoint.fine, b.checkpoint.fine));

    cfg.threads = 4;
    TrainResult c = train(ds, tiny_mlp(), cfg);
    CHECK(params_equal(a.checkpoint.coarse, c.checkpoint.coarse));
    CHECK(params_equal(a.checkpoint.fine, c.checkpoint.fine));
    REQUIRE(a.curve.size() == c.curve.size());
    for (size_t i = 0; i < a.curve.size(); ++i)
        CHECK(a.curve[i].fine_mse == c.curve[i].fine_mse);
}

TEST_CASE("non-finite targets abort with the last good checkpoint") {
    Dataset ds = tiny_dataset(1, 4);
    for (float& v : ds.train[0].image.rgb) v = std::numeric_limits<float>::quiet_NaN();
    TrainConfig cfg;
    cfg.iterations = 10;
    cfg.rays_per_batch = 16;
    cfg.n_coarse = 4;
    cfg.n_fine = 4;
    cfg.seed = 3;
    TrainResult r = train(ds, tiny_mlp(), cfg);
    CHECK(r.aborted_non_finite);
    CHECK(r.completed_iterations == 0);
    MlpParams init = init_params(tiny_mlp(), hash_combine(3, 0xc0a25e));
    CHECK(params_equal(r.checkpoint.coarse, init));
}

TEST_CASE("loss csv has the documented columns") {
    std::vector<LossRow> curve = {{0, 0.5, 0.4, 4.0}, {10, 0.1, 0.05, 12.2}};
    auto path = std::filesystem::temp_directory_path() / "anerf_loss_test.csv";
    write_loss_csv(path, curve);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "iteration,coarse_mse,fine_mse,psnr");
    int rows = 0;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
    std::filesystem::remove(path);
}

TEST_CASE("periodic checkpoints land at the configured stride") {
    Dataset ds = tiny_dataset(1, 8);
    auto dir = std::filesystem::temp_directory_path() / "anerf_ckpt_stride";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    TrainConfig cfg;
    cfg.iterations = 6;
    cfg.rays_per_batch = 32;
    cfg.n_coarse = 4;
    cfg.n_fine = 4;
    cfg.checkpoint_every = 2;
    cfg.seed = 8;
    train(ds, tiny_mlp(), cfg, dir);
    CHECK(std::filesystem::exists(dir / "ckpt_2.anrf"));
    CHECK(std::filesystem::exists(dir / "ckpt_4.anrf"));
    CHECK(!std::filesystem::exists(dir / "ckpt_6.anrf"));  // final is the caller's job
    Checkpoint mid = load_checkpoint(dir / "ckpt_4.anrf");
    CHECK(mid.opt_coarse.has_value());
    CHECK(mid.opt_coarse->step == 4);
    std::filesystem::remove_all(dir);
}
