#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "anerf/checkpoint.hpp"
#include "anerf/mlp.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace anerf;

namespace {

Mat random_batch(int n, int cols, uint64_t seed) {
    Rng rng(seed);
    Mat m(n, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = 2.f * rng.next_float() - 1.f;
    return m;
}

MlpConfig desk_config() {
    MlpConfig cfg;  // defaults are the desk config
    return cfg;
}

}  // namespace

TEST_CASE("zero weights: all activations zero, sigma = activation(bias)") {
    MlpConfig cfg = testutil::raw_input_config(3, 4);
    MlpParams p = make_gradients(cfg);
    p.sigma_b(0) = 0.3f;
    Mat pos = random_batch(5, cfg.pos_dim(), 42);
    Mat dir = random_batch(5, cfg.dir_dim(), 43);
    ForwardTrace tr = forward_with_taps(cfg, p, pos, dir, cfg.trunk_layers, true);
    for (const Mat& a : tr.activations) CHECK(a.cwiseAbs().maxCoeff() == 0.f);
    for (Eigen::Index i = 0; i < tr.sigma.size(); ++i)
        CHECK(tr.sigma(i) == doctest::Approx(0.3f));
}

TEST_CASE("identity-like unit-width layers carry the input through") {
    MlpConfig cfg = testutil::raw_input_config(3, 1);
    MlpParams p = make_gradients(cfg);
    p.trunk_w[0](0, 0) = 1.f;  // reads x
    p.trunk_w[1](0, 0) = 1.f;
    p.trunk_w[2](0, 0) = 1.f;
    Mat pos(1, 3);
    pos << 2.f, 0.f, 0.f;
    ForwardTrace tr = forward_with_taps(cfg, p, pos, Mat(), 2, false);
    CHECK(tr.activations[0](0, 0) == 2.f);
    CHECK(tr.activations[1](0, 0) == 2.f);
    CHECK(tr.truncated);
}

TEST_CASE("post-ReLU taps are non-negative for random nets") {
    MlpConfig cfg = desk_config();
    MlpParams p = init_params(cfg, 7);
    Mat pos = random_batch(64, cfg.pos_dim(), 1);
    Mat dir = random_batch(64, cfg.dir_dim(), 2);
    ForwardTrace tr = forward_with_taps(cfg, p, pos, dir, cfg.trunk_layers, true);
    for (const Mat& a : tr.activations) CHECK(a.minCoeff() >= 0.f);
    CHECK(tr.sigma.minCoeff() >= 0.f);
    CHECK(tr.color.minCoeff() >= 0.f);
    CHECK(tr.color.maxCoeff() <= 1.f);
}

TEST_CASE("truncated pass equals the full pass prefix bit-for-bit") {
    MlpConfig cfg = desk_config();
    cfg.skip_connection_at = 2;  // exercise the concat path too
    MlpParams p = init_params(cfg, 99);
    Mat pos = random_batch(32, cfg.pos_dim(), 5);
    Mat dir = random_batch(32, cfg.dir_dim(), 6);
    ForwardTrace full = forward_with_taps(cfg, p, pos, dir, cfg.trunk_layers, true);
    for (int l = 1; l < cfg.trunk_layers; ++l) {
        ForwardTrace part = forward_with_taps(cfg, p, pos, dir, l, false);
        CHECK(part.truncated);
        for (int k = 0; k < l; ++k) {
            REQUIRE(part.activations[k].size() == full.activations[k].size());
            CHECK(std::memcmp(part.activations[k].data(), full.activations[k].data(),
                              sizeof(float) * part.activations[k].size()) == 0);
        }
    }
}

TEST_CASE("flop counter: analytic MAC count, additivity, truncation ratio") {
    MlpConfig cfg = desk_config();
    // independent recount from the layer dims
    auto count = [](int in, int out) { return static_cast<int64_t>(out) * (2 * in + 1); };
    int64_t trunk = count(39, 64) + 3 * count(64, 64);
    CHECK(flops_per_sample_truncated(cfg, cfg.trunk_layers) == trunk);
    int64_t full = trunk + count(64, 1) + count(64, 64) + count(64 + 15, 32) + count(32, 3);
    CHECK(flops_per_sample_full(cfg) == full);

    // additive across layers
    for (int l = 1; l < cfg.trunk_layers; ++l) {
        int64_t rest = 0;
        for (int k = l + 1; k <= cfg.trunk_layers; ++k)
            rest += count(cfg.trunk_in_dim(k), cfg.hidden_units);
        CHECK(flops_per_sample_truncated(cfg, l) + rest ==
              flops_per_sample_truncated(cfg, cfg.trunk_layers));
    }

    // tap at layer 2 of 4 costs well under 60% of the full pass
    CHECK(static_cast<double>(flops_per_sample_truncated(cfg, 2)) / full < 0.6);

    // the executed counter in the trace agrees
    MlpParams p = init_params(cfg, 3);
    Mat pos = random_batch(10, cfg.pos_dim(), 8);
    Mat dir = random_batch(10, cfg.dir_dim(), 9);
    CHECK(forward_with_taps(cfg, p, pos, dir, cfg.trunk_layers, true).flops == 10 * full);
    CHECK(forward_with_taps(cfg, p, pos, Mat(), 2, false).flops ==
          10 * flops_per_sample_truncated(cfg, 2));
}

TEST_CASE("forward rejects bad shapes") {
    MlpConfig cfg = desk_config();
    MlpParams p = init_params(cfg, 1);
    Mat bad = random_batch(4, cfg.pos_dim() + 1, 1);
    Mat dir = random_batch(4, cfg.dir_dim(), 2);
    CHECK_THROWS_AS(forward_with_taps(cfg, p, bad, dir, cfg.trunk_layers, true), ConfigError);
    Mat pos = random_batch(4, cfg.pos_dim(), 1);
    CHECK_THROWS_AS(forward_with_taps(cfg, p, pos, dir, 0, false), ConfigError);
    CHECK_THROWS_AS(forward_with_taps(cfg, p, pos, dir, 2, true), ConfigError);
}

TEST_CASE("backward: zero upstream gives zero gradients") {
    MlpConfig cfg = testutil::raw_input_config(2, 4);
    MlpParams p = init_params(cfg, 21);
    Mat pos = random_batch(6, cfg.pos_dim(), 4);
    Mat dir = random_batch(6, cfg.dir_dim(), 5);
    ForwardTrace tr = forward_with_taps(cfg, p, pos, dir, cfg.trunk_layers, true);
    Gradients g = make_gradients(cfg);
    VecX zero_s = VecX::Zero(6);
    Mat zero_c = Mat::Zero(6, 3);
    backward(cfg, p, tr, zero_s, zero_c, g);
    g.visit([](const auto& t) { CHECK(t.cwiseAbs().maxCoeff() == 0.f); });
}

TEST_CASE("backward rejects truncated traces") {
    MlpConfig cfg = testutil::raw_input_config(2, 4);
    MlpParams p = init_params(cfg, 22);
    Mat pos = random_batch(3, cfg.pos_dim(), 4);
    ForwardTrace tr = forward_with_taps(cfg, p, pos, Mat(), 1, false);
    Gradients g = make_gradients(cfg);
    VecX zero_s = VecX::Zero(3);
    Mat zero_c = Mat::Zero(3, 3);
    CHECK_THROWS_AS(backward(cfg, p, tr, zero_s, zero_c, g), UnsupportedOperation);
}

TEST_CASE("chain rule by hand: d(sigma)/d(sigma_w) equals the head input") {
    MlpConfig cfg = testutil::raw_input_config(2, 1);
    MlpParams p = make_gradients(cfg);
    p.trunk_w[0](0, 0) = 1.f;
    p.trunk_w[1](0, 0) = 1.f;
    p.sigma_w(0, 0) = 2.f;
    Mat pos(1, 3);
    pos << 3.f, 0.f, 0.f;
    Mat dir = Mat::Zero(1, 3);
    ForwardTrace tr = forward_with_taps(cfg, p, pos, dir, cfg.trunk_layers, true);
    CHECK(tr.sigma(0) == doctest::Approx(6.f));
    Gradients g = make_gradients(cfg);
    VecX up(1);
    up << 1.f;
    Mat zero_c = Mat::Zero(1, 3);
    backward(cfg, p, tr, up, zero_c, g);
    CHECK(g.sigma_w(0, 0) == doctest::Approx(3.f));
}

namespace {

// max relative error between analytic and finite-difference gradients,
// everything recomputed in double precision
double gradient_check(const MlpConfig& cfg, uint64_t seed, int n_samples) {
    MlpParamsT<double> p = init_params(cfg, seed).cast<double>();
    MatT<double> pos = random_batch(n_samples, cfg.pos_dim(), seed + 1).cast<double>();
    MatT<double> dir = random_batch(n_samples, cfg.dir_dim(), seed + 2).cast<double>();

    // fixed random upstream so the loss is a scalar
    MatT<double> up_c = random_batch(n_samples, 3, seed + 3).cast<double>();
    VecT<double> up_s = random_batch(n_samples, 1, seed + 4).cast<double>().col(0);

    auto loss = [&]() {
        ForwardTraceT<double> tr = forward_with_taps(cfg, p, pos, dir, cfg.trunk_layers, true);
        return (tr.sigma.cwiseProduct(up_s)).sum() + (tr.color.cwiseProduct(up_c)).sum();
    };

    ForwardTraceT<double> tr = forward_with_taps(cfg, p, pos, dir, cfg.trunk_layers, true);
    GradientsT<double> analytic = p;
    analytic.set_zero();
    backward(cfg, p, tr, up_s, up_c, analytic);

    std::vector<double> fd = oracles::finite_difference_grad(p, loss, 1e-4);
    std::vector<double> an = oracles::flatten_grads(analytic);
    REQUIRE(fd.size() == an.size());
    double worst = 0.0;
    for (size_t i = 0; i < fd.size(); ++i) {
        double denom = std::max({std::fabs(fd[i]), std::fabs(an[i]), 1e-6});
        worst = std::max(worst, std::fabs(fd[i] - an[i]) / denom);
    }
    return worst;
}

}  // namespace

TEST_CASE("gradients match central finite differences (small net with skip)") {
    MlpConfig cfg;
    cfg.trunk_layers = 3;
    cfg.hidden_units = 8;
    cfg.pe_frequencies_pos = 2;
    cfg.pe_frequencies_dir = 1;
    cfg.color_head_units = 4;
    cfg.skip_connection_at = 1;
    CHECK(gradient_check(cfg, 1001, 12) < 1e-5);
}

TEST_CASE("gradients match central finite differences (softplus density)") {
    MlpConfig cfg = testutil::raw_input_config(2, 6);
    cfg.softplus_density = true;
    CHECK(gradient_check(cfg, 2002, 8) < 1e-5);
}

TEST_CASE("adam: lr = 0 leaves params unchanged") {
    MlpConfig cfg = testutil::raw_input_config(2, 4);
    MlpParams p = init_params(cfg, 50);
    MlpParams before = p;
    Gradients g = make_gradients(cfg);
    g.trunk_w[0].setConstant(1.f);
    AdamState st = make_adam_state(cfg);
    adam_step(p, g, st, 0.f);
    CHECK(p.trunk_w[0] == before.trunk_w[0]);
    CHECK(st.step == 1);
}

TEST_CASE("adam: first step approximates -lr * sign(g)") {
    MlpConfig cfg = testutil::raw_input_config(2, 4);
    MlpParams p = make_gradients(cfg);
    Gradients g = make_gradients(cfg);
    g.trunk_w[0].setConstant(0.37f);
    g.trunk_w[1].setConstant(-1.4f);
    AdamState st = make_adam_state(cfg);
    const float lr = 1e-2f;
    adam_step(p, g, st, lr);
    double expect_pos = oracles::adam_first_update(0.37, lr, 0.9, 0.999, 1e-8);
    double expect_neg = oracles::adam_first_update(-1.4, lr, 0.9, 0.999, 1e-8);
    CHECK(p.trunk_w[0](0, 0) == doctest::Approx(expect_pos).epsilon(1e-4));
    CHECK(p.trunk_w[1](0, 0) == doctest::Approx(expect_neg).epsilon(1e-4));
    CHECK(std::fabs(p.trunk_w[0](0, 0) + lr) < lr * 1e-2);  // ~ -lr * sign
    CHECK(std::fabs(p.trunk_w[1](0, 0) - lr) < lr * 1e-2);
}

TEST_CASE("adam: 20 steps on a 1-parameter quadratic strictly decrease the loss") {
    MlpConfig cfg = testutil::raw_input_config(2, 4);
    MlpParams p = make_gradients(cfg);
    AdamState st = make_adam_state(cfg);
    Gradients g = make_gradients(cfg);
    auto loss = [&] {
        float d = p.trunk_w[0](0, 0) - 2.f;
        return d * d;
    };
    float prev = loss();
    for (int i = 0; i < 20; ++i) {
        g.trunk_w[0](0, 0) = 2.f * (p.trunk_w[0](0, 0) - 2.f);
        adam_step(p, g, st, 0.05f);
        float now = loss();
        CHECK(now < prev);
        prev = now;
    }
}

TEST_CASE("adam rejects non-finite gradients and leaves state untouched") {
    MlpConfig cfg = testutil::raw_input_config(2, 4);
    MlpParams p = init_params(cfg, 60);
    MlpParams before = p;
    Gradients g = make_gradients(cfg);
    g.trunk_w[0](0, 0) = std::numeric_limits<float>::quiet_NaN();
    AdamState st = make_adam_state(cfg);
    CHECK_THROWS_AS(adam_step(p, g, st, 1e-3f), RuntimeFailure);
    CHECK(st.step == 0);
    CHECK(p.trunk_w[0] == before.trunk_w[0]);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    MlpConfig cfg = desk_config();
    cfg.skip_connection_at = 2;
    Checkpoint ckpt;
    ckpt.config = cfg;
    ckpt.coarse = init_params(cfg, 111);
    ckpt.fine = init_params(cfg, 222);
    AdamState st = make_adam_state(cfg);
    st.step = 17;
    st.m.trunk_w[0].setConstant(0.25f);
    st.v.trunk_w[1].setConstant(1.5f);
    ckpt.opt_coarse = st;
    ckpt.opt_fine = make_adam_state(cfg);

    auto path = std::filesystem::temp_directory_path() / "anerf_test_ckpt.anrf";
    save_checkpoint(path, ckpt);
    Checkpoint loaded = load_checkpoint(path);

    CHECK(loaded.config == cfg);
    auto same = [](const MlpParams& a, const MlpParams& b) {
        std::vector<const float*> pa, pb;
        std::vector<size_t> sizes;
        a.visit([&](const auto& t) {
            pa.push_back(t.data());
            sizes.push_back(static_cast<size_t>(t.size()));
        });
        b.visit([&](const auto& t) { pb.push_back(t.data()); });
        for (size_t i = 0; i < pa.size(); ++i)
            if (std::memcmp(pa[i], pb[i], sizes[i] * sizeof(float)) != 0) return false;
        return true;
    };
    CHECK(same(loaded.coarse, ckpt.coarse));
    CHECK(same(loaded.fine, ckpt.fine));
    REQUIRE(loaded.opt_coarse.has_value());
    CHECK(loaded.opt_coarse->step == 17);
    CHECK(same(loaded.opt_coarse->m, st.m));
    CHECK(same(loaded.opt_coarse->v, st.v));
    std::filesystem::remove(path);
}

TEST_CASE("load rejects wrong magic") {
    auto path = std::filesystem::temp_directory_path() / "anerf_not_a_ckpt.bin";
    {
        std::ofstream os(path, std::ios::binary);
        os << "PNG!junkjunkjunk";
    }
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("record_preact keeps pre-ReLU values consistent with the taps") {
    MlpConfig cfg = desk_config();
    cfg.record_preact = true;
    MlpParams p = init_params(cfg, 31);
    Mat pos = random_batch(16, cfg.pos_dim(), 1);
    Mat dir = random_batch(16, cfg.dir_dim(), 2);
    ForwardTrace tr = forward_with_taps(cfg, p, pos, dir, cfg.trunk_layers, true);
    REQUIRE(tr.preacts.size() == tr.activations.size());
    for (size_t l = 0; l < tr.preacts.size(); ++l) {
        Mat relu = tr.preacts[l].cwiseMax(0.f);
        CHECK(std::memcmp(relu.data(), tr.activations[l].data(),
                          sizeof(float) * relu.size()) == 0);
        CHECK(tr.preacts[l].minCoeff() < 0.f);  // random nets do go negative
    }
}

TEST_CASE("truncating at layer 2 of 4 halves the trunk flops within 10%") {
    MlpConfig cfg = desk_config();
    double ratio = static_cast<double>(flops_per_sample_truncated(cfg, 2)) /
                   static_cast<double>(flops_per_sample_truncated(cfg, cfg.trunk_layers));
    CHECK(std::fabs(ratio - 0.5) < 0.1);  // off-half by the encoder-width first layer
}
