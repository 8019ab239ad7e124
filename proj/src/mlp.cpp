#include "anerf/mlp.hpp"

namespace anerf {

namespace {

void he_fill(Mat& w, Rng& rng) {
    float bound = std::sqrt(6.f / static_cast<float>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
        for (Eigen::Index c = 0; c < w.cols(); ++c)
            w(r, c) = (2.f * rng.next_float() - 1.f) * bound;
}

MlpParams shaped_params(const MlpConfig& cfg) {
    MlpParams p;
    p.trunk_w.resize(cfg.trunk_layers);
    p.trunk_b.resize(cfg.trunk_layers);
    for (int l = 1; l <= cfg.trunk_layers; ++l) {
        p.trunk_w[l - 1].resize(cfg.hidden_units, cfg.trunk_in_dim(l));
        p.trunk_b[l - 1].resize(cfg.hidden_units);
    }
    p.sigma_w.resize(1, cfg.hidden_units);
    p.sigma_b.resize(1);
    p.feature_w.resize(cfg.hidden_units, cfg.hidden_units);
    p.feature_b.resize(cfg.hidden_units);
    p.color_hidden_w.resize(cfg.color_head_units, cfg.hidden_units + cfg.dir_dim());
    p.color_hidden_b.resize(cfg.color_head_units);
    p.color_out_w.resize(3, cfg.color_head_units);
    p.color_out_b.resize(3);
    return p;
}

struct Flat {
    float* data;
    size_t size;
};

std::vector<Flat> flatten(MlpParams& p) {
    std::vector<Flat> out;
    p.visit([&](auto& t) { out.push_back({t.data(), static_cast<size_t>(t.size())}); });
    return out;
}

std::vector<Flat> flatten(const MlpParams& p) {
    std::vector<Flat> out;
    p.visit([&](const auto& t) {
        out.push_back({const_cast<float*>(t.data()), static_cast<size_t>(t.size())});
    });
    return out;
}

}  // namespace

MlpParams init_params(const MlpConfig& cfg, uint64_t seed) {
    cfg.validate();
    MlpParams p = shaped_params(cfg);
    Rng rng(seed);
    p.visit([&](auto& t) {
        if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Mat>) {
            he_fill(t, rng);
        } else {
            t.setZero();
        }
    });
    return p;
}

Gradients make_gradients(const MlpConfig& cfg) {
    Gradients g = shaped_params(cfg);
    g.set_zero();
    return g;
}

AdamState make_adam_state(const MlpConfig& cfg) {
    AdamState st;
    st.m = make_gradients(cfg);
    st.v = make_gradients(cfg);
    st.step = 0;
    return st;
}

void adam_step(MlpParams& params, const Gradients& grads, AdamState& state, float lr,
               float beta1, float beta2, float eps) {
    if (!grads.all_finite())
        throw RuntimeFailure("adam_step: non-finite gradient, step rejected");

    state.step += 1;
    float bc1 = 1.f - std::pow(beta1, static_cast<float>(state.step));
    float bc2 = 1.f - std::pow(beta2, static_cast<float>(state.step));

    auto pt = flatten(params);
    auto gt = flatten(grads);
    auto mt = flatten(state.m);
    auto vt = flatten(state.v);
    for (size_t k = 0; k < pt.size(); ++k) {
        float* p = pt[k].data;
        const float* g = gt[k].data;
        float* m = mt[k].data;
        float* v = vt[k].data;
        for (size_t i = 0; i < pt[k].size; ++i) {
            m[i] = beta1 * m[i] + (1.f - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.f - beta2) * g[i] * g[i];
            float m_hat = m[i] / bc1;
            float v_hat = v[i] / bc2;
            p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

}  // namespace anerf
