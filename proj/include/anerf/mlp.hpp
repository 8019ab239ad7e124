#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "anerf/encoding.hpp"
#include "anerf/errors.hpp"
#include "anerf/rng.hpp"

namespace anerf {

template <typename T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using Mat = MatT<float>;
using VecX = VecT<float>;

// Shape of one NeRF network: a ReLU trunk over encoded positions with a
// density head, plus a bottleneck feature feeding the view-dependent color
// head. Trunk layers are 1-based (layer 1 consumes the encoded position).
struct MlpConfig {
    int trunk_layers = 4;        // the original NeRF trunk is 8 x 256
    int hidden_units = 64;
    int pe_frequencies_pos = 6;
    int pe_frequencies_dir = 2;
    int skip_connection_at = 0;  // 0 = none; s means layer s+1 reads concat(A^(s), encoded pos)
    int color_head_units = 32;
    bool include_input_in_encoding = true;
    bool softplus_density = false;  // default is ReLU on the raw density output
    bool record_preact = false;     // keep pre-ReLU trunk activations in traces

    void validate() const {
        if (trunk_layers < 2) throw ConfigError("MlpConfig: trunk_layers must be >= 2");
        if (hidden_units < 1) throw ConfigError("MlpConfig: hidden_units must be >= 1");
        if (color_head_units < 1) throw ConfigError("MlpConfig: color_head_units must be >= 1");
        if (pe_frequencies_pos < 0 || pe_frequencies_dir < 0)
            throw ConfigError("MlpConfig: encoding frequencies must be >= 0");
        if (skip_connection_at < 0 || skip_connection_at >= trunk_layers)
            throw ConfigError("MlpConfig: skip_connection_at must be in [1, trunk_layers)");
        if (pos_dim() < 1 || dir_dim() < 1)
            throw ConfigError("MlpConfig: encoded input would be empty");
    }

    int pos_dim() const { return encoded_dim(3, pe_frequencies_pos, include_input_in_encoding); }
    int dir_dim() const { return encoded_dim(3, pe_frequencies_dir, include_input_in_encoding); }

    // Input width of trunk layer l (1-based).
    int trunk_in_dim(int l) const {
        if (l == 1) return pos_dim();
        if (skip_connection_at != 0 && l == skip_connection_at + 1)
            return hidden_units + pos_dim();
        return hidden_units;
    }

    bool operator==(const MlpConfig&) const = default;
};

// Weights and biases of one network; also reused as the gradient container
// (identical shapes by construction).
template <typename T>
struct MlpParamsT {
    std::vector<MatT<T>> trunk_w;  // each [hidden x in_l]
    std::vector<VecT<T>> trunk_b;
    MatT<T> sigma_w;               // [1 x hidden]
    VecT<T> sigma_b;
    MatT<T> feature_w;             // [hidden x hidden]
    VecT<T> feature_b;
    MatT<T> color_hidden_w;        // [color_units x (hidden + dir_dim)]
    VecT<T> color_hidden_b;
    MatT<T> color_out_w;           // [3 x color_units]
    VecT<T> color_out_b;

    template <typename F>
    void visit(F&& f) {
        for (auto& w : trunk_w) f(w);
        for (auto& b : trunk_b) f(b);
        f(sigma_w); f(sigma_b);
        f(feature_w); f(feature_b);
        f(color_hidden_w); f(color_hidden_b);
        f(color_out_w); f(color_out_b);
    }
    template <typename F>
    void visit(F&& f) const {
        for (auto& w : trunk_w) f(w);
        for (auto& b : trunk_b) f(b);
        f(sigma_w); f(sigma_b);
        f(feature_w); f(feature_b);
        f(color_hidden_w); f(color_hidden_b);
        f(color_out_w); f(color_out_b);
    }

    void set_zero() {
        visit([](auto& t) { t.setZero(); });
    }
    void add(const MlpParamsT& other) {
        size_t i = 0;
        std::vector<const void*> src;
        other.visit([&](const auto& t) { src.push_back(&t); });
        visit([&](auto& t) {
            using Tensor = std::decay_t<decltype(t)>;
            t += *static_cast<const Tensor*>(src[i++]);
        });
    }
    bool all_finite() const {
        bool ok = true;
        visit([&](const auto& t) { ok = ok && t.allFinite(); });
        return ok;
    }
    size_t parameter_count() const {
        size_t n = 0;
        visit([&](const auto& t) { n += static_cast<size_t>(t.size()); });
        return n;
    }
    template <typename U>
    MlpParamsT<U> cast() const {
        MlpParamsT<U> out;
        out.trunk_w.reserve(trunk_w.size());
        out.trunk_b.reserve(trunk_b.size());
        for (auto& w : trunk_w) out.trunk_w.push_back(w.template cast<U>());
        for (auto& b : trunk_b) out.trunk_b.push_back(b.template cast<U>());
        out.sigma_w = sigma_w.template cast<U>();
        out.sigma_b = sigma_b.template cast<U>();
        out.feature_w = feature_w.template cast<U>();
        out.feature_b = feature_b.template cast<U>();
        out.color_hidden_w = color_hidden_w.template cast<U>();
        out.color_hidden_b = color_hidden_b.template cast<U>();
        out.color_out_w = color_out_w.template cast<U>();
        out.color_out_b = color_out_b.template cast<U>();
        return out;
    }
};

using MlpParams = MlpParamsT<float>;
template <typename T>
using GradientsT = MlpParamsT<T>;  // same shapes, accumulated over a ray batch
using Gradients = GradientsT<float>;

// Per-batch record of a forward pass. activations holds post-ReLU A^(l)
// for l = 1..tap_through, each [N x hidden]. A truncated pass (tap_through
// < trunk_layers) carries no head outputs.
template <typename T>
struct ForwardTraceT {
    MatT<T> encoded_pos;
    MatT<T> encoded_dir;
    std::vector<MatT<T>> activations;
    std::vector<MatT<T>> preacts;  // only when cfg.record_preact
    VecT<T> sigma;                 // after the density activation
    VecT<T> sigma_preact;          // raw density head output
    MatT<T> feature;               // bottleneck, no activation
    MatT<T> color_hidden;          // post-ReLU
    MatT<T> color;                 // post-sigmoid, [N x 3]
    int tap_through = 0;
    bool truncated = true;
    int64_t flops = 0;  // linear-layer FLOPs executed for this batch
};

using ForwardTrace = ForwardTraceT<float>;

// FLOPs of one [out x in] linear layer per sample: a multiply-add per input
// element plus the bias add.
inline int64_t linear_flops(int in, int out) { return static_cast<int64_t>(out) * (2 * in + 1); }

// Trunk-only FLOPs per sample through layer tap_through.
inline int64_t flops_per_sample_truncated(const MlpConfig& cfg, int tap_through) {
    int64_t total = 0;
    for (int l = 1; l <= tap_through; ++l)
        total += linear_flops(cfg.trunk_in_dim(l), cfg.hidden_units);
    return total;
}

// Full pass: trunk plus density, bottleneck and color head.
inline int64_t flops_per_sample_full(const MlpConfig& cfg) {
    int64_t total = flops_per_sample_truncated(cfg, cfg.trunk_layers);
    total += linear_flops(cfg.hidden_units, 1);                                  // density head
    total += linear_flops(cfg.hidden_units, cfg.hidden_units);                   // bottleneck
    total += linear_flops(cfg.hidden_units + cfg.dir_dim(), cfg.color_head_units);
    total += linear_flops(cfg.color_head_units, 3);
    return total;
}

namespace detail {

template <typename T>
T softplus(T x) {
    return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
void check_forward_shapes(const MlpConfig& cfg, const MlpParamsT<T>& p,
                          const MatT<T>& encoded_pos, const MatT<T>& encoded_dir,
                          int tap_through, bool run_heads) {
    if (encoded_pos.rows() < 1)
        throw ConfigError("forward_with_taps: empty batch");
    if (encoded_pos.cols() != cfg.pos_dim())
        throw ConfigError("forward_with_taps: encoded position dim " +
                          std::to_string(encoded_pos.cols()) + ", config expects " +
                          std::to_string(cfg.pos_dim()));
    if (tap_through < 1 || tap_through > cfg.trunk_layers)
        throw ConfigError("forward_with_taps: tap_through out of range");
    if (static_cast<int>(p.trunk_w.size()) != cfg.trunk_layers)
        throw ConfigError("forward_with_taps: params have " + std::to_string(p.trunk_w.size()) +
                          " trunk layers, config expects " + std::to_string(cfg.trunk_layers));
    for (int l = 1; l <= cfg.trunk_layers; ++l) {
        if (p.trunk_w[l - 1].rows() != cfg.hidden_units ||
            p.trunk_w[l - 1].cols() != cfg.trunk_in_dim(l))
            throw ConfigError("forward_with_taps: trunk layer " + std::to_string(l) +
                              " weight shape mismatch");
    }
    if (run_heads && tap_through != cfg.trunk_layers)
        throw ConfigError("forward_with_taps: heads need the full trunk");
    if (run_heads) {
        if (encoded_dir.rows() != encoded_pos.rows() || encoded_dir.cols() != cfg.dir_dim())
            throw ConfigError("forward_with_taps: encoded direction dim mismatch");
    }
}

}  // namespace detail

// Run the trunk through layer tap_through, recording post-ReLU taps. By
// default a pass through the whole trunk also evaluates the density,
// bottleneck and color heads; run_heads = false gives a taps-only pass at
// any depth (its trace cannot feed backward).
template <typename T>
ForwardTraceT<T> forward_with_taps(const MlpConfig& cfg, const MlpParamsT<T>& p,
                                   MatT<T> encoded_pos, MatT<T> encoded_dir, int tap_through,
                                   bool run_heads) {
    detail::check_forward_shapes(cfg, p, encoded_pos, encoded_dir, tap_through, run_heads);
    const auto n = encoded_pos.rows();

    ForwardTraceT<T> tr;
    tr.encoded_pos = std::move(encoded_pos);
    tr.tap_through = tap_through;
    tr.truncated = !run_heads;
    tr.activations.reserve(tap_through);

    MatT<T> z;
    for (int l = 1; l <= tap_through; ++l) {
        const MatT<T>& x = (l == 1) ? tr.encoded_pos : tr.activations[l - 2];
        if (cfg.skip_connection_at != 0 && l == cfg.skip_connection_at + 1) {
            MatT<T> cat(n, x.cols() + tr.encoded_pos.cols());
            cat << x, tr.encoded_pos;
            z.noalias() = cat * p.trunk_w[l - 1].transpose();
        } else {
            z.noalias() = x * p.trunk_w[l - 1].transpose();
        }
        z.rowwise() += p.trunk_b[l - 1].transpose();
        if (cfg.record_preact) tr.preacts.push_back(z);
        tr.activations.push_back(z.cwiseMax(T(0)));
        tr.flops += n * linear_flops(cfg.trunk_in_dim(l), cfg.hidden_units);
    }

    if (!run_heads) return tr;

    const MatT<T>& top = tr.activations.back();

    tr.sigma_preact.noalias() = top * p.sigma_w.transpose();
    tr.sigma_preact.array() += p.sigma_b(0);
    if (cfg.softplus_density) {
        tr.sigma = tr.sigma_preact.unaryExpr([](T v) { return detail::softplus(v); });
    } else {
        tr.sigma = tr.sigma_preact.cwiseMax(T(0));
    }

    tr.feature.noalias() = top * p.feature_w.transpose();
    tr.feature.rowwise() += p.feature_b.transpose();

    tr.encoded_dir = std::move(encoded_dir);
    MatT<T> color_in(n, tr.feature.cols() + tr.encoded_dir.cols());
    color_in << tr.feature, tr.encoded_dir;

    MatT<T> ch;
    ch.noalias() = color_in * p.color_hidden_w.transpose();
    ch.rowwise() += p.color_hidden_b.transpose();
    tr.color_hidden = ch.cwiseMax(T(0));

    MatT<T> co;
    co.noalias() = tr.color_hidden * p.color_out_w.transpose();
    co.rowwise() += p.color_out_b.transpose();
    tr.color = co.unaryExpr([](T v) { return T(1) / (T(1) + std::exp(-v)); });

    tr.flops += n * (flops_per_sample_full(cfg) - flops_per_sample_truncated(cfg, cfg.trunk_layers));
    return tr;
}

// Reverse pass for a full trace. dL_dsigma and dL_dcolor are gradients of
// the loss w.r.t. the post-activation outputs; gradients accumulate into
// grads (callers zero it when starting a batch).
template <typename T>
void backward(const MlpConfig& cfg, const MlpParamsT<T>& p, const ForwardTraceT<T>& trace,
              const VecT<T>& dL_dsigma, const MatT<T>& dL_dcolor, GradientsT<T>& grads) {
    if (trace.truncated)
        throw UnsupportedOperation("backward: trace came from a truncated forward pass");
    const auto n = trace.encoded_pos.rows();
    if (dL_dsigma.size() != n || dL_dcolor.rows() != n || dL_dcolor.cols() != 3)
        throw ConfigError("backward: upstream gradient shape mismatch");

    // color output: sigmoid
    MatT<T> d_co = (dL_dcolor.array() * trace.color.array() *
                    (T(1) - trace.color.array())).matrix();
    grads.color_out_w.noalias() += d_co.transpose() * trace.color_hidden;
    grads.color_out_b.noalias() += d_co.colwise().sum().transpose();

    // color hidden: ReLU
    MatT<T> d_ch;
    d_ch.noalias() = d_co * p.color_out_w;
    d_ch = (trace.color_hidden.array() > T(0)).select(d_ch, T(0));
    MatT<T> color_in(n, trace.feature.cols() + trace.encoded_dir.cols());
    color_in << trace.feature, trace.encoded_dir;
    grads.color_hidden_w.noalias() += d_ch.transpose() * color_in;
    grads.color_hidden_b.noalias() += d_ch.colwise().sum().transpose();

    MatT<T> d_color_in;
    d_color_in.noalias() = d_ch * p.color_hidden_w;
    MatT<T> d_feature = d_color_in.leftCols(trace.feature.cols());

    const MatT<T>& top = trace.activations.back();

    // bottleneck (no activation)
    grads.feature_w.noalias() += d_feature.transpose() * top;
    grads.feature_b.noalias() += d_feature.colwise().sum().transpose();

    // density head through its activation
    VecT<T> d_sz;
    if (cfg.softplus_density) {
        d_sz = dL_dsigma.cwiseProduct(trace.sigma_preact.unaryExpr(
            [](T v) { return T(1) / (T(1) + std::exp(-v)); }));
    } else {
        d_sz = dL_dsigma.cwiseProduct(
            (trace.sigma_preact.array() > T(0)).template cast<T>().matrix());
    }
    grads.sigma_w.noalias() += d_sz.transpose() * top;
    grads.sigma_b(0) += d_sz.sum();

    // into the trunk
    MatT<T> d_act;
    d_act.noalias() = d_feature * p.feature_w;
    d_act.noalias() += d_sz * p.sigma_w;

    MatT<T> d_z;
    for (int l = cfg.trunk_layers; l >= 1; --l) {
        const MatT<T>& a = trace.activations[l - 1];
        d_z = (a.array() > T(0)).select(d_act, T(0));

        bool skip_here = cfg.skip_connection_at != 0 && l == cfg.skip_connection_at + 1;
        const MatT<T>& x_plain = (l == 1) ? trace.encoded_pos : trace.activations[l - 2];
        if (skip_here) {
            MatT<T> cat(n, x_plain.cols() + trace.encoded_pos.cols());
            cat << x_plain, trace.encoded_pos;
            grads.trunk_w[l - 1].noalias() += d_z.transpose() * cat;
        } else {
            grads.trunk_w[l - 1].noalias() += d_z.transpose() * x_plain;
        }
        grads.trunk_b[l - 1].noalias() += d_z.colwise().sum().transpose();

        if (l > 1) {
            if (skip_here) {
                d_act = (d_z * p.trunk_w[l - 1]).leftCols(cfg.hidden_units);
            } else {
                d_act.noalias() = d_z * p.trunk_w[l - 1];
            }
        }
    }
}

// He-style uniform fan-in init, biases zero, deterministic in the seed.
MlpParams init_params(const MlpConfig& cfg, uint64_t seed);

// Gradient/moment buffers shaped like the params, zero-filled.
Gradients make_gradients(const MlpConfig& cfg);

struct AdamState {
    Gradients m;
    Gradients v;
    int64_t step = 0;
};

AdamState make_adam_state(const MlpConfig& cfg);

// One bias-corrected Adam update. Rejects non-finite gradients (params and
// state untouched) by throwing RuntimeFailure.
void adam_step(MlpParams& params, const Gradients& grads, AdamState& state, float lr,
               float beta1 = 0.9f, float beta2 = 0.999f, float eps = 1e-8f);

}  // namespace anerf
