#pragma once

#include <cmath>
#include <span>

#include "anerf/geometry.hpp"

namespace anerf {

// Emission-absorption quadrature over one ray:
//   T_i = exp(-sum_{j<i} sigma_j delta_j),  w_i = T_i (1 - exp(-sigma_i delta_i)).
// transmittance needs n+1 slots; the last entry is T after the final sample,
// so sum(w) == 1 - transmittance[n].
template <typename T>
void compute_weights(std::span<const T> sigma, std::span<const T> delta, std::span<T> weights,
                     std::span<T> transmittance) {
    size_t n = sigma.size();
    T trans = T(1);
    for (size_t i = 0; i < n; ++i) {
        transmittance[i] = trans;
        T absorb = std::exp(-sigma[i] * delta[i]);
        weights[i] = trans * (T(1) - absorb);
        trans *= absorb;
    }
    transmittance[n] = trans;
}

// rgb = sum_i w_i c_i + (1 - sum_i w_i) * background; returns alpha = sum w.
// colors is packed rgb, 3 per sample.
template <typename T>
T composite_ray(std::span<const T> weights, std::span<const T> colors, const T background[3],
                T rgb_out[3]) {
    T alpha = T(0);
    rgb_out[0] = rgb_out[1] = rgb_out[2] = T(0);
    for (size_t i = 0; i < weights.size(); ++i) {
        alpha += weights[i];
        rgb_out[0] += weights[i] * colors[3 * i + 0];
        rgb_out[1] += weights[i] * colors[3 * i + 1];
        rgb_out[2] += weights[i] * colors[3 * i + 2];
    }
    T bg_share = T(1) - alpha;
    rgb_out[0] += bg_share * background[0];
    rgb_out[1] += bg_share * background[1];
    rgb_out[2] += bg_share * background[2];
    return alpha;
}

// Reverse pass of compute_weights + composite_ray for the loss gradient
// d_rgb. Writes dL/dsigma and dL/dcolor (both post-activation, per sample).
// Uses dw_i/dsigma_i = T_i delta_i exp(-sigma_i delta_i) and
// dw_i/dsigma_j = -delta_j w_i for j < i, folded into a suffix sum.
template <typename T>
void quadrature_backward(std::span<const T> sigma, std::span<const T> delta,
                         std::span<const T> weights, std::span<const T> transmittance,
                         std::span<const T> colors, const T background[3], const T d_rgb[3],
                         std::span<T> d_sigma, std::span<T> d_color) {
    size_t n = sigma.size();
    // dL/dw_i = <d_rgb, c_i - background>
    // suffix[i] = sum_{k > i} dL/dw_k * w_k
    T suffix = T(0);
    for (size_t ri = 0; ri < n; ++ri) {
        size_t i = n - 1 - ri;
        d_color[3 * i + 0] = d_rgb[0] * weights[i];
        d_color[3 * i + 1] = d_rgb[1] * weights[i];
        d_color[3 * i + 2] = d_rgb[2] * weights[i];
        T dl_dw = d_rgb[0] * (colors[3 * i + 0] - background[0]) +
                  d_rgb[1] * (colors[3 * i + 1] - background[1]) +
                  d_rgb[2] * (colors[3 * i + 2] - background[2]);
        T absorb = std::exp(-sigma[i] * delta[i]);
        d_sigma[i] = dl_dw * transmittance[i] * delta[i] * absorb - delta[i] * suffix;
        suffix += dl_dw * weights[i];
    }
}

}  // namespace anerf
