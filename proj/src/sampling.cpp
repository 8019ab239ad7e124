#include "anerf/sampling.hpp"

#include <algorithm>
#include <cassert>

namespace anerf {

void SampleSet::recompute_deltas() {
    size_t n = t.size();
    delta.resize(n);
    for (size_t i = 0; i + 1 < n; ++i) delta[i] = t[i + 1] - t[i];
    if (n > 0) delta[n - 1] = t_far - t[n - 1];
}

SampleSet uniform_samples(const Ray& ray, int n, bool stratified, Rng& rng) {
    SampleSet s;
    s.t_near = ray.t_near;
    s.t_far = ray.t_far;
    s.t.resize(n);
    float width = (ray.t_far - ray.t_near) / static_cast<float>(n);
    for (int i = 0; i < n; ++i) {
        float u = stratified ? rng.next_float() : 0.5f;
        s.t[i] = ray.t_near + (static_cast<float>(i) + u) * width;
    }
    s.recompute_deltas();
    return s;
}

std::vector<float> uniform_bin_edges(const Ray& ray, int n) {
    std::vector<float> edges(n + 1);
    float width = (ray.t_far - ray.t_near) / static_cast<float>(n);
    for (int i = 0; i <= n; ++i) edges[i] = ray.t_near + static_cast<float>(i) * width;
    edges[n] = ray.t_far;
    return edges;
}

std::optional<WeightPdf> pdf_from_weights(std::span<const float> weights,
                                          std::vector<float> bin_edges) {
    assert(bin_edges.size() == weights.size() + 1);
    float total = 0.f;
    for (float w : weights) total += w;
    if (total == 0.f) return std::nullopt;
    WeightPdf pdf;
    pdf.bin_edges = std::move(bin_edges);
    pdf.bin_weights.resize(weights.size());
    float denom = total + 1e-10f;
    for (size_t i = 0; i < weights.size(); ++i) pdf.bin_weights[i] = weights[i] / denom;
    return pdf;
}

SampleSet inverse_transform_sample(const WeightPdf& pdf, std::span<const float> u) {
    size_t bins = pdf.bin_weights.size();
    SampleSet s;
    s.t_near = pdf.bin_edges.front();
    s.t_far = pdf.bin_edges.back();
    s.t.resize(u.size());

    // Walk the CDF once; u is sorted.
    float cdf_lo = 0.f;
    size_t bin = 0;
    float cdf_hi = bins > 0 ? pdf.bin_weights[0] : 0.f;
    for (size_t i = 0; i < u.size(); ++i) {
        while (bin + 1 < bins && u[i] >= cdf_hi) {
            cdf_lo = cdf_hi;
            ++bin;
            cdf_hi += pdf.bin_weights[bin];
        }
        float w = pdf.bin_weights[bin];
        float frac = w > 0.f ? (u[i] - cdf_lo) / w : 0.f;
        frac = std::clamp(frac, 0.f, 1.f);
        s.t[i] = pdf.bin_edges[bin] + frac * (pdf.bin_edges[bin + 1] - pdf.bin_edges[bin]);
    }
    s.recompute_deltas();
    return s;
}

std::vector<float> stratified_uniforms(int n, bool jitter, Rng& rng) {
    std::vector<float> u(n);
    float width = 1.f / static_cast<float>(n);
    for (int i = 0; i < n; ++i) {
        float v = jitter ? rng.next_float() : 0.5f;
        u[i] = (static_cast<float>(i) + v) * width;
    }
    return u;
}

SampleSet merge_and_sort(const SampleSet& a, const SampleSet& b) {
    SampleSet s;
    s.t_near = a.t.empty() ? b.t_near : a.t_near;
    s.t_far = a.t.empty() ? b.t_far : a.t_far;
    s.t.resize(a.t.size() + b.t.size());
    std::merge(a.t.begin(), a.t.end(), b.t.begin(), b.t.end(), s.t.begin());
    s.recompute_deltas();
    return s;
}

}  // namespace anerf
