#pragma once

#include <optional>
#include <span>
#include <vector>

#include "anerf/geometry.hpp"
#include "anerf/rng.hpp"

namespace anerf {

// Sample positions along one ray segment. t is sorted ascending inside
// [t_near, t_far]; delta[i] = t[i+1] - t[i], with delta.back() = t_far - t.back().
struct SampleSet {
    std::vector<float> t;
    std::vector<float> delta;
    float t_near = 0.f;
    float t_far = 0.f;

    size_t size() const { return t.size(); }
    void recompute_deltas();
};

// Piecewise-constant PDF over a t-interval partition. bin_edges has
// bin_weights.size() + 1 entries; weights are non-negative and sum to 1.
struct WeightPdf {
    std::vector<float> bin_weights;
    std::vector<float> bin_edges;
};

// N equal bins over [t_near, t_far]; deterministic mode takes bin midpoints,
// stratified mode one uniform draw per bin.
SampleSet uniform_samples(const Ray& ray, int n, bool stratified, Rng& rng);

// The N+1 edges of the uniform bin partition used by uniform_samples.
std::vector<float> uniform_bin_edges(const Ray& ray, int n);

// Normalize raw rendering weights into a PDF over the given partition,
// w_i / (sum w + 1e-10). Returns nullopt when every weight is exactly zero
// (callers fall back to uniform fine samples).
std::optional<WeightPdf> pdf_from_weights(std::span<const float> weights,
                                          std::vector<float> bin_edges);

// Inverse CDF with linear interpolation inside bins. u must be sorted,
// each in [0, 1). Output t-values are sorted.
SampleSet inverse_transform_sample(const WeightPdf& pdf, std::span<const float> u);

// n sorted u-values: stratified jitter (one draw per bin) or bin midpoints.
std::vector<float> stratified_uniforms(int n, bool jitter, Rng& rng);

// Union of the two sample sets (same ray segment), sorted, deltas recomputed.
SampleSet merge_and_sort(const SampleSet& a, const SampleSet& b);

}  // namespace anerf
