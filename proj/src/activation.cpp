#include "anerf/activation.hpp"

#include <cassert>
#include <cmath>

#include "anerf/errors.hpp"

namespace anerf {

ActivationFeature feature_per_sample(const Mat& activation, int layer) {
    assert(activation.rows() > 0 && activation.cols() > 0);
    ActivationFeature f;
    f.layer = layer;
    f.values.resize(activation.rows());
    float inv = 1.f / static_cast<float>(activation.cols());
    for (Eigen::Index i = 0; i < activation.rows(); ++i)
        f.values[i] = activation.row(i).sum() * inv;
    return f;
}

float ray_scalar(const Mat& activation) {
    assert(activation.rows() > 0);
    return activation.sum() / static_cast<float>(activation.rows());
}

const char* estimator_name(Estimator e) {
    switch (e) {
        case Estimator::F1: return "f1";
        case Estimator::F2: return "f2";
        case Estimator::F3: return "f3";
    }
    return "?";
}

DensityEstimate estimate_density(const ActivationFeature& f, Estimator estimator,
                                 bool apply_relu, bool population_std) {
    size_t n = f.values.size();
    assert(n >= 2);

    float mean = 0.f;
    for (float v : f.values) mean += v;
    mean /= static_cast<float>(n);
    float var = 0.f;
    for (float v : f.values) var += (v - mean) * (v - mean);
    var /= static_cast<float>(population_std ? n : n - 1);
    float sd = std::sqrt(var);

    float shift = (estimator == Estimator::F1) ? sd : sd * 0.5f;
    float level = mean - shift;

    DensityEstimate d;
    d.tag = estimator;
    d.layer = f.layer;
    d.d.resize(n);
    for (size_t i = 0; i < n; ++i) {
        float v = level - f.values[i];
        if (apply_relu && v < 0.f) v = 0.f;
        d.d[i] = (estimator == Estimator::F3) ? v * v : v;
    }
    return d;
}

std::optional<WeightPdf> weights_from_density(const DensityEstimate& d,
                                              std::vector<float> bin_edges) {
    assert(bin_edges.size() == d.d.size() + 1);
    double total = 0.0;
    for (float v : d.d) total += v;
    if (total == 0.0) return std::nullopt;
    WeightPdf pdf;
    pdf.bin_edges = std::move(bin_edges);
    pdf.bin_weights.resize(d.d.size());
    float inv = static_cast<float>(1.0 / total);
    for (size_t i = 0; i < d.d.size(); ++i) pdf.bin_weights[i] = d.d[i] * inv;
    return pdf;
}

float image_mean(const ActivationImage& img) {
    double sum = 0.0;
    for (float v : img.v) sum += v;
    return static_cast<float>(sum / static_cast<double>(img.v.size()));
}

std::vector<uint8_t> derive_mask(const ActivationImage& img) {
    float tau = image_mean(img);
    std::vector<uint8_t> mask(img.v.size());
    for (size_t i = 0; i < img.v.size(); ++i) mask[i] = img.v[i] < tau ? 1 : 0;
    return mask;
}

int count_dense_samples(std::span<const float> sigma, float threshold) {
    int n = 0;
    for (float s : sigma)
        if (s > threshold) ++n;
    return n;
}

Volume upsample_nearest(const Volume& half) {
    if (half.height < 1 || half.width < 1 || half.depth < 1)
        throw ConfigError("upsample_nearest: empty volume");
    Volume full;
    full.height = half.height * 2;
    full.width = half.width * 2;
    full.depth = half.depth * 2;
    full.data.resize(static_cast<size_t>(full.height) * full.width * full.depth);
    for (int y = 0; y < full.height; ++y)
        for (int x = 0; x < full.width; ++x)
            for (int k = 0; k < full.depth; ++k)
                full.at(x, y, k) = half.at(x / 2, y / 2, k / 2);
    return full;
}

}  // namespace anerf
