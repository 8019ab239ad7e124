#pragma once

#include <optional>
#include <span>
#include <vector>

#include "anerf/mlp.hpp"
#include "anerf/sampling.hpp"

namespace anerf {

// Per-sample activation feature f_l along one ray: mean over the hidden
// units of the post-ReLU activation matrix of layer l.
struct ActivationFeature {
    std::vector<float> values;  // length = samples on the ray
    int layer = 0;
};

ActivationFeature feature_per_sample(const Mat& activation, int layer);

// Per-ray scalar v_l: mean over samples of the per-sample SUM over hidden
// units (no 1/N_h factor, so v_l == N_h * mean(f_l)).
float ray_scalar(const Mat& activation);

enum class Estimator { F1, F2, F3 };

const char* estimator_name(Estimator e);

struct DensityEstimate {
    std::vector<float> d;  // elementwise >= 0 when the ReLU is applied
    Estimator tag = Estimator::F2;
    int layer = 0;
};

// Map an activation feature to a density estimate:
//   f1 = relu((mu - sd)     - f)
//   f2 = relu((mu - sd / 2) - f)
//   f3 = relu((mu - sd / 2) - f)^2
// mu/sd are taken along the ray; sd is the population standard deviation
// (a flag switches to the sample form). apply_relu = false swaps the ReLU
// for the identity (f3 then squares the raw value).
DensityEstimate estimate_density(const ActivationFeature& f, Estimator estimator,
                                 bool apply_relu = true, bool population_std = true);

// d / sum(d) over the given partition. Degenerate input (sum exactly zero)
// yields nullopt; callers engage the uniform fallback and flag the ray.
std::optional<WeightPdf> weights_from_density(const DensityEstimate& d,
                                              std::vector<float> bin_edges);

// Whole-image field of per-ray scalars v_l.
struct ActivationImage {
    int width = 0;
    int height = 0;
    int layer = 0;
    std::vector<float> v;  // row-major, height*width

    float at(int x, int y) const { return v[static_cast<size_t>(y) * width + x]; }
};

float image_mean(const ActivationImage& img);

// Mask P = { pixels with v strictly below the image mean }; a constant
// image therefore produces an empty mask. 1 = in P.
std::vector<uint8_t> derive_mask(const ActivationImage& img);

// |{ i : sigma_i > threshold }| along a ray.
int count_dense_samples(std::span<const float> sigma, float threshold);

// Scalar field on a (height, width, depth) grid, e.g. activation features
// recorded at half resolution.
struct Volume {
    int height = 0, width = 0, depth = 0;
    std::vector<float> data;  // index = (y*width + x)*depth + k

    float at(int x, int y, int k) const {
        return data[(static_cast<size_t>(y) * width + x) * static_cast<size_t>(depth) + k];
    }
    float& at(int x, int y, int k) {
        return data[(static_cast<size_t>(y) * width + x) * static_cast<size_t>(depth) + k];
    }
};

// Nearest-neighbor x2 upsampling in all three dims: every cell becomes a
// 2x2x2 block.
Volume upsample_nearest(const Volume& half);

}  // namespace anerf
