#pragma once

#include <array>
#include <span>

#include "anerf/activation.hpp"
#include "anerf/image.hpp"

namespace anerf {

// 256-entry magma lookup table (8-bit RGB).
extern const std::array<std::array<uint8_t, 3>, 256> kMagmaLut;

// t in [0,1] -> LUT color.
std::array<uint8_t, 3> magma_lookup(float t);

// Min-max normalize and map through the LUT. A constant field maps to the
// colormap midpoint.
Image8 render_heatmap(std::span<const float> values, int width, int height);
Image8 render_heatmap(const ActivationImage& img);

// Bar plot of a histogram of `values` (64 bins over [min, max]) on a white
// background; bars use the LUT midpoint color.
Image8 render_histogram(std::span<const float> values, int bins = 64, int width = 256,
                        int height = 160);

}  // namespace anerf
