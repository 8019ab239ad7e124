#pragma once

#include <span>

#include "anerf/geometry.hpp"

namespace anerf {

// Output size of positional_encoding for an in_dim-dimensional input.
inline int encoded_dim(int in_dim, int frequencies, bool include_input) {
    return (include_input ? in_dim : 0) + in_dim * 2 * frequencies;
}

// gamma(p): optional raw input, then per coordinate
// [sin(2^k pi p), cos(2^k pi p)] for k = 0 .. frequencies-1.
// out.size() must equal encoded_dim(p.size(), frequencies, include_input).
void positional_encoding(std::span<const float> p, int frequencies, bool include_input,
                         std::span<float> out);

// Radial contraction onto the ball of radius 2: identity inside the unit
// ball, (2 - 1/||x||) * x/||x|| outside.
Vec3 contract(const Vec3& x);

}  // namespace anerf
