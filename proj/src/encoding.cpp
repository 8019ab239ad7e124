#include "anerf/encoding.hpp"

#include <cassert>
#include <cmath>

namespace anerf {

void positional_encoding(std::span<const float> p, int frequencies, bool include_input,
                         std::span<float> out) {
    assert(out.size() == static_cast<size_t>(encoded_dim(static_cast<int>(p.size()),
                                                         frequencies, include_input)));
    size_t k = 0;
    if (include_input) {
        for (float v : p) out[k++] = v;
    }
    for (float v : p) {
        float arg = static_cast<float>(M_PI) * v;
        for (int f = 0; f < frequencies; ++f) {
            out[k++] = std::sin(arg);
            out[k++] = std::cos(arg);
            arg *= 2.f;
        }
    }
}

Vec3 contract(const Vec3& x) {
    float n = x.norm();
    if (n <= 1.f) return x;
    return (2.f - 1.f / n) * (x / n);
}

}  // namespace anerf
