#pragma once

#include <array>
#include <cmath>

namespace anerf {

struct Vec3 {
    float x = 0.f, y = 0.f, z = 0.f;

    Vec3() = default;
    Vec3(float x_, float y_, float z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(float s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(float s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    float operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    float dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    float norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const { float n = norm(); return n > 0.f ? *this / n : *this; }
};

inline Vec3 operator*(float s, const Vec3& v) { return v * s; }

// Row-major 4x4, camera-to-world convention throughout.
struct Mat4 {
    std::array<std::array<float, 4>, 4> m{};

    static Mat4 identity() {
        Mat4 r;
        for (int i = 0; i < 4; ++i) r.m[i][i] = 1.f;
        return r;
    }

    Vec3 rotate(const Vec3& v) const {
        return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
                m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
                m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
    }

    Vec3 translation() const { return {m[0][3], m[1][3], m[2][3]}; }

    // ||R R^T - I||_max over the 3x3 block
    float rotation_orthonormality_error() const {
        float worst = 0.f;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                float dot = 0.f;
                for (int k = 0; k < 3; ++k) dot += m[i][k] * m[j][k];
                float want = (i == j) ? 1.f : 0.f;
                worst = std::max(worst, std::fabs(dot - want));
            }
        }
        return worst;
    }

    // Gram-Schmidt on the rotation rows; translation untouched.
    void reorthonormalize();
};

struct Ray {
    Vec3 origin;
    Vec3 dir;      // unit length
    float t_near = 0.f;
    float t_far = 1.f;

    Vec3 at(float t) const { return origin + t * dir; }
};

}  // namespace anerf
