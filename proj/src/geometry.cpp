#include "anerf/geometry.hpp"

namespace anerf {

void Mat4::reorthonormalize() {
    Vec3 r0{m[0][0], m[0][1], m[0][2]};
    Vec3 r1{m[1][0], m[1][1], m[1][2]};
    r0 = r0.normalized();
    r1 = (r1 - r0 * r1.dot(r0)).normalized();
    Vec3 r2{r0.y * r1.z - r0.z * r1.y, r0.z * r1.x - r0.x * r1.z, r0.x * r1.y - r0.y * r1.x};
    m[0][0] = r0.x; m[0][1] = r0.y; m[0][2] = r0.z;
    m[1][0] = r1.x; m[1][1] = r1.y; m[1][2] = r1.z;
    m[2][0] = r2.x; m[2][1] = r2.y; m[2][2] = r2.z;
}

}  // namespace anerf
