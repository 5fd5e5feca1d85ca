#include "core/rotation.hpp"

#include <algorithm>

namespace hoigen {

Mat3 rot6d_to_matrix(const std::array<double, 6>& r) {
    const Vec3 a1{r[0], r[1], r[2]};
    const Vec3 a2{r[3], r[4], r[5]};
    const double n1 = a1.norm();
    if (n1 < 1e-8) throw RotationError("rot6d_to_matrix: first column is (near) zero");
    const Vec3 b1 = a1 * (1.0 / n1);
    Vec3 b2 = a2 - b1 * b1.dot(a2);
    const double n2 = b2.norm();
    if (n2 < 1e-8)
        throw RotationError("rot6d_to_matrix: degenerate input, columns are (near) parallel");
    b2 = b2 * (1.0 / n2);
    const Vec3 b3 = b1.cross(b2);
    Mat3 out;
    for (int i = 0; i < 3; ++i) {
        out(i, 0) = (&b1.x)[i];
        out(i, 1) = (&b2.x)[i];
        out(i, 2) = (&b3.x)[i];
    }
    return out;
}

std::array<double, 6> matrix_to_rot6d(const Mat3& r) {
    return {r(0, 0), r(1, 0), r(2, 0), r(0, 1), r(1, 1), r(2, 1)};
}

Mat3 axis_angle_to_matrix(const Vec3& rotvec) {
    const double angle = rotvec.norm();
    if (angle < 1e-12) return Mat3::identity();
    const Vec3 u = rotvec * (1.0 / angle);
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    Mat3 r;
    r(0, 0) = c + u.x * u.x * t;
    r(0, 1) = u.x * u.y * t - u.z * s;
    r(0, 2) = u.x * u.z * t + u.y * s;
    r(1, 0) = u.y * u.x * t + u.z * s;
    r(1, 1) = c + u.y * u.y * t;
    r(1, 2) = u.y * u.z * t - u.x * s;
    r(2, 0) = u.z * u.x * t - u.y * s;
    r(2, 1) = u.z * u.y * t + u.x * s;
    r(2, 2) = c + u.z * u.z * t;
    return r;
}

Vec3 matrix_to_rotvec(const Mat3& r) {
    const double cos_angle = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double angle = std::acos(cos_angle);
    const Vec3 skew{r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)};
    if (angle < 1e-7) {
        // R ~ I + [w]x, so the skew part is ~2w
        return skew * 0.5;
    }
    if (angle > M_PI - 1e-5) {
        // near pi the skew part vanishes; recover the axis from R + I
        Vec3 axis;
        double best = -1.0;
        for (int c = 0; c < 3; ++c) {
            Vec3 col = {r(0, c), r(1, c), r(2, c)};
            (&col.x)[c] += 1.0;
            const double n = col.norm();
            if (n > best) {
                best = n;
                axis = col * (1.0 / n);
            }
        }
        // fix the sign with the skew part when it is not exactly zero
        if (axis.dot(skew) < 0.0) axis = axis * -1.0;
        return axis * angle;
    }
    return skew * (angle / (2.0 * std::sin(angle)));
}

}  // namespace hoigen
