#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hoigen {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

/// Row-major 3x3 rotation matrix.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3 identity() { return {}; }

    double operator()(int r, int c) const { return m[static_cast<size_t>(r) * 3 + c]; }
    double& operator()(int r, int c) { return m[static_cast<size_t>(r) * 3 + c]; }

    Vec3 col(int c) const { return {m[0 + c], m[3 + c], m[6 + c]}; }

    Vec3 apply(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 transposed() const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = (*this)(j, i);
        return r;
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }

    double trace() const { return m[0] + m[4] + m[8]; }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
};

class RotationError : public std::runtime_error {
public:
    explicit RotationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Continuous 6D rotation decode: Gram-Schmidt of the two encoded 3-vectors
/// (the first two matrix columns), third column from the cross product.
Mat3 rot6d_to_matrix(const std::array<double, 6>& r);

/// First two columns of R, the 6D encoding.
std::array<double, 6> matrix_to_rot6d(const Mat3& r);

/// Rotation about an axis (not necessarily unit) by |axis| radians.
Mat3 axis_angle_to_matrix(const Vec3& rotvec);

/// Rotation vector (axis * angle) of R; inverse of axis_angle_to_matrix.
Vec3 matrix_to_rotvec(const Mat3& r);

}  // namespace hoigen
