#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "scenegen/common.hpp"

namespace scenegen {

using Vec3 = std::array<real, 3>;
using Quat = std::array<real, 4>;  // scalar-first: {w, x, y, z}
using Mat3 = std::array<real, 9>;  // row-major

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(real s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline real vdot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 vcross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline real vnorm(const Vec3& a) { return std::sqrt(vdot(a, a)); }

real quat_norm(const Quat& q);
Quat quat_normalize(const Quat& q);
// Flips sign so the first non-zero component is positive; q and -q encode the
// same rotation, and a canonical sign makes comparisons well defined.
Quat quat_canonical(const Quat& q);
Quat quat_conjugate(const Quat& q);
Quat quat_mul(const Quat& a, const Quat& b);  // Hamilton product, a then applied after b
Quat quat_from_axis_angle(const Vec3& axis, real angle);
Mat3 quat_rotation_matrix(const Quat& q);
Vec3 quat_rotate(const Quat& q, const Vec3& v);
// Rotation angle between two unit quaternions, in radians, in [0, pi].
real quat_angle_between(const Quat& a, const Quat& b);
// Chordal L2 mean of unit quaternions (sign-aligned). Exact shortcuts: a single
// input returns its canonical form; identical inputs return the first.
Quat quat_mean(const std::vector<Quat>& qs);
Quat quat_from_rotation_matrix(const Mat3& R);

// Similarity transform p -> s * R(q) * p + t with s > 0 and unit q.
struct Pose {
    Vec3 t{0, 0, 0};
    Quat q{1, 0, 0, 0};
    real s = 1;

    static Pose identity() { return Pose{}; }

    Vec3 apply(const Vec3& p) const;
    Pose inverse() const;
    // Composition: (a.compose(b))(p) == a(b(p)).
    Pose compose(const Pose& b) const;

    std::array<real, 8> to8() const;           // [t(3), q(4), s]
    static Pose from8(const std::array<real, 8>& v);  // normalizes q, requires s > 0
};

// Largest translation / rotation / log-scale discrepancy between two poses.
struct PoseError {
    real translation = 0;
    real rotation_rad = 0;
    real log_scale = 0;
};
PoseError pose_error(const Pose& a, const Pose& b);

}  // namespace scenegen
