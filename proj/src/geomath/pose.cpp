#include "scenegen/geomath/pose.hpp"

#include <Eigen/Dense>

namespace scenegen {

real quat_norm(const Quat& q) {
    return std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
}

Quat quat_normalize(const Quat& q) {
    const real n = quat_norm(q);
    SG_CHECK(n > real(1e-12), "quat_normalize: near-zero quaternion");
    return {q[0] / n, q[1] / n, q[2] / n, q[3] / n};
}

Quat quat_canonical(const Quat& q) {
    for (real c : q) {
        if (c > 0) return q;
        if (c < 0) return {-q[0], -q[1], -q[2], -q[3]};
    }
    return q;
}

Quat quat_conjugate(const Quat& q) { return {q[0], -q[1], -q[2], -q[3]}; }

Quat quat_mul(const Quat& a, const Quat& b) {
    return {a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
            a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
            a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]};
}

Quat quat_from_axis_angle(const Vec3& axis, real angle) {
    const real n = vnorm(axis);
    SG_CHECK(n > real(1e-12), "quat_from_axis_angle: zero axis");
    const real h = angle / 2;
    const real s = std::sin(h) / n;
    return {std::cos(h), s * axis[0], s * axis[1], s * axis[2]};
}

Mat3 quat_rotation_matrix(const Quat& q) {
    const real w = q[0], x = q[1], y = q[2], z = q[3];
    return {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
            2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
            2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
}

Vec3 quat_rotate(const Quat& q, const Vec3& v) {
    // v' = v + 2u x (u x v + w v) with u the vector part
    const Vec3 u{q[1], q[2], q[3]};
    const Vec3 t = vcross(u, vcross(u, v) + q[0] * v);
    return v + real(2) * t;
}

real quat_angle_between(const Quat& a, const Quat& b) {
    real d = std::abs(a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]);
    d = std::min(d, real(1));
    return 2 * std::acos(d);
}

Quat quat_mean(const std::vector<Quat>& qs) {
    SG_CHECK(!qs.empty(), "quat_mean: empty input");
    std::vector<Quat> aligned;
    aligned.reserve(qs.size());
    for (const auto& q : qs) aligned.push_back(quat_canonical(quat_normalize(q)));
    if (aligned.size() == 1) return aligned[0];
    bool all_same = true;
    for (size_t i = 1; i < aligned.size() && all_same; ++i)
        for (int c = 0; c < 4; ++c)
            if (aligned[i][c] != aligned[0][c]) {
                all_same = false;
                break;
            }
    if (all_same) return aligned[0];

    // Chordal mean: leading eigenvector of the accumulated outer-product matrix.
    Eigen::Matrix4d A = Eigen::Matrix4d::Zero();
    for (const auto& q : aligned) {
        Eigen::Vector4d v(q[0], q[1], q[2], q[3]);
        A += v * v.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(A);
    Eigen::Vector4d v = es.eigenvectors().col(3);  // largest eigenvalue is last
    return quat_canonical(quat_normalize(
        {static_cast<real>(v[0]), static_cast<real>(v[1]), static_cast<real>(v[2]),
         static_cast<real>(v[3])}));
}

Quat quat_from_rotation_matrix(const Mat3& R) {
    // Shepperd's method: pick the dominant diagonal branch for stability.
    const real m00 = R[0], m01 = R[1], m02 = R[2];
    const real m10 = R[3], m11 = R[4], m12 = R[5];
    const real m20 = R[6], m21 = R[7], m22 = R[8];
    const real tr = m00 + m11 + m22;
    Quat q;
    if (tr > 0) {
        const real s = std::sqrt(tr + 1) * 2;
        q = {s / 4, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s};
    } else if (m00 >= m11 && m00 >= m22) {
        const real s = std::sqrt(1 + m00 - m11 - m22) * 2;
        q = {(m21 - m12) / s, s / 4, (m01 + m10) / s, (m02 + m20) / s};
    } else if (m11 >= m22) {
        const real s = std::sqrt(1 + m11 - m00 - m22) * 2;
        q = {(m02 - m20) / s, (m01 + m10) / s, s / 4, (m12 + m21) / s};
    } else {
        const real s = std::sqrt(1 + m22 - m00 - m11) * 2;
        q = {(m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, s / 4};
    }
    return quat_canonical(quat_normalize(q));
}

Vec3 Pose::apply(const Vec3& p) const { return s * quat_rotate(q, p) + t; }

Pose Pose::inverse() const {
    SG_CHECK(s > 0, "Pose::inverse: non-positive scale");
    Pose inv;
    inv.q = quat_conjugate(q);
    inv.s = 1 / s;
    inv.t = real(-1) * (inv.s * quat_rotate(inv.q, t));
    return inv;
}

Pose Pose::compose(const Pose& b) const {
    Pose out;
    out.q = quat_normalize(quat_mul(q, b.q));
    out.s = s * b.s;
    out.t = s * quat_rotate(q, b.t) + t;
    return out;
}

std::array<real, 8> Pose::to8() const {
    return {t[0], t[1], t[2], q[0], q[1], q[2], q[3], s};
}

Pose Pose::from8(const std::array<real, 8>& v) {
    Pose p;
    p.t = {v[0], v[1], v[2]};
    p.q = quat_normalize({v[3], v[4], v[5], v[6]});
    p.s = v[7];
    SG_CHECK(p.s > 0, "Pose::from8: scale must be positive");
    return p;
}

PoseError pose_error(const Pose& a, const Pose& b) {
    PoseError e;
    e.translation = vnorm(a.t - b.t);
    e.rotation_rad = quat_angle_between(quat_normalize(a.q), quat_normalize(b.q));
    e.log_scale = std::abs(std::log(a.s / b.s));
    return e;
}

}  // namespace scenegen
