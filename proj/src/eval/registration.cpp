#include "scenegen/eval/registration.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace scenegen {

namespace {

Eigen::Vector3d to_eigen(const Vec3& v) { return {v[0], v[1], v[2]}; }

// Rejects clouds that cannot pin down a rigid transform: fewer than three
// points, or covariance rank < 2 (all points on one line).
void check_registrable(const PointCloud& c, const char* which) {
    if (c.pts.size() < 3)
        throw RegistrationError(std::string("registration: ") + which +
                                " cloud needs at least 3 points");
    Eigen::Vector3d mu = Eigen::Vector3d::Zero();
    for (const Vec3& p : c.pts) mu += to_eigen(p);
    mu /= static_cast<double>(c.pts.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3& p : c.pts) {
        const Eigen::Vector3d d = to_eigen(p) - mu;
        cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Eigen::Vector3d ev = es.eigenvalues();  // ascending
    if (ev[2] <= 0 || ev[1] <= 1e-12 * ev[2])
        throw RegistrationError(std::string("registration: ") + which +
                                " cloud is degenerate (rank < 2)");
}

// Minimizes sum_i w_i || R x_i + t - y_i ||^2 over rigid (R, t).
void weighted_kabsch(const std::vector<Vec3>& x, const std::vector<Vec3>& y,
                     const std::vector<real>& w, Quat& q_out, Vec3& t_out) {
    double wsum = 0;
    Eigen::Vector3d mx = Eigen::Vector3d::Zero(), my = Eigen::Vector3d::Zero();
    for (size_t i = 0; i < x.size(); ++i) {
        wsum += w[i];
        mx += w[i] * to_eigen(x[i]);
        my += w[i] * to_eigen(y[i]);
    }
    if (wsum <= 1e-300) return;  // everything explained as outliers: keep pose
    mx /= wsum;
    my /= wsum;
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (size_t i = 0; i < x.size(); ++i)
        h += w[i] * (to_eigen(x[i]) - mx) * (to_eigen(y[i]) - my).transpose();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix3d u = svd.matrixU(), v = svd.matrixV();
    Eigen::Vector3d flip(1, 1, (v * u.transpose()).determinant() < 0 ? -1 : 1);
    const Eigen::Matrix3d r = v * flip.asDiagonal() * u.transpose();
    const Eigen::Vector3d t = my - r * mx;
    Mat3 m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m[static_cast<size_t>(3 * i + j)] = r(i, j);
    q_out = quat_from_rotation_matrix(m);
    t_out = {t[0], t[1], t[2]};
}

PointCloud apply_rigid(const PointCloud& c, const Quat& q, const Vec3& t) {
    PointCloud out;
    out.pts.reserve(c.pts.size());
    for (const Vec3& p : c.pts) out.pts.push_back(quat_rotate(q, p) + t);
    return out;
}

real one_sided_mean(const PointCloud& from, const KdTree3& to) {
    real acc = 0;
    for (const Vec3& p : from.pts) acc += std::sqrt(to.nearest(p).second);
    return acc / static_cast<real>(from.pts.size());
}

real symmetric_chamfer(const PointCloud& a, const PointCloud& b) {
    const KdTree3 ta(a), tb(b);
    return one_sided_mean(a, tb) + one_sided_mean(b, ta);
}

}  // namespace

Registration register_icp(const PointCloud& src, const PointCloud& dst, int max_iters,
                          real tol) {
    check_registrable(src, "src");
    check_registrable(dst, "dst");
    const KdTree3 tree(dst);
    const std::vector<real> ones(src.pts.size(), 1);

    Registration reg;
    std::vector<Vec3> targets(src.pts.size());
    real prev = std::numeric_limits<real>::infinity();
    for (int it = 1; it <= max_iters; ++it) {
        real obj = 0;
        for (size_t i = 0; i < src.pts.size(); ++i) {
            const Vec3 p = quat_rotate(reg.q, src.pts[i]) + reg.t;
            const auto [idx, d2] = tree.nearest(p);
            targets[i] = dst.pts[static_cast<size_t>(idx)];
            obj += d2;
        }
        obj /= static_cast<real>(src.pts.size());
        SG_CHECK(obj <= prev + real(1e-12), "icp: objective increased");
        reg.iterations = it;
        reg.objective = obj;
        if (obj <= real(1e-24)) break;  // already exact
        if (std::isfinite(prev) && prev - obj <= tol * std::max(prev, real(1e-30))) break;
        prev = obj;
        weighted_kabsch(src.pts, targets, ones, reg.q, reg.t);
    }
    return reg;
}

Registration register_filterreg(const PointCloud& src, const PointCloud& dst, real sigma_init,
                                int max_iters, real tol) {
    check_registrable(src, "src");
    check_registrable(dst, "dst");
    const real w_out = real(0.1);
    const real u_dens = w_out / 8;  // uniform outlier class over the [-1,1]^3 box
    const size_t n = src.pts.size(), m = dst.pts.size();
    // Anneal the GMM bandwidth down to the 0.01 floor: the final stages give
    // near-hard assignments, which is what pins the translation estimate to
    // the noise floor instead of blurring it across neighbours.
    constexpr int kStages = 6;
    const int per_stage = std::max(5, max_iters / kStages);

    Registration reg;
    std::vector<real> w(n);
    std::vector<Vec3> ybar(n);
    for (int stage = 0; stage < kStages; ++stage) {
        const real sigma = std::max(sigma_init * std::pow(real(0.5), stage), real(0.01));
        const real inv2s2 = 1 / (2 * sigma * sigma);
        const real gauss_norm = (1 - w_out) / static_cast<real>(m) /
                                std::pow(2 * real(M_PI) * sigma * sigma, real(1.5));
        real prev = std::numeric_limits<real>::infinity();
        for (int it = 0; it < per_stage; ++it) {
            real nll = 0;
            for (size_t i = 0; i < n; ++i) {
                const Vec3 p = quat_rotate(reg.q, src.pts[i]) + reg.t;
                real s = 0;
                Vec3 acc{0, 0, 0};
                for (size_t j = 0; j < m; ++j) {
                    const real g =
                        gauss_norm * std::exp(-squared_distance(p, dst.pts[j]) * inv2s2);
                    s += g;
                    acc = acc + g * dst.pts[j];
                }
                const real dens = s + u_dens;
                nll -= std::log(dens);
                w[i] = s / dens;
                ybar[i] = s > 0 ? (1 / s) * acc : p;
            }
            // EM guarantee: with sigma fixed, each M-step cannot raise the NLL.
            SG_CHECK(nll <= prev + real(1e-9) * (1 + std::abs(prev)),
                     "filterreg: EM objective increased within a sigma stage");
            ++reg.iterations;
            reg.objective = nll;
            if (std::isfinite(prev) && prev - nll <= tol * (std::abs(prev) + 1)) break;
            prev = nll;
            weighted_kabsch(src.pts, ybar, w, reg.q, reg.t);
        }
    }
    return reg;
}

const std::vector<Quat>& octahedral_rotations() {
    static const std::vector<Quat> rots = [] {
        std::vector<Quat> out;
        int perm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        for (const auto& p : perm) {
            for (int bits = 0; bits < 8; ++bits) {
                Mat3 mat{};
                for (int row = 0; row < 3; ++row) {
                    const real sign = (bits >> row) & 1 ? real(-1) : real(1);
                    mat[static_cast<size_t>(3 * row + p[row])] = sign;
                }
                // det of a signed permutation: permutation parity times sign product
                const real det = mat[0] * (mat[4] * mat[8] - mat[5] * mat[7]) -
                                 mat[1] * (mat[3] * mat[8] - mat[5] * mat[6]) +
                                 mat[2] * (mat[3] * mat[7] - mat[4] * mat[6]);
                if (det > 0) out.push_back(quat_from_rotation_matrix(mat));
            }
        }
        SG_CHECK(out.size() == 24, "octahedral_rotations: expected 24 elements");
        return out;
    }();
    return rots;
}

Registration register_multistart(const PointCloud& src, const PointCloud& dst,
                                 const std::string& method, real sigma_init, int max_iters,
                                 real tol) {
    SG_CHECK(method == "filterreg" || method == "icp",
             "register_multistart: method must be filterreg or icp");
    Registration best;
    real best_score = std::numeric_limits<real>::infinity();
    for (const Quat& q0 : octahedral_rotations()) {
        const PointCloud rotated = apply_rigid(src, q0, {0, 0, 0});
        const Registration r = method == "icp"
                                   ? register_icp(rotated, dst, max_iters, tol)
                                   : register_filterreg(rotated, dst, sigma_init, max_iters, tol);
        Registration total = r;
        total.q = quat_mul(r.q, q0);
        const real score = symmetric_chamfer(apply_rigid(src, total.q, total.t), dst);
        if (score < best_score) {
            best_score = score;
            best = total;
        }
        if (best_score < real(1e-9)) break;  // exact alignment found, skip remaining starts
    }
    return best;
}

}  // namespace scenegen
