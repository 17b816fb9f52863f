#include "scenegen/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace scenegen {

Tensor cfm_loss(const std::vector<Tensor>& v_hat, const std::vector<Tensor>& x0,
                const std::vector<Tensor>& eps) {
    const size_t n = v_hat.size();
    SG_CHECK(n > 0 && x0.size() == n && eps.size() == n, "cfm_loss: list length mismatch");
    Tensor total = Tensor::scalar(0);
    for (size_t i = 0; i < n; ++i) {
        SG_CHECK_SHAPE(v_hat[i].shape() == x0[i].shape() && x0[i].shape() == eps[i].shape(),
                       "cfm_loss: per-asset shape mismatch");
        const Tensor diff = sub(v_hat[i], sub(eps[i], x0[i]));
        total = add(total, mean(mul(diff, diff)));
    }
    return mul_const(total, real(1) / static_cast<real>(n));
}

Tensor position_loss(const Tensor& pose_raw, const std::vector<Pose>& gt, real d_scene,
                     const LossWeights& w) {
    SG_CHECK(d_scene > 0, "position_loss: d_scene must be positive");
    if (gt.empty()) return Tensor::scalar(0);
    SG_CHECK_SHAPE(pose_raw.defined() && pose_raw.ndim() == 2 && pose_raw.dim(1) == 8 &&
                       pose_raw.dim(0) == static_cast<int>(gt.size()),
                   "position_loss: raw pose rows must match gt count");
    Tensor total = Tensor::scalar(0);
    for (size_t i = 0; i < gt.size(); ++i) {
        const PoseGraph g = pose_graph_from_raw(slice_rows(pose_raw, static_cast<int>(i), 1));

        const Tensor t_gt = Tensor::from_data({1, 3}, {gt[i].t[0], gt[i].t[1], gt[i].t[2]});
        const Tensor t_term =
            huber_sum(mul_const(sub(g.t, t_gt), real(1) / d_scene), w.delta_p);

        // Pick the target sign before differentiating; the choice is a
        // discrete decision on values only.
        const Quat& q = gt[i].q;
        real dplus = 0, dminus = 0;
        for (int c = 0; c < 4; ++c) {
            dplus += (g.q.at(c) - q[c]) * (g.q.at(c) - q[c]);
            dminus += (g.q.at(c) + q[c]) * (g.q.at(c) + q[c]);
        }
        const real sign = dplus <= dminus ? real(1) : real(-1);
        const Tensor q_gt = Tensor::from_data(
            {1, 4}, {sign * q[0], sign * q[1], sign * q[2], sign * q[3]});
        const Tensor q_term = huber_sum(sub(g.q, q_gt), w.delta_p);

        const Tensor s_term = huber_sum(add_const(g.s, -gt[i].s), w.delta_p);

        total = add(total, add(add(mul_const(t_term, w.mu_t), mul_const(q_term, w.mu_q)),
                               mul_const(s_term, w.mu_s)));
    }
    return total;
}

namespace {

real huber_scalar(real e, real delta) {
    const real a = std::abs(e);
    return a <= delta ? real(0.5) * e * e / delta : a - real(0.5) * delta;
}

}  // namespace

real collision_loss_hard(const std::vector<PointCloud>& clouds, int grid_res, real delta_c) {
    SG_CHECK(!clouds.empty(), "collision_loss_hard: need at least one cloud");
    PointCloud all;
    for (const auto& c : clouds) all.pts.insert(all.pts.end(), c.pts.begin(), c.pts.end());
    if (all.empty()) return 0;
    Vec3 lo, hi;
    all.bounds(lo, hi);
    for (int k = 0; k < 3; ++k) {
        if (hi[k] - lo[k] < real(1e-6)) hi[k] = lo[k] + real(1e-6);
    }
    return huber_scalar(collision_iou(stack_presence(clouds, grid_res, lo, hi)), delta_c);
}

SoftOccupancy soft_asset_occupancy(const AssetLatent& lat, const Tensor& logits,
                                   const PoseGraph& pose, real temp) {
    const int n = lat.size();
    SG_CHECK(n > 0, "soft_asset_occupancy: empty latent");
    SG_CHECK(temp > 0, "soft_asset_occupancy: temperature must be positive");
    SG_CHECK_SHAPE(logits.ndim() == 2 && logits.dim(0) == n && logits.dim(1) == kLatentFeatDim,
                   "soft_asset_occupancy: logits must be [cells, 8]");
    const int occ = 2 * lat.res;
    std::vector<real> centers;
    centers.reserve(static_cast<size_t>(n) * 8 * 3);
    for (const auto& c : lat.coords)
        for (int b = 0; b < 8; ++b) {
            const int sub[3] = {2 * c[0] + ((b >> 2) & 1), 2 * c[1] + ((b >> 1) & 1),
                                2 * c[2] + (b & 1)};
            for (int a = 0; a < 3; ++a)
                centers.push_back(-1 + (sub[a] + real(0.5)) * 2 / occ);
        }
    const Tensor pts = Tensor::from_data({n * 8, 3}, std::move(centers));

    SoftOccupancy out;
    const Tensor R = quat_to_matrix(pose.q);
    out.points = add_rowvec(scale(matmul(pts, transpose(R)), pose.s), pose.t);
    out.weights = sigmoid(mul_const(reshape(logits, {n * 8, 1}), real(1) / temp));
    return out;
}

Tensor collision_loss_soft(const std::vector<SoftOccupancy>& assets, const Vec3& lo,
                           const Vec3& hi, int grid_res, real delta_c) {
    SG_CHECK(!assets.empty(), "collision_loss_soft: need at least one asset");
    // Normalize world coordinates onto the splat grid's [-1,1] domain.
    std::vector<real> inv_half(3), bias(3);
    for (int k = 0; k < 3; ++k) {
        const real half = std::max((hi[k] - lo[k]) / 2, real(1e-6));
        inv_half[k] = 1 / half;
        bias[k] = -(lo[k] + hi[k]) / 2 / half;
    }
    const Tensor scale_row = Tensor::from_data({3}, inv_half);
    const Tensor bias_row = Tensor::from_data({3}, bias);

    // Per asset: expected cell mass -> presence probability p = 1 - e^{-S}.
    std::vector<Tensor> om;  // 1 - p_i = e^{-S_i}
    om.reserve(assets.size());
    for (const auto& a : assets) {
        const Tensor norm_pts = add_rowvec(mul_rowvec(a.points, scale_row), bias_row);
        const Tensor mass = splat_trilinear(norm_pts, a.weights, grid_res);
        om.push_back(exp(neg(mass)));
    }

    const size_t n = om.size();
    // Leave-one-out products via prefix/suffix sweeps.
    std::vector<Tensor> prefix(n), suffix(n);
    for (size_t i = 0; i < n; ++i) prefix[i] = i == 0 ? om[0] : mul(prefix[i - 1], om[i]);
    for (size_t i = n; i-- > 0;)
        suffix[i] = i + 1 == n ? om[i] : mul(om[i], suffix[i + 1]);

    const Tensor prod_all = prefix[n - 1];
    const Tensor p_any = add_const(neg(prod_all), 1);  // P(cell touched by >=1)

    Tensor exactly_one;  // Σ_i p_i Π_{j≠i}(1 - p_j)
    for (size_t i = 0; i < n; ++i) {
        const Tensor p_i = add_const(neg(om[i]), 1);
        Tensor loo;
        if (n == 1)
            loo = Tensor::full(om[0].shape(), 1);
        else if (i == 0)
            loo = suffix[1];
        else if (i + 1 == n)
            loo = prefix[n - 2];
        else
            loo = mul(prefix[i - 1], suffix[i + 1]);
        const Tensor term = mul(p_i, loo);
        exactly_one = i == 0 ? term : add(exactly_one, term);
    }
    const Tensor p_multi = sub(p_any, exactly_one);  // P(cell touched by >=2)

    const Tensor iou = div(sum(p_multi), add_const(sum(p_any), real(1e-12)));
    return huber_sum(iou, delta_c);
}

real lambda_schedule(int64_t epoch) {
    SG_CHECK(epoch >= 0, "lambda_schedule: negative epoch");
    return std::max(real(0.2), std::pow(real(0.99), static_cast<real>(epoch)));
}

LossBreakdown combine(real cfm, real pos, real coll, real lambda) {
    if (lambda < real(0.2) || lambda > 1) {
        std::cerr << "[losses] lambda " << lambda << " outside [0.2, 1]; clamping\n";
        lambda = std::clamp(lambda, real(0.2), real(1));
    }
    LossBreakdown b;
    b.cfm = cfm;
    b.pos = pos;
    b.coll = coll;
    b.lambda = lambda;
    b.total = cfm + lambda * (pos + coll);
    return b;
}

}  // namespace scenegen
