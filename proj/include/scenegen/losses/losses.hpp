#pragma once

#include "scenegen/model/heads.hpp"
#include "scenegen/synth/assets.hpp"

namespace scenegen {

struct LossWeights {
    real mu_t = 1, mu_q = 1, mu_s = 1;  // pose-term weights
    real delta_p = real(0.02);          // pose Huber threshold
    real delta_c = real(0.05);          // collision Huber threshold
};

// Per-batch record; total == cfm + lambda*(pos + coll) holds to 1e-9.
struct LossBreakdown {
    real cfm = 0, pos = 0, coll = 0, lambda = 1, total = 0;
};

// Flow-matching regression: (1/N) Σ_i mean ‖v̂_i − (ε_i − x⁰_i)‖².
Tensor cfm_loss(const std::vector<Tensor>& v_hat, const std::vector<Tensor>& x0,
                const std::vector<Tensor>& eps);

// Pose supervision over the non-query assets; pose_raw rows map 1:1 onto gt.
// The translation residual is normalized by the scene diameter, the target
// quaternion sign is chosen to minimize the residual (q and -q are one
// rotation), and each term is a summed Huber with threshold delta_p.
Tensor position_loss(const Tensor& pose_raw, const std::vector<Pose>& gt, real d_scene,
                     const LossWeights& w = {});

// Hard scene-overlap penalty on posed clouds (evaluation path): voxel cells
// touched by >1 asset over cells touched by >=1, wrapped in Huber delta_c.
real collision_loss_hard(const std::vector<PointCloud>& clouds, int grid_res = 64,
                         real delta_c = real(0.05));

// Differentiable asset occupancy: sub-cell centers of the active latent cells
// pushed through the pose, each weighted by a tempered sigmoid of its
// occupancy logit. Gradients flow into both the pose and the logits.
struct SoftOccupancy {
    Tensor points;   // [n*8, 3] world-space sub-cell centers
    Tensor weights;  // [n*8, 1] occupancy probabilities
};
SoftOccupancy soft_asset_occupancy(const AssetLatent& lat, const Tensor& logits,
                                   const PoseGraph& pose, real temp = 1);

// Soft scene-overlap penalty (training path): expected multi-asset cell mass
// over expected occupied cell mass on a grid spanning lo..hi, Huber-wrapped.
// Matches the hard count in the sharp-sigmoid limit on separated scenes.
Tensor collision_loss_soft(const std::vector<SoftOccupancy>& assets, const Vec3& lo,
                           const Vec3& hi, int grid_res = 64, real delta_c = real(0.05));

// Pose/collision weight per epoch: max(0.2, 0.99^epoch).
real lambda_schedule(int64_t epoch);

// Assembles the breakdown; lambda outside [0.2, 1] is clamped with a warning.
LossBreakdown combine(real cfm, real pos, real coll, real lambda);

}  // namespace scenegen
