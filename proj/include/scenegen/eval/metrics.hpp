#pragma once

#include "scenegen/eval/registration.hpp"
#include "scenegen/sample/sampler.hpp"

namespace scenegen {

struct EvalConfig {
    std::string registration = "filterreg";  // or "icp"
    real tau = real(0.1);                    // F-score threshold, normalized units
    int eval_points = 4096;                  // per-asset cloud cap for metrics
    int reg_points = 512;                    // cloud cap for registration
    real sigma_init = real(0.2);
    int max_iters = 40;
    real tol = real(1e-7);
    int collision_res = 64;
    bool multi_start = true;  // octahedral restarts for the query alignment

    nlohmann::json to_json() const;
};

// Minimal scored form of a scene: canonical per-asset clouds plus placements.
struct EvalScene {
    std::vector<PointCloud> clouds;
    std::vector<Pose> poses;

    int num_assets() const { return static_cast<int>(clouds.size()); }
};

// Ground truth scores its analytic surface samples; generated scenes score
// their decoded shell-cell centers.
EvalScene eval_view(const SceneSample& s);
EvalScene eval_view(const SampledScene& s);

// Score assigned to an asset whose predicted cloud came out empty: the largest
// Chamfer value attainable inside the normalized unit ball.
constexpr real kWorstChamfer = 4;

struct MetricReport {
    real cd_s = 0;
    real fscore_s = 0;
    std::vector<real> cd_o;
    std::vector<real> fscore_o;
    std::vector<real> iou_b;
    real collision_iou = 0;  // fraction of occupied cells shared by >= 2 assets
    real runtime_sec = 0;

    real cd_o_mean() const;
    real fscore_o_mean() const;
    real iou_b_mean() const;
    nlohmann::json to_json() const;
};

// Symmetric Chamfer distance: mean_a min_b ||a-b|| + mean_b min_a ||b-a||
// (unsquared, sum of the two directed means). Both clouds must be non-empty.
real chamfer(const PointCloud& a, const PointCloud& b);

// 100 x harmonic mean of precision (fraction of a within tau of b) and recall
// (the converse). Symmetric in its cloud arguments.
real fscore(const PointCloud& a, const PointCloud& b, real tau);

// Appendix-style geometric protocol: normalize both scenes (centroid to the
// origin, largest centroid distance to 1), rigidly register the predicted
// query asset onto the ground-truth query, carry that transform onto the whole
// predicted scene, then score scene-level and per-asset Chamfer / F-score,
// per-asset bounding-box IoU in the ground-truth frame, and the hard collision
// rate of the predicted scene. Empty predicted assets score worst case; an
// unregistrable query falls back to the identity alignment.
MetricReport evaluate_scene(const EvalScene& pred, const EvalScene& gt, const EvalConfig& cfg);

}  // namespace scenegen
