#pragma once

#include "scenegen/model/model.hpp"

namespace scenegen {

struct SampleConfig {
    int steps = 25;
    real cfg_weight = real(5);
    uint64_t seed = 0;
    // Multi-view latent fusion: "velocity_mean" integrates the view-averaged
    // guided velocity; "reference_view" integrates the first view's velocity
    // and only fuses the final poses.
    std::string latent_fusion = "velocity_mean";

    nlohmann::json to_json() const;
};

// Classifier-free guidance: v_uncond + w * (v_cond - v_uncond), elementwise.
std::vector<real> cfg_velocity(const std::vector<real>& v_cond,
                               const std::vector<real>& v_uncond, real w);

// One generated asset: the conditioned cell structure with sampled features,
// its decoded shell / cell-center cloud in the canonical frame, and the
// predicted placement relative to the query asset.
struct SampledAsset {
    AssetLatent latent;
    VoxelGrid shell;
    PointCloud cloud;
    Pose pose;

    PointCloud posed() const { return cloud.transformed(pose); }
};

struct SampledScene {
    uint64_t scene_id = 0;
    std::vector<SampledAsset> assets;

    int num_assets() const { return static_cast<int>(assets.size()); }
    // Union of the posed asset clouds.
    PointCloud scene_cloud() const;
};

// Reverse flow from pure noise over the conditioned cell structure of `scene`,
// guided by the listed conditioning views. Euler integration from t=1 to t=0
// in cfg.steps steps; the poses come from one extra conditional pass at t=0
// (query pinned to the identity, per-view poses averaged). Throws
// SamplingError with the step index when the trajectory turns non-finite.
// `init_noise` overrides the seeded per-asset starting noise (one flat
// [cells*feat] vector per asset); equivariance checks use it to keep each
// asset's noise fixed while the asset order changes.
SampledScene sample_scene_multiview(const SceneGenModel& model, const SceneSample& scene,
                                    const std::vector<int>& view_indices,
                                    const SampleConfig& cfg,
                                    const std::vector<std::vector<real>>* init_noise = nullptr);

// Single-view convenience wrapper; bit-identical to the one-view list.
SampledScene sample_scene(const SceneGenModel& model, const SceneSample& scene, int view_index,
                          const SampleConfig& cfg);

// Writes asset_XX.ply (canonical clouds), poses.json ({t, q, s} per asset,
// quaternions scalar-first) and scene.ply (posed union) into dir.
void write_sampled_scene(const std::string& dir, const SampledScene& scene);

// Reads clouds and poses back from a written directory (latents and shells
// are not round-tripped; the result is sufficient for scoring).
SampledScene load_sampled_scene(const std::string& dir);

}  // namespace scenegen
