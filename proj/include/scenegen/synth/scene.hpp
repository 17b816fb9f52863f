#pragma once

#include "scenegen/synth/assets.hpp"

namespace scenegen {

struct SynthConfig {
    int lat_res = 8;            // active-cell grid resolution per asset
    int surface_samples = 2048; // analytic surface samples per asset
    int view_size = 32;         // rendered image height/width
    int views = 2;              // rendered viewpoints per scene
    int max_assets = 7;         // hard cap on assets per scene
    int collision_res = 64;     // scene-level collision grid resolution
    int max_layout_tries = 1000;
    real min_scale = real(0.15);
    real max_scale = real(0.35);
    real placement_range = real(0.6);  // |t_xy| bound; assets rest on the z=0 plane
    real min_gap = real(0.08);         // minimum surface-to-surface clearance

    int occ_res() const { return 2 * lat_res; }
};

// One orthographic view: a silhouette+depth image of the whole scene plus a
// binary visibility mask per asset (nearest asset wins each pixel).
struct SceneView {
    real azimuth = 0;
    int size = 0;
    std::vector<real> image;               // [2, size, size]
    std::vector<std::vector<real>> masks;  // per asset [size, size]
};

// Poses are stored relative to asset 0 (the query), whose pose is the exact
// identity; d_scene is the diagonal of the scene bounding box in that frame.
struct SceneSample {
    uint64_t scene_id = 0;
    real d_scene = 1;
    std::vector<Asset> assets;
    std::vector<Pose> poses;
    std::vector<SceneView> views;

    int num_assets() const { return static_cast<int>(assets.size()); }
    // Union of the posed asset surfaces; per_asset_max > 0 subsamples each asset.
    PointCloud scene_cloud(size_t per_asset_max = 0) const;
};

// Collision-free layout by rejection sampling; throws GenerationError when the
// try budget is exhausted (callers retry with a new seed).
SceneSample generate_scene(uint64_t seed, int n_assets, const SynthConfig& cfg);

// Scene-level overlap of the posed assets (shared cells / touched cells) on a
// collision grid over the union bounding box.
real scene_collision_iou(const std::vector<Asset>& assets, const std::vector<Pose>& poses,
                         int res);

// Re-expresses all poses relative to asset `query`, whose pose becomes identity.
std::vector<Pose> poses_relative_to(const std::vector<Pose>& poses, int query);

// Query-rotation augmentation: one sample per asset choice of query, the query
// moved to slot 0 with identity pose, the remaining assets randomly permuted,
// poses re-expressed and d_scene recomputed. Views are shared unchanged.
std::vector<SceneSample> augment_query_rotation(const SceneSample& s, Rng& rng);

void render_views(SceneSample& s, int views, int size);

// Diagonal length of the axis-aligned bounding box of the posed scene.
real scene_bbox_diameter(const SceneSample& s);

}  // namespace scenegen
