#include "scenegen/synth/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace scenegen {

namespace {

// Lowest point of the canonical surface, used to rest assets on the z=0 plane.
real canonical_zmin(const Asset& a) {
    real zmin = std::numeric_limits<real>::max();
    for (const auto& p : a.surface.pts) zmin = std::min(zmin, p[2]);
    return zmin;
}

Pose sample_pose(const Asset& a, Rng& rng, const SynthConfig& cfg) {
    Pose p;
    p.s = rng.uniform(cfg.min_scale, cfg.max_scale);
    p.q = quat_from_axis_angle({0, 0, 1}, rng.uniform(0, 2 * real(M_PI)));
    p.t = {rng.uniform(-cfg.placement_range, cfg.placement_range),
           rng.uniform(-cfg.placement_range, cfg.placement_range), -p.s * canonical_zmin(a)};
    return p;
}

real min_cloud_distance(const PointCloud& a, const PointCloud& b) {
    real best = std::numeric_limits<real>::max();
    for (const auto& pa : a.pts)
        for (const auto& pb : b.pts) best = std::min(best, vnorm(pa - pb));
    return best;
}

// True when any sample of `cloud` lies inside the solid of the posed asset.
bool penetrates(const PointCloud& cloud, const Asset& other, const Pose& other_pose) {
    const Pose inv = other_pose.inverse();
    for (const auto& p : cloud.pts)
        if (shape_contains(other.kind, other.params, inv.apply(p))) return true;
    return false;
}

}  // namespace

PointCloud SceneSample::scene_cloud(size_t per_asset_max) const {
    PointCloud out;
    for (size_t i = 0; i < assets.size(); ++i) {
        PointCloud c = assets[i].surface;
        if (per_asset_max > 0) c = c.subsampled(per_asset_max, scene_id * 977 + i);
        for (const auto& p : c.pts) out.pts.push_back(poses[i].apply(p));
    }
    return out;
}

real scene_collision_iou(const std::vector<Asset>& assets, const std::vector<Pose>& poses,
                         int res) {
    SG_CHECK(assets.size() == poses.size(), "scene_collision_iou: asset/pose count mismatch");
    std::vector<PointCloud> clouds;
    PointCloud all;
    for (size_t i = 0; i < assets.size(); ++i) {
        clouds.push_back(assets[i].surface.transformed(poses[i]));
        all.pts.insert(all.pts.end(), clouds.back().pts.begin(), clouds.back().pts.end());
    }
    if (all.empty()) return 0;
    Vec3 lo, hi;
    all.bounds(lo, hi);
    for (int k = 0; k < 3; ++k) {  // guard against flat scenes
        if (hi[k] - lo[k] < real(1e-6)) hi[k] = lo[k] + real(1e-6);
    }
    return collision_iou(stack_presence(clouds, res, lo, hi));
}

real scene_bbox_diameter(const SceneSample& s) {
    const PointCloud cloud = s.scene_cloud();
    SG_CHECK(!cloud.empty(), "scene_bbox_diameter: empty scene");
    Vec3 lo, hi;
    cloud.bounds(lo, hi);
    return vnorm(hi - lo);
}

SceneSample generate_scene(uint64_t seed, int n_assets, const SynthConfig& cfg) {
    SG_CHECK(n_assets >= 1 && n_assets <= cfg.max_assets,
             "generate_scene: asset count out of range");
    Rng rng(seed);
    SceneSample s;
    s.scene_id = seed;
    for (int i = 0; i < n_assets; ++i) {
        const auto kind = static_cast<ShapeKind>(rng.uniform_int(0, kNumShapeKinds - 1));
        s.assets.push_back(build_asset(kind, rng, cfg.occ_res(), cfg.lat_res, cfg.surface_samples));
    }

    // Sequential placement with a clearance check against every placed asset,
    // then an authoritative scene-level voxel overlap check in the stored
    // (query-relative) frame. A failed placement restarts the whole layout;
    // the total try budget bounds the search.
    int tries = 0;
    std::vector<PointCloud> placed;  // subsampled, posed clouds for quick checks
    while (true) {
        s.poses.clear();
        placed.clear();
        bool layout_ok = true;
        for (int i = 0; i < n_assets && layout_ok; ++i) {
            const PointCloud sub = s.assets[i].surface.subsampled(512, seed * 31 + i);
            bool placed_ok = false;
            for (int attempt = 0; attempt < 150; ++attempt) {
                if (++tries > cfg.max_layout_tries)
                    throw GenerationError("generate_scene: layout try budget exhausted");
                const Pose cand = sample_pose(s.assets[i], rng, cfg);
                const PointCloud posed = sub.transformed(cand);
                bool ok = true;
                for (int j = 0; j < i && ok; ++j) {
                    ok = min_cloud_distance(posed, placed[j]) >= cfg.min_gap &&
                         !penetrates(posed, s.assets[j], s.poses[j]) &&
                         !penetrates(placed[j], s.assets[i], cand);
                }
                if (ok) {
                    s.poses.push_back(cand);
                    placed.push_back(posed);
                    placed_ok = true;
                    break;
                }
            }
            layout_ok = placed_ok;
        }
        if (!layout_ok) continue;
        const std::vector<Pose> rel = poses_relative_to(s.poses, 0);
        if (scene_collision_iou(s.assets, rel, cfg.collision_res) == 0) {
            s.poses = rel;
            break;
        }
    }

    s.d_scene = scene_bbox_diameter(s);
    SG_CHECK(s.d_scene > 0, "generate_scene: degenerate scene diameter");

    render_views(s, cfg.views, cfg.view_size);
    return s;
}

std::vector<Pose> poses_relative_to(const std::vector<Pose>& poses, int query) {
    SG_CHECK(query >= 0 && query < static_cast<int>(poses.size()),
             "poses_relative_to: query index out of range");
    const Pose inv = poses[query].inverse();
    std::vector<Pose> out;
    out.reserve(poses.size());
    for (const auto& p : poses) out.push_back(inv.compose(p));
    // Snap the query pose to an exact identity; composition leaves rounding dust.
    out[query] = Pose::identity();
    return out;
}

std::vector<SceneSample> augment_query_rotation(const SceneSample& s, Rng& rng) {
    const int n = s.num_assets();
    SG_CHECK(n >= 1, "augment_query_rotation: empty scene");
    std::vector<SceneSample> out;
    out.reserve(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        // New slot order: chosen query first, the rest randomly permuted.
        std::vector<int> order{j};
        for (int i = 0; i < n; ++i)
            if (i != j) order.push_back(i);
        for (int i = n - 1; i > 1; --i)
            std::swap(order[i], order[1 + static_cast<int>(rng.uniform_int(0, i - 1))]);

        SceneSample a;
        a.scene_id = s.scene_id;
        std::vector<Pose> perm;
        for (int i : order) {
            a.assets.push_back(s.assets[i]);
            perm.push_back(s.poses[i]);
        }
        a.poses = poses_relative_to(perm, 0);
        a.views = s.views;  // observations are frame-independent; only masks reorder
        for (size_t v = 0; v < a.views.size(); ++v) {
            for (int slot = 0; slot < n; ++slot)
                a.views[v].masks[slot] = s.views[v].masks[order[slot]];
        }
        a.d_scene = scene_bbox_diameter(a);
        out.push_back(std::move(a));
    }
    return out;
}

void render_views(SceneSample& s, int views, int size) {
    SG_CHECK(views >= 1 && size >= 8, "render_views: bad view configuration");
    s.views.clear();
    const int n = s.num_assets();

    // Posed clouds once; each view just rotates them.
    std::vector<PointCloud> posed(n);
    for (int i = 0; i < n; ++i) posed[i] = s.assets[i].surface.transformed(s.poses[i]);

    for (int v = 0; v < views; ++v) {
        SceneView view;
        view.azimuth = 2 * real(M_PI) * v / views;
        view.size = size;
        const real ca = std::cos(view.azimuth), sa = std::sin(view.azimuth);

        // Orthographic camera looking along the rotated +x axis; the image
        // plane carries (y', z). First pass finds the view-space bounds.
        real umin = std::numeric_limits<real>::max(), umax = -umin;
        real vmin = umin, vmax = -umin, dmin = umin, dmax = -umin;
        auto to_view = [&](const Vec3& p) {
            return Vec3{ca * p[0] + sa * p[1], -sa * p[0] + ca * p[1], p[2]};
        };
        for (const auto& cloud : posed)
            for (const auto& p : cloud.pts) {
                const Vec3 q = to_view(p);
                dmin = std::min(dmin, q[0]);
                dmax = std::max(dmax, q[0]);
                umin = std::min(umin, q[1]);
                umax = std::max(umax, q[1]);
                vmin = std::min(vmin, q[2]);
                vmax = std::max(vmax, q[2]);
            }
        const real span = std::max({umax - umin, vmax - vmin, real(1e-6)}) * real(1.05);
        const real ucen = (umin + umax) / 2, vcen = (vmin + vmax) / 2;
        const real dspan = std::max(dmax - dmin, real(1e-6));

        std::vector<real> depth(static_cast<size_t>(size) * size,
                                -std::numeric_limits<real>::max());
        std::vector<int> winner(static_cast<size_t>(size) * size, -1);
        for (int i = 0; i < n; ++i)
            for (const auto& p : posed[i].pts) {
                const Vec3 q = to_view(p);
                const int px = std::clamp(
                    static_cast<int>(((q[1] - ucen) / span + real(0.5)) * size), 0, size - 1);
                const int py = std::clamp(
                    static_cast<int>(((q[2] - vcen) / span + real(0.5)) * size), 0, size - 1);
                const size_t at = static_cast<size_t>(py) * size + px;
                if (q[0] > depth[at]) {
                    depth[at] = q[0];
                    winner[at] = i;
                }
            }

        view.image.assign(static_cast<size_t>(2) * size * size, 0);
        view.masks.assign(n, std::vector<real>(static_cast<size_t>(size) * size, 0));
        for (size_t px = 0; px < depth.size(); ++px) {
            if (winner[px] < 0) continue;
            view.image[px] = 1;  // silhouette channel
            view.image[depth.size() + px] = (depth[px] - dmin) / dspan;
            view.masks[winner[px]][px] = 1;
        }
        s.views.push_back(std::move(view));
    }
}

}  // namespace scenegen
