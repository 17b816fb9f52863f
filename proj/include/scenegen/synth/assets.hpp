#pragma once

#include <array>
#include <vector>

#include "scenegen/geomath/voxelgrid.hpp"
#include "scenegen/numerics/rng.hpp"

namespace scenegen {

// Feature channels per active latent cell: one sign per 2^3 sub-cell, +1 when
// the sub-cell is a surface voxel of the canonical shape, -1 otherwise.
constexpr int kLatentFeatDim = 8;

enum class ShapeKind : uint8_t { Box = 0, Sphere = 1, Cylinder = 2, LShape = 3, Table = 4 };
constexpr int kNumShapeKinds = 5;
const char* shape_kind_name(ShapeKind k);

// Sparse latent: active cells of a cubic grid plus per-cell feature vectors.
struct AssetLatent {
    int res = 0;
    std::vector<std::array<int, 3>> coords;  // lexicographically sorted
    std::vector<real> feats;                 // [coords.size(), kLatentFeatDim]

    int size() const { return static_cast<int>(coords.size()); }
};

// One canonical object in its own frame (roughly filling [-1,1]^3).
struct Asset {
    ShapeKind kind = ShapeKind::Box;
    std::vector<real> params;
    AssetLatent latent;
    PointCloud surface;  // samples on the analytic surface
};

// True when p lies inside the solid shape described by (kind, params).
bool shape_contains(ShapeKind kind, const std::vector<real>& params, const Vec3& p);

std::vector<real> sample_shape_params(ShapeKind kind, Rng& rng);
PointCloud sample_shape_surface(ShapeKind kind, const std::vector<real>& params, int n, Rng& rng);

// Dense solid occupancy over [-1,1]^3 at the given resolution.
VoxelGrid shape_occupancy(ShapeKind kind, const std::vector<real>& params, int res);

// Latent extraction: surface shell at 2*lat_res, active cells at lat_res are
// the cells whose 2^3 children intersect the shell, features are the sub-cell
// sign code described above.
AssetLatent extract_latent(const VoxelGrid& shell, int lat_res);

// Inverse of the feature code: per active cell, sub-cells with positive sign
// become occupied voxels of a (2*res) shell grid.
VoxelGrid latent_to_shell(const AssetLatent& lat, const std::vector<real>& feats_override = {});

// Builds the full asset: occupancy, shell, latent and surface samples.
Asset build_asset(ShapeKind kind, Rng& rng, int occ_res, int lat_res, int surface_samples);

}  // namespace scenegen
