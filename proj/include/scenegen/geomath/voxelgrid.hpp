#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scenegen/geomath/pointcloud.hpp"

namespace scenegen {

// Dense cubic binary grid, x-major layout: index = (i*res + j)*res + k.
struct VoxelGrid {
    int res = 0;
    std::vector<uint8_t> v;

    VoxelGrid() = default;
    explicit VoxelGrid(int r) : res(r), v(static_cast<size_t>(r) * r * r, 0) {}

    size_t index(int i, int j, int k) const {
        return (static_cast<size_t>(i) * res + j) * res + k;
    }
    bool get(int i, int j, int k) const { return v[index(i, j, k)] != 0; }
    void set(int i, int j, int k, bool on) { v[index(i, j, k)] = on ? 1 : 0; }
    bool in_range(int i, int j, int k) const {
        return i >= 0 && j >= 0 && k >= 0 && i < res && j < res && k < res;
    }
    int64_t count() const;
};

// Occupied cells with at least one empty 6-neighbour (grid border counts as empty).
VoxelGrid surface_shell(const VoxelGrid& solid);

// Half-resolution grid; a coarse cell is occupied when any of its 2^3 children is.
VoxelGrid downsample2(const VoxelGrid& g);

// Centers of occupied cells mapped into the axis-aligned box [lo, hi].
PointCloud occupied_centers(const VoxelGrid& g, const Vec3& lo, const Vec3& hi);

// Marks cells containing at least one point; points outside [lo, hi] are clamped
// into the boundary cells so every point contributes.
VoxelGrid voxelize_points(const PointCloud& cloud, int res, const Vec3& lo, const Vec3& hi);

// Per-cell count of how many clouds touch the cell (each cloud counted once).
struct CountGrid {
    int res = 0;
    std::vector<uint16_t> count;
};
CountGrid stack_presence(const std::vector<PointCloud>& clouds, int res, const Vec3& lo,
                         const Vec3& hi);

// Fraction of touched cells that are touched by two or more clouds.
real collision_iou(const CountGrid& g);

// |A∩B| / |A∪B| over occupied cells; 1 when both grids are empty.
real voxel_iou(const VoxelGrid& a, const VoxelGrid& b);

// Run-length-encoded binary file: magic, resolution, (value, run) pairs.
void save_voxels_rle(const std::string& path, const VoxelGrid& g);
VoxelGrid load_voxels_rle(const std::string& path);

}  // namespace scenegen
