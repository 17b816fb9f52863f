#pragma once

#include <string>
#include <vector>

#include "scenegen/geomath/pose.hpp"

namespace scenegen {

struct PointCloud {
    std::vector<Vec3> pts;

    size_t size() const { return pts.size(); }
    bool empty() const { return pts.empty(); }

    Vec3 centroid() const;
    void bounds(Vec3& lo, Vec3& hi) const;
    // Largest pairwise distance; O(n^2), subsample first for big clouds.
    real diameter() const;

    PointCloud transformed(const Pose& pose) const;
    // Deterministic subsample without replacement (keeps order of selection).
    PointCloud subsampled(size_t max_points, uint64_t seed) const;
};

// Axis-aligned bounding-box intersection over union; 0 when either is empty.
real bbox_iou(const PointCloud& a, const PointCloud& b);

// ASCII PLY with x/y/z float vertex properties.
void save_ply(const std::string& path, const PointCloud& cloud);
PointCloud load_ply(const std::string& path);

}  // namespace scenegen
