#pragma once

#include "scenegen/geomath/pointcloud.hpp"

namespace scenegen {

inline real squared_distance(const Vec3& a, const Vec3& b) {
    const real dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

// Static 3-d tree over a fixed point set; median split on the widest axis.
// nearest() is exact, so accelerated metrics match a brute-force scan
// bit-for-bit (both evaluate squared_distance on the winning pair).
class KdTree3 {
public:
    explicit KdTree3(const PointCloud& cloud);

    size_t size() const { return pts_.size(); }

    // Index into the original cloud plus squared distance of the closest point.
    std::pair<int, real> nearest(const Vec3& query) const;

private:
    struct Node {
        int axis = -1;       // -1 marks a leaf
        real split = 0;      // splitting coordinate
        int left = -1, right = -1;
        int begin = 0, end = 0;  // leaf range into order_
    };

    int build(int begin, int end);
    void search(int node, const Vec3& q, int& best, real& best_d2) const;

    std::vector<Vec3> pts_;   // original order
    std::vector<int> order_;  // permutation grouped by leaf
    std::vector<Node> nodes_;
    int root_ = -1;
    static constexpr int kLeafSize = 16;
};

}  // namespace scenegen
