#include "scenegen/eval/kdtree.hpp"

#include <algorithm>
#include <numeric>

namespace scenegen {

KdTree3::KdTree3(const PointCloud& cloud) : pts_(cloud.pts) {
    SG_CHECK(!pts_.empty(), "KdTree3: empty cloud");
    order_.resize(pts_.size());
    std::iota(order_.begin(), order_.end(), 0);
    nodes_.reserve(2 * pts_.size() / kLeafSize + 2);
    root_ = build(0, static_cast<int>(pts_.size()));
}

int KdTree3::build(int begin, int end) {
    Node node;
    if (end - begin <= kLeafSize) {
        node.begin = begin;
        node.end = end;
        nodes_.push_back(node);
        return static_cast<int>(nodes_.size()) - 1;
    }

    Vec3 lo = pts_[static_cast<size_t>(order_[static_cast<size_t>(begin)])];
    Vec3 hi = lo;
    for (int i = begin + 1; i < end; ++i) {
        const Vec3& p = pts_[static_cast<size_t>(order_[static_cast<size_t>(i)])];
        for (int a = 0; a < 3; ++a) {
            lo[static_cast<size_t>(a)] = std::min(lo[static_cast<size_t>(a)], p[static_cast<size_t>(a)]);
            hi[static_cast<size_t>(a)] = std::max(hi[static_cast<size_t>(a)], p[static_cast<size_t>(a)]);
        }
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a)
        if (hi[static_cast<size_t>(a)] - lo[static_cast<size_t>(a)] >
            hi[static_cast<size_t>(axis)] - lo[static_cast<size_t>(axis)])
            axis = a;

    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                         return pts_[static_cast<size_t>(a)][static_cast<size_t>(axis)] <
                                pts_[static_cast<size_t>(b)][static_cast<size_t>(axis)];
                     });
    node.axis = axis;
    node.split = pts_[static_cast<size_t>(order_[static_cast<size_t>(mid)])][static_cast<size_t>(axis)];

    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back(node);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[static_cast<size_t>(self)].left = left;
    nodes_[static_cast<size_t>(self)].right = right;
    return self;
}

void KdTree3::search(int node_id, const Vec3& q, int& best, real& best_d2) const {
    const Node& node = nodes_[static_cast<size_t>(node_id)];
    if (node.axis < 0) {
        for (int i = node.begin; i < node.end; ++i) {
            const int idx = order_[static_cast<size_t>(i)];
            const real d2 = squared_distance(q, pts_[static_cast<size_t>(idx)]);
            if (d2 < best_d2) {
                best_d2 = d2;
                best = idx;
            }
        }
        return;
    }
    const real delta = q[static_cast<size_t>(node.axis)] - node.split;
    const int near = delta < 0 ? node.left : node.right;
    const int far = delta < 0 ? node.right : node.left;
    search(near, q, best, best_d2);
    if (delta * delta < best_d2) search(far, q, best, best_d2);
}

std::pair<int, real> KdTree3::nearest(const Vec3& query) const {
    int best = -1;
    real best_d2 = std::numeric_limits<real>::infinity();
    search(root_, query, best, best_d2);
    return {best, best_d2};
}

}  // namespace scenegen
