#pragma once

#include "scenegen/eval/kdtree.hpp"

namespace scenegen {

// Rigid alignment result: p -> R(q) p + t, no scale.
struct Registration {
    Quat q{1, 0, 0, 0};
    Vec3 t{0, 0, 0};
    int iterations = 0;
    real objective = 0;  // final mean-square NN distance (ICP) or mixture NLL

    Pose pose() const { return Pose{t, q, 1}; }
};

// Iterative closest point: nearest-neighbour correspondences against dst,
// rigid Kabsch update, repeated until the relative objective change drops
// below tol. The objective (mean squared NN distance) is monotone
// non-increasing and asserted so. Throws RegistrationError when either cloud
// has fewer than 3 points or is collinear (rank < 2).
Registration register_icp(const PointCloud& src, const PointCloud& dst, int max_iters = 60,
                          real tol = real(1e-7));

// Rigid point-to-point filter-based registration: EM over a Gaussian mixture
// centred on the dst points with a uniform outlier class (weight 0.1 over the
// [-1,1]^3 box), M-step = responsibility-weighted Kabsch. sigma anneals by
// halving from sigma_init down to 0.01 across 4 stages; within each stage the
// negative log-likelihood is monotone non-increasing and asserted so.
Registration register_filterreg(const PointCloud& src, const PointCloud& dst,
                                real sigma_init = real(0.2), int max_iters = 60,
                                real tol = real(1e-7));

// The 24 rotations of the octahedral group (all signed axis permutations with
// determinant +1), as unit quaternions.
const std::vector<Quat>& octahedral_rotations();

// Runs the chosen method from every octahedral starting rotation and keeps
// the candidate whose aligned src has the lowest symmetric Chamfer distance
// to dst. method is "filterreg" or "icp".
Registration register_multistart(const PointCloud& src, const PointCloud& dst,
                                 const std::string& method, real sigma_init = real(0.2),
                                 int max_iters = 60, real tol = real(1e-7));

}  // namespace scenegen
