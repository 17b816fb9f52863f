#include "scenegen/geomath/pointcloud.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "scenegen/numerics/rng.hpp"

namespace scenegen {

Vec3 PointCloud::centroid() const {
    SG_CHECK(!pts.empty(), "centroid: empty point cloud");
    Vec3 c{0, 0, 0};
    for (const auto& p : pts) c = c + p;
    return (real(1) / static_cast<real>(pts.size())) * c;
}

void PointCloud::bounds(Vec3& lo, Vec3& hi) const {
    SG_CHECK(!pts.empty(), "bounds: empty point cloud");
    lo = hi = pts[0];
    for (const auto& p : pts)
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
}

real PointCloud::diameter() const {
    SG_CHECK(!pts.empty(), "diameter: empty point cloud");
    real best = 0;
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j)
            best = std::max(best, vnorm(pts[i] - pts[j]));
    return best;
}

PointCloud PointCloud::transformed(const Pose& pose) const {
    PointCloud out;
    out.pts.reserve(pts.size());
    for (const auto& p : pts) out.pts.push_back(pose.apply(p));
    return out;
}

PointCloud PointCloud::subsampled(size_t max_points, uint64_t seed) const {
    if (pts.size() <= max_points) return *this;
    std::vector<size_t> idx(pts.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    Rng rng(seed);
    PointCloud out;
    out.pts.reserve(max_points);
    for (size_t i = 0; i < max_points; ++i) {
        const size_t j = i + static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(idx.size() - i - 1)));
        std::swap(idx[i], idx[j]);
        out.pts.push_back(pts[idx[i]]);
    }
    return out;
}

real bbox_iou(const PointCloud& a, const PointCloud& b) {
    if (a.empty() || b.empty()) return 0;
    Vec3 alo, ahi, blo, bhi;
    a.bounds(alo, ahi);
    b.bounds(blo, bhi);
    real inter = 1, va = 1, vb = 1;
    for (int k = 0; k < 3; ++k) {
        inter *= std::max(real(0), std::min(ahi[k], bhi[k]) - std::max(alo[k], blo[k]));
        va *= ahi[k] - alo[k];
        vb *= bhi[k] - blo[k];
    }
    const real uni = va + vb - inter;
    return uni > real(1e-12) ? inter / uni : real(0);
}

void save_ply(const std::string& path, const PointCloud& cloud) {
    std::ofstream os(path);
    if (!os) throw FormatError("ply: cannot open for write: " + path);
    os << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
       << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
    os.precision(9);
    for (const auto& p : cloud.pts) os << p[0] << " " << p[1] << " " << p[2] << "\n";
    if (!os) throw FormatError("ply: write failed: " + path);
}

PointCloud load_ply(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw FormatError("ply: cannot open: " + path);
    std::string line;
    if (!std::getline(is, line) || line != "ply") throw FormatError("ply: bad magic in " + path);

    size_t nverts = 0;
    bool ascii = false, in_vertex = false;
    int ncols = 0, cx = -1, cy = -1, cz = -1;
    while (std::getline(is, line)) {
        std::istringstream ls(line);
        std::string tok;
        ls >> tok;
        if (tok == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = fmt == "ascii";
        } else if (tok == "element") {
            std::string kind;
            ls >> kind;
            in_vertex = kind == "vertex";
            if (in_vertex) ls >> nverts;
        } else if (tok == "property" && in_vertex) {
            std::string type, name;
            ls >> type >> name;
            if (name == "x") cx = ncols;
            if (name == "y") cy = ncols;
            if (name == "z") cz = ncols;
            ++ncols;
        } else if (tok == "end_header") {
            break;
        }
    }
    if (!ascii) throw FormatError("ply: only ascii format is supported: " + path);
    if (cx < 0 || cy < 0 || cz < 0) throw FormatError("ply: missing x/y/z properties: " + path);

    PointCloud cloud;
    cloud.pts.reserve(nverts);
    std::vector<real> cols(ncols);
    for (size_t i = 0; i < nverts; ++i) {
        if (!std::getline(is, line)) throw FormatError("ply: truncated vertex data: " + path);
        std::istringstream ls(line);
        for (int c = 0; c < ncols; ++c)
            if (!(ls >> cols[c])) throw FormatError("ply: malformed vertex line: " + path);
        cloud.pts.push_back({cols[cx], cols[cy], cols[cz]});
    }
    return cloud;
}

}  // namespace scenegen
