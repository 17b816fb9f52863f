#include "scenegen/geomath/voxelgrid.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

namespace scenegen {

namespace {
constexpr char kMagic[4] = {'S', 'G', 'V', 'X'};

int cell_of(real x, real lo, real hi, int res) {
    const real f = (x - lo) / (hi - lo);
    int c = static_cast<int>(f * res);
    return std::clamp(c, 0, res - 1);
}
}  // namespace

int64_t VoxelGrid::count() const {
    int64_t n = 0;
    for (uint8_t b : v) n += b != 0;
    return n;
}

VoxelGrid surface_shell(const VoxelGrid& solid) {
    VoxelGrid out(solid.res);
    const int r = solid.res;
    static constexpr int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0},
                                      {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j)
            for (int k = 0; k < r; ++k) {
                if (!solid.get(i, j, k)) continue;
                bool shell = false;
                for (const auto& d : off) {
                    const int ii = i + d[0], jj = j + d[1], kk = k + d[2];
                    if (!solid.in_range(ii, jj, kk) || !solid.get(ii, jj, kk)) {
                        shell = true;
                        break;
                    }
                }
                if (shell) out.set(i, j, k, true);
            }
    return out;
}

VoxelGrid downsample2(const VoxelGrid& g) {
    SG_CHECK(g.res % 2 == 0, "downsample2: resolution must be even");
    VoxelGrid out(g.res / 2);
    for (int i = 0; i < g.res; ++i)
        for (int j = 0; j < g.res; ++j)
            for (int k = 0; k < g.res; ++k)
                if (g.get(i, j, k)) out.set(i / 2, j / 2, k / 2, true);
    return out;
}

PointCloud occupied_centers(const VoxelGrid& g, const Vec3& lo, const Vec3& hi) {
    PointCloud out;
    const real r = static_cast<real>(g.res);
    for (int i = 0; i < g.res; ++i)
        for (int j = 0; j < g.res; ++j)
            for (int k = 0; k < g.res; ++k) {
                if (!g.get(i, j, k)) continue;
                const Vec3 f{(i + real(0.5)) / r, (j + real(0.5)) / r, (k + real(0.5)) / r};
                out.pts.push_back({lo[0] + f[0] * (hi[0] - lo[0]), lo[1] + f[1] * (hi[1] - lo[1]),
                                   lo[2] + f[2] * (hi[2] - lo[2])});
            }
    return out;
}

VoxelGrid voxelize_points(const PointCloud& cloud, int res, const Vec3& lo, const Vec3& hi) {
    SG_CHECK(res > 0, "voxelize_points: resolution must be positive");
    for (int k = 0; k < 3; ++k) SG_CHECK(hi[k] > lo[k], "voxelize_points: degenerate bounds");
    VoxelGrid out(res);
    for (const auto& p : cloud.pts)
        out.set(cell_of(p[0], lo[0], hi[0], res), cell_of(p[1], lo[1], hi[1], res),
                cell_of(p[2], lo[2], hi[2], res), true);
    return out;
}

CountGrid stack_presence(const std::vector<PointCloud>& clouds, int res, const Vec3& lo,
                         const Vec3& hi) {
    CountGrid out;
    out.res = res;
    out.count.assign(static_cast<size_t>(res) * res * res, 0);
    for (const auto& c : clouds) {
        const VoxelGrid g = voxelize_points(c, res, lo, hi);
        for (size_t i = 0; i < g.v.size(); ++i)
            if (g.v[i]) ++out.count[i];
    }
    return out;
}

real collision_iou(const CountGrid& g) {
    int64_t touched = 0, shared = 0;
    for (uint16_t c : g.count) {
        touched += c >= 1;
        shared += c >= 2;
    }
    return touched > 0 ? static_cast<real>(shared) / static_cast<real>(touched) : real(0);
}

real voxel_iou(const VoxelGrid& a, const VoxelGrid& b) {
    SG_CHECK(a.res == b.res, "voxel_iou: resolution mismatch");
    int64_t inter = 0, uni = 0;
    for (size_t i = 0; i < a.v.size(); ++i) {
        const bool va = a.v[i] != 0, vb = b.v[i] != 0;
        inter += va && vb;
        uni += va || vb;
    }
    return uni > 0 ? static_cast<real>(inter) / static_cast<real>(uni) : real(1);
}

void save_voxels_rle(const std::string& path, const VoxelGrid& g) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("voxels: cannot open for write: " + path);
    os.write(kMagic, 4);
    const uint32_t res = static_cast<uint32_t>(g.res);
    os.write(reinterpret_cast<const char*>(&res), sizeof(res));
    size_t i = 0;
    while (i < g.v.size()) {
        const uint8_t val = g.v[i];
        size_t j = i;
        while (j < g.v.size() && g.v[j] == val) ++j;
        const uint32_t run = static_cast<uint32_t>(j - i);
        os.write(reinterpret_cast<const char*>(&val), 1);
        os.write(reinterpret_cast<const char*>(&run), sizeof(run));
        i = j;
    }
    if (!os) throw FormatError("voxels: write failed: " + path);
}

VoxelGrid load_voxels_rle(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("voxels: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("voxels: bad magic in " + path);
    uint32_t res = 0;
    is.read(reinterpret_cast<char*>(&res), sizeof(res));
    if (!is || res == 0) throw FormatError("voxels: bad resolution in " + path);
    VoxelGrid g(static_cast<int>(res));
    size_t i = 0;
    while (i < g.v.size()) {
        uint8_t val = 0;
        uint32_t run = 0;
        is.read(reinterpret_cast<char*>(&val), 1);
        is.read(reinterpret_cast<char*>(&run), sizeof(run));
        if (!is || i + run > g.v.size()) throw FormatError("voxels: corrupt run data in " + path);
        std::fill(g.v.begin() + i, g.v.begin() + i + run, val);
        i += run;
    }
    return g;
}

}  // namespace scenegen
