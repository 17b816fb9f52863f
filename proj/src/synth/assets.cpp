#include "scenegen/synth/assets.hpp"

#include <algorithm>
#include <cmath>

namespace scenegen {

namespace {

struct Box3 {
    Vec3 c;  // center
    Vec3 h;  // half extents
};

bool box_contains(const Box3& b, const Vec3& p, real eps = 0) {
    return std::abs(p[0] - b.c[0]) <= b.h[0] + eps && std::abs(p[1] - b.c[1]) <= b.h[1] + eps &&
           std::abs(p[2] - b.c[2]) <= b.h[2] + eps;
}

// Component boxes for the compound shapes.
std::vector<Box3> lshape_boxes(const std::vector<real>& p) {
    const real w = p[0], d = p[1], h = p[2], t = p[3];
    return {{{0, 0, -h + t / 2}, {w, d, t / 2}},      // horizontal slab
            {{-w + t / 2, 0, 0}, {t / 2, d, h}}};     // vertical slab
}

std::vector<Box3> table_boxes(const std::vector<real>& p) {
    const real w = p[0], d = p[1], h = p[2], t = p[3], lw = p[4];
    std::vector<Box3> out;
    out.push_back({{0, 0, h - t / 2}, {w, d, t / 2}});  // top
    for (int sx : {-1, 1})
        for (int sy : {-1, 1})
            out.push_back({{sx * (w - lw), sy * (d - lw), -t / 2}, {lw, lw, h - t / 2}});
    return out;
}

std::vector<Box3> compound_boxes(ShapeKind kind, const std::vector<real>& p) {
    switch (kind) {
        case ShapeKind::Box: return {{{0, 0, 0}, {p[0], p[1], p[2]}}};
        case ShapeKind::LShape: return lshape_boxes(p);
        case ShapeKind::Table: return table_boxes(p);
        default: throw GenerationError("compound_boxes: not a box compound");
    }
}

// Uniform sample on the faces of one box, faces weighted by area; reports the
// sampled face's outward normal when requested.
Vec3 sample_box_surface(const Box3& b, Rng& rng, Vec3* normal = nullptr) {
    const real ax = b.h[1] * b.h[2], ay = b.h[0] * b.h[2], az = b.h[0] * b.h[1];
    const real total = 2 * (ax + ay + az);
    real pick = rng.uniform(0, total);
    int axis;
    if (pick < 2 * ax) {
        axis = 0;
    } else if (pick < 2 * (ax + ay)) {
        axis = 1;
        pick -= 2 * ax;
    } else {
        axis = 2;
        pick -= 2 * (ax + ay);
    }
    const real side = pick < (axis == 0 ? ax : axis == 1 ? ay : az) ? real(1) : real(-1);
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = rng.uniform(-b.h[k], b.h[k]);
    p[axis] = side * b.h[axis];
    if (normal) {
        *normal = {0, 0, 0};
        (*normal)[static_cast<size_t>(axis)] = side;
    }
    return b.c + p;
}

Vec3 sample_compound_surface(const std::vector<Box3>& boxes, Rng& rng) {
    std::vector<real> weight(boxes.size());
    real total = 0;
    for (size_t i = 0; i < boxes.size(); ++i) {
        const auto& h = boxes[i].h;
        weight[i] = 8 * (h[1] * h[2] + h[0] * h[2] + h[0] * h[1]);
        total += weight[i];
    }
    // Rejection: a face point belongs to the union surface only when its
    // outward side is free. Probing just off the face also rejects seams where
    // two components touch face-to-face (those points are interior), which
    // plain strict containment would keep.
    for (int tries = 0; tries < 1000; ++tries) {
        real pick = rng.uniform(0, total);
        size_t bi = 0;
        while (bi + 1 < boxes.size() && pick >= weight[bi]) pick -= weight[bi++];
        Vec3 n;
        const Vec3 p = sample_box_surface(boxes[bi], rng, &n);
        const Vec3 probe = p + real(1e-6) * n;
        bool interior = false;
        for (size_t j = 0; j < boxes.size() && !interior; ++j)
            if (j != bi && box_contains(boxes[j], probe)) interior = true;
        if (!interior) return p;
    }
    throw GenerationError("sample_compound_surface: rejection sampling did not converge");
}

}  // namespace

const char* shape_kind_name(ShapeKind k) {
    switch (k) {
        case ShapeKind::Box: return "box";
        case ShapeKind::Sphere: return "sphere";
        case ShapeKind::Cylinder: return "cylinder";
        case ShapeKind::LShape: return "lshape";
        case ShapeKind::Table: return "table";
    }
    return "unknown";
}

bool shape_contains(ShapeKind kind, const std::vector<real>& params, const Vec3& p) {
    switch (kind) {
        case ShapeKind::Box:
            return std::abs(p[0]) <= params[0] && std::abs(p[1]) <= params[1] &&
                   std::abs(p[2]) <= params[2];
        case ShapeKind::Sphere: {
            const real x = p[0] / params[0], y = p[1] / params[1], z = p[2] / params[2];
            return x * x + y * y + z * z <= 1;
        }
        case ShapeKind::Cylinder: {
            const real x = p[0] / params[0], y = p[1] / params[1];
            return x * x + y * y <= 1 && std::abs(p[2]) <= params[2];
        }
        case ShapeKind::LShape:
        case ShapeKind::Table: {
            for (const auto& b : compound_boxes(kind, params))
                if (box_contains(b, p)) return true;
            return false;
        }
    }
    return false;
}

std::vector<real> sample_shape_params(ShapeKind kind, Rng& rng) {
    auto u = [&rng](real lo, real hi) { return rng.uniform(lo, hi); };
    switch (kind) {
        case ShapeKind::Box: return {u(0.45, 0.95), u(0.45, 0.95), u(0.45, 0.95)};
        case ShapeKind::Sphere: return {u(0.5, 0.95), u(0.5, 0.95), u(0.5, 0.95)};
        case ShapeKind::Cylinder: return {u(0.4, 0.85), u(0.4, 0.85), u(0.5, 0.95)};
        case ShapeKind::LShape: return {u(0.55, 0.9), u(0.55, 0.9), u(0.55, 0.9), u(0.35, 0.55)};
        case ShapeKind::Table:
            return {u(0.55, 0.9), u(0.55, 0.9), u(0.6, 0.95), u(0.25, 0.4), u(0.14, 0.22)};
    }
    throw GenerationError("sample_shape_params: unknown shape kind");
}

PointCloud sample_shape_surface(ShapeKind kind, const std::vector<real>& params, int n, Rng& rng) {
    PointCloud out;
    out.pts.reserve(static_cast<size_t>(n));
    switch (kind) {
        case ShapeKind::Sphere: {
            for (int i = 0; i < n; ++i) {
                Vec3 d{rng.normal(), rng.normal(), rng.normal()};
                const real nn = vnorm(d);
                if (nn < real(1e-9)) {
                    --i;
                    continue;
                }
                out.pts.push_back(
                    {params[0] * d[0] / nn, params[1] * d[1] / nn, params[2] * d[2] / nn});
            }
            break;
        }
        case ShapeKind::Cylinder: {
            const real a = params[0], b = params[1], h = params[2];
            // Ramanujan perimeter approximation for the elliptical cross-section.
            const real per = real(M_PI) * (3 * (a + b) - std::sqrt((3 * a + b) * (a + 3 * b)));
            const real side_area = per * 2 * h;
            const real cap_area = 2 * real(M_PI) * a * b;
            for (int i = 0; i < n; ++i) {
                if (rng.uniform() * (side_area + cap_area) < side_area) {
                    const real th = rng.uniform(0, 2 * real(M_PI));
                    out.pts.push_back({a * std::cos(th), b * std::sin(th), rng.uniform(-h, h)});
                } else {
                    real x, y;
                    do {
                        x = rng.uniform(-1, 1);
                        y = rng.uniform(-1, 1);
                    } while (x * x + y * y > 1);
                    const real z = rng.uniform() < real(0.5) ? h : -h;
                    out.pts.push_back({a * x, b * y, z});
                }
            }
            break;
        }
        case ShapeKind::Box:
        case ShapeKind::LShape:
        case ShapeKind::Table: {
            const auto boxes = compound_boxes(kind, params);
            for (int i = 0; i < n; ++i) out.pts.push_back(sample_compound_surface(boxes, rng));
            break;
        }
    }
    return out;
}

VoxelGrid shape_occupancy(ShapeKind kind, const std::vector<real>& params, int res) {
    VoxelGrid g(res);
    const real step = real(2) / res;
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j)
            for (int k = 0; k < res; ++k) {
                const Vec3 p{-1 + (i + real(0.5)) * step, -1 + (j + real(0.5)) * step,
                             -1 + (k + real(0.5)) * step};
                if (shape_contains(kind, params, p)) g.set(i, j, k, true);
            }
    return g;
}

AssetLatent extract_latent(const VoxelGrid& shell, int lat_res) {
    SG_CHECK(shell.res == 2 * lat_res, "extract_latent: shell must be twice the latent resolution");
    AssetLatent lat;
    lat.res = lat_res;
    for (int i = 0; i < lat_res; ++i)
        for (int j = 0; j < lat_res; ++j)
            for (int k = 0; k < lat_res; ++k) {
                std::array<real, kLatentFeatDim> code;
                bool active = false;
                for (int b = 0; b < 8; ++b) {
                    const int di = (b >> 2) & 1, dj = (b >> 1) & 1, dk = b & 1;
                    const bool on = shell.get(2 * i + di, 2 * j + dj, 2 * k + dk);
                    code[b] = on ? real(1) : real(-1);
                    active = active || on;
                }
                if (!active) continue;
                lat.coords.push_back({i, j, k});
                lat.feats.insert(lat.feats.end(), code.begin(), code.end());
            }
    if (lat.coords.empty()) throw GenerationError("extract_latent: shape produced no surface cells");
    return lat;
}

VoxelGrid latent_to_shell(const AssetLatent& lat, const std::vector<real>& feats_override) {
    const std::vector<real>& feats = feats_override.empty() ? lat.feats : feats_override;
    SG_CHECK(feats.size() == lat.coords.size() * kLatentFeatDim,
             "latent_to_shell: feature size mismatch");
    VoxelGrid shell(2 * lat.res);
    for (size_t c = 0; c < lat.coords.size(); ++c) {
        const auto& [i, j, k] = lat.coords[c];
        for (int b = 0; b < 8; ++b) {
            if (feats[c * kLatentFeatDim + b] <= 0) continue;
            const int di = (b >> 2) & 1, dj = (b >> 1) & 1, dk = b & 1;
            shell.set(2 * i + di, 2 * j + dj, 2 * k + dk, true);
        }
    }
    return shell;
}

Asset build_asset(ShapeKind kind, Rng& rng, int occ_res, int lat_res, int surface_samples) {
    SG_CHECK(occ_res == 2 * lat_res, "build_asset: occupancy must be twice the latent resolution");
    Asset a;
    a.kind = kind;
    a.params = sample_shape_params(kind, rng);
    const VoxelGrid solid = shape_occupancy(kind, a.params, occ_res);
    a.latent = extract_latent(surface_shell(solid), lat_res);
    a.surface = sample_shape_surface(kind, a.params, surface_samples, rng);
    return a;
}

}  // namespace scenegen
