#include "scenegen/eval/metrics.hpp"

#include <chrono>
#include <cmath>

namespace scenegen {

nlohmann::json EvalConfig::to_json() const {
    return {{"registration", registration},
            {"tau", tau},
            {"eval_points", eval_points},
            {"reg_points", reg_points},
            {"sigma_init", sigma_init},
            {"max_iters", max_iters},
            {"tol", tol},
            {"collision_res", collision_res},
            {"multi_start", multi_start}};
}

EvalScene eval_view(const SceneSample& s) {
    EvalScene v;
    for (const auto& a : s.assets) v.clouds.push_back(a.surface);
    v.poses = s.poses;
    return v;
}

EvalScene eval_view(const SampledScene& s) {
    EvalScene v;
    for (const auto& a : s.assets) {
        v.clouds.push_back(a.cloud);
        v.poses.push_back(a.pose);
    }
    return v;
}

namespace {

real mean_of(const std::vector<real>& xs) {
    real acc = 0;
    for (real x : xs) acc += x;
    return xs.empty() ? 0 : acc / static_cast<real>(xs.size());
}

}  // namespace

real MetricReport::cd_o_mean() const { return mean_of(cd_o); }
real MetricReport::fscore_o_mean() const { return mean_of(fscore_o); }
real MetricReport::iou_b_mean() const { return mean_of(iou_b); }

nlohmann::json MetricReport::to_json() const {
    return {{"cd_s", cd_s},
            {"fscore_s", fscore_s},
            {"cd_o", cd_o},
            {"cd_o_mean", cd_o_mean()},
            {"fscore_o", fscore_o},
            {"fscore_o_mean", fscore_o_mean()},
            {"iou_b", iou_b},
            {"iou_b_mean", iou_b_mean()},
            {"collision_iou", collision_iou},
            {"runtime_sec", runtime_sec}};
}

real chamfer(const PointCloud& a, const PointCloud& b) {
    SG_CHECK(!a.empty() && !b.empty(), "chamfer: clouds must be non-empty");
    const KdTree3 ta(a), tb(b);
    real ab = 0, ba = 0;
    for (const Vec3& p : a.pts) ab += std::sqrt(tb.nearest(p).second);
    for (const Vec3& p : b.pts) ba += std::sqrt(ta.nearest(p).second);
    return ab / static_cast<real>(a.size()) + ba / static_cast<real>(b.size());
}

real fscore(const PointCloud& a, const PointCloud& b, real tau) {
    SG_CHECK(!a.empty() && !b.empty(), "fscore: clouds must be non-empty");
    SG_CHECK(tau > 0, "fscore: tau must be positive");
    const KdTree3 ta(a), tb(b);
    const real tau2 = tau * tau;
    real hit_a = 0, hit_b = 0;
    for (const Vec3& p : a.pts)
        if (tb.nearest(p).second <= tau2) hit_a += 1;
    for (const Vec3& p : b.pts)
        if (ta.nearest(p).second <= tau2) hit_b += 1;
    const real precision = hit_a / static_cast<real>(a.size());
    const real recall = hit_b / static_cast<real>(b.size());
    if (precision + recall <= 0) return 0;
    return 100 * 2 * precision * recall / (precision + recall);
}

namespace {

// Normalization of a merged scene cloud: centroid to the origin, largest
// distance to the centroid scaled to 1. Rigid motions of the input commute
// with this map, which keeps the whole protocol rigid-invariant.
struct Normalizer {
    Vec3 center{0, 0, 0};
    real inv_scale = 1;

    static Normalizer fit(const PointCloud& merged) {
        Normalizer n;
        n.center = merged.centroid();
        real r = 0;
        for (const Vec3& p : merged.pts) r = std::max(r, vnorm(p - n.center));
        n.inv_scale = r > 0 ? 1 / r : 1;
        return n;
    }

    PointCloud apply(const PointCloud& c) const {
        PointCloud out;
        out.pts.reserve(c.pts.size());
        for (const Vec3& p : c.pts) out.pts.push_back(inv_scale * (p - center));
        return out;
    }
};

PointCloud apply_rigid(const PointCloud& c, const Quat& q, const Vec3& t) {
    PointCloud out;
    out.pts.reserve(c.pts.size());
    for (const Vec3& p : c.pts) out.pts.push_back(quat_rotate(q, p) + t);
    return out;
}

PointCloud merge(const std::vector<PointCloud>& clouds) {
    PointCloud all;
    for (const auto& c : clouds) all.pts.insert(all.pts.end(), c.pts.begin(), c.pts.end());
    return all;
}

}  // namespace

MetricReport evaluate_scene(const EvalScene& pred, const EvalScene& gt, const EvalConfig& cfg) {
    const auto t_start = std::chrono::steady_clock::now();
    const int n = gt.num_assets();
    SG_CHECK(n >= 1, "evaluate_scene: empty ground truth");
    SG_CHECK(pred.num_assets() == n, "evaluate_scene: asset count mismatch");
    SG_CHECK(static_cast<int>(pred.poses.size()) == n &&
                 static_cast<int>(gt.poses.size()) == n,
             "evaluate_scene: pose count mismatch");

    MetricReport rep;
    const auto finish = [&]() -> MetricReport& {
        rep.runtime_sec = std::chrono::duration<real>(std::chrono::steady_clock::now() - t_start)
                              .count();
        return rep;
    };

    // Posed, capped metric clouds; the subsample is index-deterministic, so it
    // commutes with rigid motions of the scene.
    std::vector<PointCloud> gt_assets(static_cast<size_t>(n)), pr_assets(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<size_t>(i);
        gt_assets[ui] = gt.clouds[ui]
                            .transformed(gt.poses[ui])
                            .subsampled(static_cast<size_t>(cfg.eval_points), static_cast<uint64_t>(i));
        pr_assets[ui] = pred.clouds[ui]
                            .transformed(pred.poses[ui])
                            .subsampled(static_cast<size_t>(cfg.eval_points), static_cast<uint64_t>(i));
    }

    const PointCloud gt_merged_raw = merge(gt_assets);
    const PointCloud pr_merged_raw = merge(pr_assets);
    SG_CHECK(!gt_merged_raw.empty(), "evaluate_scene: ground-truth clouds are all empty");

    if (pr_merged_raw.empty()) {
        // Nothing was generated: every score pegs at its worst case.
        rep.cd_s = kWorstChamfer;
        rep.fscore_s = 0;
        rep.cd_o.assign(static_cast<size_t>(n), kWorstChamfer);
        rep.fscore_o.assign(static_cast<size_t>(n), 0);
        rep.iou_b.assign(static_cast<size_t>(n), 0);
        rep.collision_iou = 0;
        return finish();
    }

    // The reference sets the metric scale for both scenes: rigid registration
    // could never undo a per-scene scale mismatch, and a prediction whose
    // spread differs (missing assets, wrong extents) must not be silently
    // rescaled into agreement. Each scene still centres on its own centroid,
    // which keeps the protocol rigid-invariant and gives registration a
    // translation-free starting point.
    const Normalizer gt_norm = Normalizer::fit(gt_merged_raw);
    Normalizer pr_norm = Normalizer::fit(pr_merged_raw);
    pr_norm.inv_scale = gt_norm.inv_scale;
    std::vector<PointCloud> gt_n(static_cast<size_t>(n)), pr_n(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        gt_n[static_cast<size_t>(i)] = gt_norm.apply(gt_assets[static_cast<size_t>(i)]);
        pr_n[static_cast<size_t>(i)] = pr_norm.apply(pr_assets[static_cast<size_t>(i)]);
    }

    // Query-asset registration carries one rigid transform onto the scene.
    // An empty query on either side is unregistrable; fall back to identity.
    Quat q{1, 0, 0, 0};
    Vec3 t{0, 0, 0};
    if (!pr_n[0].empty() && !gt_n[0].empty()) try {
        const PointCloud src = pr_n[0].subsampled(static_cast<size_t>(cfg.reg_points), 0);
        const PointCloud dst = gt_n[0].subsampled(static_cast<size_t>(cfg.reg_points), 0);
        Registration reg;
        if (cfg.multi_start) {
            reg = register_multistart(src, dst, cfg.registration, cfg.sigma_init,
                                      cfg.max_iters, cfg.tol);
        } else if (cfg.registration == "icp") {
            reg = register_icp(src, dst, cfg.max_iters, cfg.tol);
        } else {
            reg = register_filterreg(src, dst, cfg.sigma_init, cfg.max_iters, cfg.tol);
        }
        q = reg.q;
        t = reg.t;
    } catch (const RegistrationError&) {
        // Unregistrable query (too small or degenerate): score unaligned.
    }

    std::vector<PointCloud> pr_a(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        pr_a[static_cast<size_t>(i)] = apply_rigid(pr_n[static_cast<size_t>(i)], q, t);

    const PointCloud gt_all = merge(gt_n);
    const PointCloud pr_all = merge(pr_a);
    rep.cd_s = chamfer(pr_all, gt_all);
    rep.fscore_s = fscore(pr_all, gt_all, cfg.tau);

    for (int i = 0; i < n; ++i) {
        const auto ui = static_cast<size_t>(i);
        if (pr_a[ui].empty() || gt_n[ui].empty()) {
            rep.cd_o.push_back(kWorstChamfer);
            rep.fscore_o.push_back(0);
            rep.iou_b.push_back(0);
            continue;
        }
        rep.cd_o.push_back(chamfer(pr_a[ui], gt_n[ui]));
        rep.fscore_o.push_back(fscore(pr_a[ui], gt_n[ui], cfg.tau));
        rep.iou_b.push_back(bbox_iou(pr_a[ui], gt_n[ui]));
    }

    Vec3 lo{0, 0, 0}, hi{0, 0, 0};
    pr_all.bounds(lo, hi);
    rep.collision_iou = collision_iou(
        stack_presence(pr_a, cfg.collision_res, lo, hi));
    return finish();
}

}  // namespace scenegen
