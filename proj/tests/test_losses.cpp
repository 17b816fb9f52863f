#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "scenegen/losses/losses.hpp"
#include "support.hpp"

using namespace scenegen;
using namespace scenegen::testsupport;

namespace {

// Reference elementwise Huber, summed.
real huber_ref(const std::vector<real>& e, real delta) {
    real acc = 0;
    for (real v : e) {
        const real a = std::fabs(v);
        acc += a <= delta ? real(0.5) * v * v / delta : a - real(0.5) * delta;
    }
    return acc;
}

PoseGraph pose_graph_of(const Pose& p) {
    std::array<real, 8> raw = p.to8();
    // Invert the head's softplus parameterization so the graph reproduces s.
    raw[7] = std::log(std::exp(p.s) - 1);
    return pose_graph_from_raw(Tensor::from_data({1, 8}, std::vector<real>(raw.begin(), raw.end())));
}

}  // namespace

TEST_CASE("cfm loss is zero exactly when the velocity is exact") {
    Rng rng(51);
    std::vector<Tensor> x0, eps, v_exact, v_off;
    for (int i = 0; i < 3; ++i) {
        const int n = 4 + i;
        Tensor xi = rand_leaf(rng, {n, kLatentFeatDim});
        Tensor ei = rand_leaf(rng, {n, kLatentFeatDim});
        std::vector<real> v(static_cast<size_t>(n) * kLatentFeatDim);
        for (size_t j = 0; j < v.size(); ++j) v[j] = ei.data()[j] - xi.data()[j];
        x0.push_back(xi);
        eps.push_back(ei);
        v_exact.push_back(Tensor::from_data({n, kLatentFeatDim}, v));
        v[3] += real(0.25);
        v_off.push_back(Tensor::from_data({n, kLatentFeatDim}, v));
    }
    CHECK(cfm_loss(v_exact, x0, eps).item() == 0);
    CHECK(cfm_loss(v_off, x0, eps).item() > 0);
}

TEST_CASE("cfm loss averages per-asset mean squared residuals") {
    // One asset, one cell: loss = mean over feat of (v - (eps - x0))^2.
    std::vector<real> x0(kLatentFeatDim, real(0.5));
    std::vector<real> eps(kLatentFeatDim, real(-0.5));
    std::vector<real> v(kLatentFeatDim, 0);  // residual = 0 - (-1) = 1 per coord
    const Tensor loss = cfm_loss({Tensor::from_data({1, kLatentFeatDim}, v)},
                                 {Tensor::from_data({1, kLatentFeatDim}, x0)},
                                 {Tensor::from_data({1, kLatentFeatDim}, eps)});
    CHECK(loss.item() == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("huber_sum matches the reference on both branches") {
    const real delta = real(0.05);
    const std::vector<real> e{real(0.0), real(0.01), real(-0.04), real(0.05), real(0.2), real(-1)};
    const Tensor x = Tensor::from_data({6}, e);
    CHECK(huber_sum(x, delta).item() == doctest::Approx(huber_ref(e, delta)).epsilon(1e-12));
}

TEST_CASE("huber branches meet continuously at the threshold") {
    const real delta = real(0.05);
    // Quadratic branch limit and linear branch limit agree at |e| = delta.
    const real quad = real(0.5) * delta * delta / delta;
    const real lin = delta - real(0.5) * delta;
    CHECK(std::fabs(quad - lin) < 1e-12);
    // And the implementation is continuous across the kink.
    const real below = huber_sum(Tensor::from_data({1}, {delta * (1 - real(1e-13))}), delta).item();
    const real above = huber_sum(Tensor::from_data({1}, {delta * (1 + real(1e-13))}), delta).item();
    CHECK(std::fabs(below - above) < 1e-12);
    CHECK(huber_sum(Tensor::from_data({1}, {delta}), delta).item() ==
          doctest::Approx(real(0.5) * delta).epsilon(1e-12));
}

TEST_CASE("position loss is zero at the exact pose and grows with error") {
    Rng rng(52);
    std::vector<Pose> gt;
    for (int i = 0; i < 2; ++i) {
        Pose p;
        p.t = {rng.uniform(real(-0.4), real(0.4)), rng.uniform(real(-0.4), real(0.4)), 0};
        p.q = quat_from_axis_angle({0, 0, 1}, rng.uniform(real(-1), real(1)));
        p.s = rng.uniform(real(0.6), real(1.4));
        gt.push_back(p);
    }

    // Raw rows that decode exactly to the ground truth.
    std::vector<real> raw;
    for (const Pose& p : gt) {
        auto r8 = p.to8();
        r8[7] = std::log(std::exp(p.s) - 1);
        raw.insert(raw.end(), r8.begin(), r8.end());
    }
    const Tensor exact = Tensor::from_data({2, 8}, raw);
    CHECK(position_loss(exact, gt, real(2), {}).item() == doctest::Approx(0).epsilon(1e-12));

    // The quaternion sign is free: flipping a row's quaternion changes nothing.
    std::vector<real> flipped = raw;
    for (int c = 3; c < 7; ++c) flipped[static_cast<size_t>(c)] = -flipped[static_cast<size_t>(c)];
    CHECK(position_loss(Tensor::from_data({2, 8}, flipped), gt, real(2), {}).item() ==
          doctest::Approx(0).epsilon(1e-12));

    // A translation offset of exactly delta_p * d_scene lands on the Huber kink.
    LossWeights w;
    std::vector<real> off = raw;
    off[0] += w.delta_p * real(2);
    const real loss = position_loss(Tensor::from_data({2, 8}, off), gt, real(2), w).item();
    CHECK(loss == doctest::Approx(real(0.5) * w.delta_p).epsilon(1e-9));

    // mu_t scales the translation term linearly.
    LossWeights w2 = w;
    w2.mu_t = 3;
    CHECK(position_loss(Tensor::from_data({2, 8}, off), gt, real(2), w2).item() ==
          doctest::Approx(3 * loss).epsilon(1e-9));
}

TEST_CASE("position loss normalizes translation by the scene diameter") {
    Pose gt;
    gt.t = {real(0.2), 0, 0};
    auto r8 = gt.to8();
    r8[7] = std::log(std::exp(real(1)) - 1);
    r8[0] += real(0.1);  // absolute offset 0.1
    LossWeights w;
    const Tensor raw = Tensor::from_data({1, 8}, std::vector<real>(r8.begin(), r8.end()));
    const real tight = position_loss(raw, {gt}, real(1), w).item();
    const real loose = position_loss(raw, {gt}, real(10), w).item();
    // Same absolute error is ten times smaller in normalized units.
    CHECK(loose < tight);
    CHECK(tight == doctest::Approx(real(0.1) - real(0.5) * w.delta_p).epsilon(1e-9));
    CHECK(loose == doctest::Approx(real(0.5) * real(0.01) * real(0.01) / w.delta_p).epsilon(1e-9));
}

TEST_CASE("hard collision closed forms") {
    PointCloud a;
    a.pts = {{real(-0.8), 0, 0}, {real(-0.7), real(0.1), 0}};
    PointCloud b;
    b.pts = {{real(0.8), 0, 0}, {real(0.7), real(-0.1), 0}};

    // Disjoint scene: no shared cells, loss exactly zero.
    CHECK(collision_loss_hard({a, b}, 64) == 0);

    // Duplicated clouds: every touched cell is shared, IoU=1, H(1) = 0.975.
    CHECK(collision_loss_hard({a, a}, 64, real(0.05)) == doctest::Approx(0.975).epsilon(1e-12));
}

TEST_CASE("soft occupancy places sub-cell centers through the pose") {
    // One active cell at the origin corner of a res-2 latent; identity pose.
    AssetLatent lat;
    lat.res = 2;
    lat.coords = {{0, 0, 0}};
    lat.feats.assign(kLatentFeatDim, real(1));

    const Tensor logits = Tensor::from_data({1, kLatentFeatDim}, std::vector<real>(kLatentFeatDim, real(4)));
    const SoftOccupancy occ = soft_asset_occupancy(lat, logits, pose_graph_of(Pose::identity()));

    REQUIRE(occ.points.shape() == std::vector<int>{8, 3});
    REQUIRE(occ.weights.shape() == std::vector<int>{8, 1});
    // Cell (0,0,0) of a res-2 grid spans [-1,0)^3; its 8 sub-cell centers sit
    // at -0.75 and -0.25 per axis.
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 3; ++c) {
            const real v = occ.points.at(r, c);
            CHECK((std::fabs(v + real(0.75)) < 1e-12 || std::fabs(v + real(0.25)) < 1e-12));
        }
    // Tempered sigmoid of logit 4.
    for (int r = 0; r < 8; ++r)
        CHECK(occ.weights.at(r, 0) == doctest::Approx(1 / (1 + std::exp(-4.0))).epsilon(1e-12));

    // A pure translation moves every center by t.
    Pose moved = Pose::identity();
    moved.t = {real(0.5), 0, 0};
    const SoftOccupancy occ2 = soft_asset_occupancy(lat, logits, pose_graph_of(moved));
    for (int r = 0; r < 8; ++r)
        CHECK(occ2.points.at(r, 0) == doctest::Approx(occ.points.at(r, 0) + real(0.5)).epsilon(1e-9));
}

TEST_CASE("soft collision is zero when disjoint and grows with overlap") {
    AssetLatent lat;
    lat.res = 2;
    lat.coords = {{0, 0, 0}};
    lat.feats.assign(kLatentFeatDim, real(1));
    const Tensor sharp = Tensor::from_data({1, kLatentFeatDim}, std::vector<real>(kLatentFeatDim, real(50)));

    const Vec3 lo{-4, -4, -4}, hi{4, 4, 4};
    const auto place = [&](real x) {
        Pose p = Pose::identity();
        p.t = {x, 0, 0};
        return soft_asset_occupancy(lat, sharp, pose_graph_of(p));
    };

    // Splatted mass only touches a point's neighbour cells, so fully
    // separated assets share exactly zero multi-asset mass.
    const real far_apart = collision_loss_soft({place(real(-2.5)), place(real(2.5))}, lo, hi, 16).item();
    CHECK(far_apart == doctest::Approx(0).epsilon(1e-9));

    // Moving the assets together increases the penalty monotonically; the
    // coincident case stays below the hard-count ceiling Huber(1) = 0.975.
    const real touching = collision_loss_soft({place(real(-0.4)), place(real(0.4))}, lo, hi, 16).item();
    const real coincident = collision_loss_soft({place(real(-2.5)), place(real(-2.5))}, lo, hi, 16).item();
    CHECK(touching > far_apart);
    CHECK(coincident > touching);
    CHECK(coincident > real(0.2));
    CHECK(coincident <= real(0.975) + 1e-9);
}

TEST_CASE("soft collision is differentiable in the pose") {
    AssetLatent lat;
    lat.res = 2;
    lat.coords = {{0, 0, 0}, {1, 1, 1}};
    lat.feats.assign(2 * kLatentFeatDim, real(1));
    Rng rng(53);

    Tensor raw_a = rand_leaf(rng, {1, 8}, real(-0.3), real(0.3));
    Tensor raw_b = rand_leaf(rng, {1, 8}, real(-0.3), real(0.3));
    Tensor logits = rand_leaf(rng, {2, kLatentFeatDim}, real(-2), real(2));

    const Vec3 lo{-2, -2, -2}, hi{2, 2, 2};
    const auto build = [&] {
        const SoftOccupancy oa = soft_asset_occupancy(lat, logits, pose_graph_from_raw(raw_a));
        const SoftOccupancy ob = soft_asset_occupancy(lat, logits, pose_graph_from_raw(raw_b));
        return collision_loss_soft({oa, ob}, lo, hi, 8);
    };
    const auto rep = grad_check({raw_a, raw_b, logits}, build);
    CAPTURE(rep.worst);
    CHECK(rep.max_rel < 1e-4);
}

TEST_CASE("lambda schedule decays to its floor") {
    CHECK(lambda_schedule(0) == doctest::Approx(1).epsilon(1e-12));
    CHECK(lambda_schedule(10) == doctest::Approx(std::pow(0.99, 10)).epsilon(1e-12));
    CHECK(lambda_schedule(1000) == doctest::Approx(0.2).epsilon(1e-12));
    // Monotone non-increasing.
    for (int e = 1; e < 300; ++e) CHECK(lambda_schedule(e) <= lambda_schedule(e - 1));
}

TEST_CASE("combine enforces the total identity and clamps lambda") {
    const LossBreakdown b = combine(real(0.5), real(0.25), real(0.125), real(0.8));
    CHECK(b.lambda == real(0.8));
    CHECK(std::fabs(b.total - (b.cfm + b.lambda * (b.pos + b.coll))) < 1e-9);

    // Out-of-range lambda is clamped into [0.2, 1].
    CHECK(combine(0, 1, 0, real(5)).lambda == real(1));
    CHECK(combine(0, 1, 0, real(0.01)).lambda == real(0.2));
}
