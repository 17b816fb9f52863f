#include "scenegen/sample/sampler.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace scenegen {

nlohmann::json SampleConfig::to_json() const {
    return {{"steps", steps},
            {"cfg_weight", cfg_weight},
            {"seed", seed},
            {"latent_fusion", latent_fusion}};
}

std::vector<real> cfg_velocity(const std::vector<real>& v_cond,
                               const std::vector<real>& v_uncond, real w) {
    SG_CHECK(v_cond.size() == v_uncond.size(), "cfg_velocity: size mismatch");
    std::vector<real> out(v_cond.size());
    for (size_t i = 0; i < out.size(); ++i)
        out[i] = v_uncond[i] + w * (v_cond[i] - v_uncond[i]);
    return out;
}

PointCloud SampledScene::scene_cloud() const {
    PointCloud all;
    for (const auto& a : assets) {
        const PointCloud p = a.posed();
        all.pts.insert(all.pts.end(), p.pts.begin(), p.pts.end());
    }
    return all;
}

namespace {

// Per-view poses fused into one: translations and scales by arithmetic mean,
// rotations by the chordal quaternion mean.
Pose fuse_poses(const std::vector<Pose>& per_view) {
    const real inv_k = 1 / static_cast<real>(per_view.size());
    Pose out;
    out.t = {0, 0, 0};
    out.s = 0;
    std::vector<Quat> qs;
    qs.reserve(per_view.size());
    for (const Pose& p : per_view) {
        out.t = out.t + p.t;
        out.s += p.s;
        qs.push_back(p.q);
    }
    out.t = inv_k * out.t;
    out.s *= inv_k;
    out.q = quat_mean(qs);
    return out;
}

std::array<real, 8> raw_row(const Tensor& pose_raw, int row) {
    std::array<real, 8> v{};
    for (int c = 0; c < 8; ++c) v[static_cast<size_t>(c)] = pose_raw.data()[row * 8 + c];
    return v;
}

}  // namespace

SampledScene sample_scene_multiview(const SceneGenModel& model, const SceneSample& scene,
                                    const std::vector<int>& view_indices,
                                    const SampleConfig& cfg,
                                    const std::vector<std::vector<real>>* init_noise) {
    SG_CHECK(!view_indices.empty(), "sample: need at least one conditioning view");
    SG_CHECK(cfg.steps >= 1, "sample: steps must be >= 1");
    SG_CHECK(cfg.latent_fusion == "velocity_mean" || cfg.latent_fusion == "reference_view",
             "sample: latent_fusion must be velocity_mean or reference_view");
    const int n = scene.num_assets();
    const int k_views = static_cast<int>(view_indices.size());
    const int tpv = model.visual_enc.cfg.tokens_per_view();

    NoGradGuard ng;
    Rng rng(cfg.seed);

    // x(1) = pure noise over the conditioned cell structure.
    std::vector<const AssetLatent*> lats;
    std::vector<std::vector<real>> x(static_cast<size_t>(n));
    if (init_noise)
        SG_CHECK(static_cast<int>(init_noise->size()) == n,
                 "sample: init_noise must cover every asset");
    for (int i = 0; i < n; ++i) {
        lats.push_back(&scene.assets[static_cast<size_t>(i)].latent);
        if (init_noise) {
            const auto& given = (*init_noise)[static_cast<size_t>(i)];
            SG_CHECK(given.size() == lats.back()->feats.size(),
                     "sample: init_noise size mismatch for asset " + std::to_string(i));
            x[static_cast<size_t>(i)] = given;
        } else {
            x[static_cast<size_t>(i)].resize(lats.back()->feats.size());
            for (real& v : x[static_cast<size_t>(i)]) v = rng.normal();
        }
    }

    const std::vector<SceneEncoding> conds = model.encode_views(scene, view_indices);
    const SceneEncoding null_cond = model.null_encoding(n, tpv, tpv);

    auto feats_tensors = [&] {
        std::vector<Tensor> xs;
        xs.reserve(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i)
            xs.push_back(Tensor::from_data({lats[static_cast<size_t>(i)]->size(),
                                            kLatentFeatDim},
                                           x[static_cast<size_t>(i)]));
        return xs;
    };

    const real dt = 1 / static_cast<real>(cfg.steps);
    for (int step = 0; step < cfg.steps; ++step) {
        const real t = 1 - static_cast<real>(step) * dt;
        const std::vector<real> t_vec(static_cast<size_t>(n), t);
        const std::vector<Tensor> xs = feats_tensors();

        const SceneForward unc = model.forward(lats, xs, t_vec, null_cond, 0);
        // Fuse into per-asset velocities across views.
        std::vector<std::vector<real>> v(static_cast<size_t>(n));
        if (cfg.latent_fusion == "reference_view") {
            const SceneForward c0 = model.forward(lats, xs, t_vec, conds[0], 0);
            for (int i = 0; i < n; ++i)
                v[static_cast<size_t>(i)] =
                    cfg_velocity(c0.velocity[static_cast<size_t>(i)].data(),
                                 unc.velocity[static_cast<size_t>(i)].data(), cfg.cfg_weight);
        } else {
            for (int i = 0; i < n; ++i)
                v[static_cast<size_t>(i)].assign(x[static_cast<size_t>(i)].size(), 0);
            for (int k = 0; k < k_views; ++k) {
                const SceneForward c =
                    model.forward(lats, xs, t_vec, conds[static_cast<size_t>(k)], 0);
                for (int i = 0; i < n; ++i) {
                    const std::vector<real> g =
                        cfg_velocity(c.velocity[static_cast<size_t>(i)].data(),
                                     unc.velocity[static_cast<size_t>(i)].data(),
                                     cfg.cfg_weight);
                    auto& acc = v[static_cast<size_t>(i)];
                    for (size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
                }
            }
            const real inv_k = 1 / static_cast<real>(k_views);
            for (auto& vi : v)
                for (real& val : vi) val *= inv_k;
        }

        for (int i = 0; i < n; ++i) {
            auto& xi = x[static_cast<size_t>(i)];
            const auto& vi = v[static_cast<size_t>(i)];
            for (size_t j = 0; j < xi.size(); ++j) {
                xi[j] -= dt * vi[j];
                if (!std::isfinite(xi[j]))
                    throw SamplingError("sample: non-finite latent at step " +
                                        std::to_string(step) + ", asset " + std::to_string(i));
            }
        }
    }

    // Pose readout: one conditional pass per view at t = 0 on the final
    // latents, fused across views. The query keeps the identity pose.
    const std::vector<Tensor> xs = feats_tensors();
    const std::vector<real> t0(static_cast<size_t>(n), 0);
    std::vector<std::vector<Pose>> per_view(static_cast<size_t>(n > 0 ? n - 1 : 0));
    for (int k = 0; k < k_views; ++k) {
        const SceneForward c = model.forward(lats, xs, t0, conds[static_cast<size_t>(k)], 0);
        for (int i = 1; i < n; ++i)
            per_view[static_cast<size_t>(i - 1)].push_back(
                pose_from_raw_values(raw_row(c.pose_raw, i - 1)));
    }

    SampledScene out;
    out.scene_id = scene.scene_id;
    for (int i = 0; i < n; ++i) {
        SampledAsset a;
        a.latent = *lats[static_cast<size_t>(i)];
        a.latent.feats = x[static_cast<size_t>(i)];
        const DecodedStructure dec = decode_structure(model.decoder, a.latent, xs[static_cast<size_t>(i)]);
        a.shell = dec.shell;
        a.cloud = dec.cloud;
        a.pose = i == 0 ? Pose::identity() : fuse_poses(per_view[static_cast<size_t>(i - 1)]);
        out.assets.push_back(std::move(a));
    }
    return out;
}

SampledScene sample_scene(const SceneGenModel& model, const SceneSample& scene, int view_index,
                          const SampleConfig& cfg) {
    return sample_scene_multiview(model, scene, {view_index}, cfg);
}

void write_sampled_scene(const std::string& dir, const SampledScene& scene) {
    std::filesystem::create_directories(dir);
    nlohmann::json poses = nlohmann::json::array();
    for (int i = 0; i < scene.num_assets(); ++i) {
        const SampledAsset& a = scene.assets[static_cast<size_t>(i)];
        std::ostringstream name;
        name << "asset_" << (i < 10 ? "0" : "") << i << ".ply";
        save_ply(dir + "/" + name.str(), a.cloud);
        poses.push_back({{"t", {a.pose.t[0], a.pose.t[1], a.pose.t[2]}},
                         {"q", {a.pose.q[0], a.pose.q[1], a.pose.q[2], a.pose.q[3]}},
                         {"s", a.pose.s}});
    }
    std::ofstream os(dir + "/poses.json");
    SG_CHECK(os.good(), "write_sampled_scene: cannot write " + dir + "/poses.json");
    os << nlohmann::json{{"scene_id", scene.scene_id}, {"poses", poses}}.dump(2) << "\n";
    save_ply(dir + "/scene.ply", scene.scene_cloud());
}

SampledScene load_sampled_scene(const std::string& dir) {
    std::ifstream is(dir + "/poses.json");
    if (!is) throw FormatError("load_sampled_scene: missing " + dir + "/poses.json");
    const nlohmann::json j = nlohmann::json::parse(is);

    SampledScene out;
    out.scene_id = j.at("scene_id").get<uint64_t>();
    int i = 0;
    for (const auto& pj : j.at("poses")) {
        SampledAsset a;
        a.pose.t = {pj.at("t")[0].get<real>(), pj.at("t")[1].get<real>(),
                    pj.at("t")[2].get<real>()};
        a.pose.q = {pj.at("q")[0].get<real>(), pj.at("q")[1].get<real>(),
                    pj.at("q")[2].get<real>(), pj.at("q")[3].get<real>()};
        a.pose.s = pj.at("s").get<real>();
        std::ostringstream name;
        name << dir << "/asset_" << (i < 10 ? "0" : "") << i << ".ply";
        a.cloud = load_ply(name.str());
        out.assets.push_back(std::move(a));
        ++i;
    }
    return out;
}

}  // namespace scenegen
