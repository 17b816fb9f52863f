#include "scenegen/train/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

namespace scenegen {

namespace fs = std::filesystem;

namespace {

std::string u64_hex(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
    return buf;
}

uint64_t u64_from_hex(const std::string& s) { return std::strtoull(s.c_str(), nullptr, 16); }

PoseGraph identity_pose_graph() {
    PoseGraph g;
    g.t = Tensor::from_data({1, 3}, {0, 0, 0});
    g.q = Tensor::from_data({1, 4}, {1, 0, 0, 0});
    g.s = Tensor::from_data({1, 1}, {1});
    return g;
}

template <typename T>
void shuffle_inplace(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
}

}  // namespace

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> kKeys = {
        "lr",          "weight_decay",   "batch_size", "epochs",        "lambda_floor",
        "lambda_decay", "mu_t",          "mu_q",       "mu_s",          "delta_p",
        "delta_c",     "cond_dropout_p", "seed",       "trainable",     "drop_geo",
        "drop_global_v", "drop_mask",    "ss_to_as",   "collision_res", "collision_temp"};
    for (const auto& [key, value] : j.items())
        if (!kKeys.count(key)) throw FormatError("train config: unknown key '" + key + "'");
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.lambda_floor = j.value("lambda_floor", c.lambda_floor);
    c.lambda_decay = j.value("lambda_decay", c.lambda_decay);
    c.weights.mu_t = j.value("mu_t", c.weights.mu_t);
    c.weights.mu_q = j.value("mu_q", c.weights.mu_q);
    c.weights.mu_s = j.value("mu_s", c.weights.mu_s);
    c.weights.delta_p = j.value("delta_p", c.weights.delta_p);
    c.weights.delta_c = j.value("delta_c", c.weights.delta_c);
    c.cond_dropout_p = j.value("cond_dropout_p", c.cond_dropout_p);
    c.seed = j.value("seed", c.seed);
    c.trainable = j.value("trainable", c.trainable);
    c.ablation.drop_geo = j.value("drop_geo", false);
    c.ablation.drop_global_v = j.value("drop_global_v", false);
    c.ablation.drop_mask = j.value("drop_mask", false);
    c.ablation.ss_to_as = j.value("ss_to_as", false);
    c.collision_res = j.value("collision_res", c.collision_res);
    c.collision_temp = j.value("collision_temp", c.collision_temp);
    SG_CHECK(c.lr > 0, "train config: lr must be positive");
    SG_CHECK(c.batch_size >= 1, "train config: batch_size must be >= 1");
    SG_CHECK(c.cond_dropout_p >= 0 && c.cond_dropout_p < 1,
             "train config: cond_dropout_p must lie in [0, 1)");
    return c;
}

nlohmann::json TrainConfig::to_json() const {
    return {{"lr", lr},
            {"weight_decay", weight_decay},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"lambda_floor", lambda_floor},
            {"lambda_decay", lambda_decay},
            {"mu_t", weights.mu_t},
            {"mu_q", weights.mu_q},
            {"mu_s", weights.mu_s},
            {"delta_p", weights.delta_p},
            {"delta_c", weights.delta_c},
            {"cond_dropout_p", cond_dropout_p},
            {"seed", seed},
            {"trainable", trainable},
            {"drop_geo", ablation.drop_geo},
            {"drop_global_v", ablation.drop_global_v},
            {"drop_mask", ablation.drop_mask},
            {"ss_to_as", ablation.ss_to_as},
            {"collision_res", collision_res},
            {"collision_temp", collision_temp}};
}

nlohmann::json StepRecord::to_json() const {
    return {{"step", step},     {"epoch", epoch},     {"cfm", loss.cfm},
            {"pos", loss.pos},  {"coll", loss.coll},  {"lambda", loss.lambda},
            {"total", loss.total}};
}

void select_trainable(ParamStore& params, const std::string& mode) {
    if (mode == "all") {
        params.set_trainable(
            [](const std::string& n) { return n.rfind("decoder.", 0) != 0; });
    } else if (mode == "global_only") {
        params.set_trainable([](const std::string& n) {
            const bool global_attn = n.rfind("agg.block", 0) == 0 &&
                                     (n.find(".global_self.") != std::string::npos ||
                                      n.find(".global_cross.") != std::string::npos);
            const bool prefix = n.rfind("agg.prefix", 0) == 0;
            const bool pos = n.rfind("pos_head.", 0) == 0;
            return global_attn || prefix || pos;
        });
    } else if (mode == "decoder_only") {
        params.set_trainable(
            [](const std::string& n) { return n.rfind("decoder.", 0) == 0; });
    } else {
        throw ContractError("trainable mode must be global_only, all or decoder_only, got " +
                            mode);
    }
}

Trainer::Trainer(SceneGenModel model, const TrainConfig& cfg)
    : model_(std::move(model)), cfg_(cfg), rng_(cfg.seed) {
    AdamWConfig oc;
    oc.lr = cfg_.lr;
    oc.weight_decay = cfg_.weight_decay;
    opt_ = AdamW(oc);
    apply_ablation(model_, cfg_.ablation);
    select_trainable(model_.params, cfg_.trainable);
}

real Trainer::current_lambda() const {
    return std::max(cfg_.lambda_floor, std::pow(cfg_.lambda_decay, static_cast<real>(epoch_)));
}

LossBreakdown Trainer::train_step(const std::vector<const SceneSample*>& batch) {
    SG_CHECK(!batch.empty(), "train_step: empty batch");
    const int n_assets = batch.front()->num_assets();
    for (const SceneSample* s : batch)
        SG_CHECK(s->num_assets() == n_assets, "train_step: mixed asset counts in one batch");

    const real lambda = current_lambda();
    const real inv_b = 1 / static_cast<real>(batch.size());
    const int tpv = model_.visual_enc.cfg.tokens_per_view();

    GradMap grads;
    real cfm_sum = 0, pos_sum = 0, coll_sum = 0;

    for (const SceneSample* sp : batch) {
        const SceneSample& scene = *sp;
        const int n = scene.num_assets();

        // Fixed draw order per scene: dropout gate, then (t, ε) per asset.
        const bool drop = rng_.uniform() < cfg_.cond_dropout_p;
        std::vector<real> t(static_cast<size_t>(n));
        std::vector<Tensor> x0, eps, xt;
        std::vector<const AssetLatent*> lats;
        for (int i = 0; i < n; ++i) {
            const AssetLatent& lat = scene.assets[i].latent;
            lats.push_back(&lat);
            t[i] = rng_.uniform();
            std::vector<real> e(lat.feats.size());
            for (real& v : e) v = rng_.normal();
            std::vector<real> x(lat.feats.size());
            for (size_t k = 0; k < x.size(); ++k)
                x[k] = (1 - t[i]) * lat.feats[k] + t[i] * e[k];
            x0.push_back(Tensor::from_data({lat.size(), kLatentFeatDim}, lat.feats));
            eps.push_back(Tensor::from_data({lat.size(), kLatentFeatDim}, std::move(e)));
            xt.push_back(Tensor::from_data({lat.size(), kLatentFeatDim}, std::move(x)));
        }

        const SceneEncoding cond = drop ? model_.null_encoding(n, tpv, tpv)
                                        : model_.encode_views(scene, {0})[0];
        const SceneForward fwd = model_.forward(lats, xt, t, cond, 0);

        const Tensor cfm = cfm_loss(fwd.velocity, x0, eps);

        const std::vector<Pose> gt_rest(scene.poses.begin() + 1, scene.poses.end());
        const Tensor pos = position_loss(fwd.pose_raw, gt_rest, scene.d_scene, cfg_.weights);

        // Collision on the both-predicted scene: denoised clean latents are
        // decoded to soft occupancy and pushed through the predicted poses,
        // with the query pinned at identity.
        std::vector<SoftOccupancy> occ;
        for (int i = 0; i < n; ++i) {
            const Tensor x0_hat = sub(xt[i], mul_const(fwd.velocity[i], t[i]));
            const Tensor logits = model_.decoder(x0_hat);
            const PoseGraph g = i == 0 ? identity_pose_graph()
                                       : pose_graph_from_raw(slice_rows(fwd.pose_raw, i - 1, 1));
            occ.push_back(soft_asset_occupancy(*lats[i], logits, g, cfg_.collision_temp));
        }
        Vec3 lo{0, 0, 0}, hi{0, 0, 0};
        scene.scene_cloud(512).bounds(lo, hi);
        const Vec3 pad = real(0.05) * (hi - lo) + Vec3{1e-3, 1e-3, 1e-3};
        const Tensor coll = collision_loss_soft(occ, lo - pad, hi + pad, cfg_.collision_res,
                                                cfg_.weights.delta_c);

        if (!std::isfinite(cfm.item()) || !std::isfinite(pos.item()) ||
            !std::isfinite(coll.item())) {
            std::ostringstream oss;
            oss << "train_step: non-finite loss at step " << step_ << ", scene "
                << scene.scene_id << " (cfm=" << cfm.item() << " pos=" << pos.item()
                << " coll=" << coll.item() << "; t=";
            for (int i = 0; i < n; ++i) oss << (i ? "," : "") << t[i];
            oss << ")";
            std::cerr << oss.str() << "\n";
            throw TrainingError(oss.str());
        }

        const Tensor total = add(cfm, mul_const(add(pos, coll), lambda));
        grads.add_scaled(backward(total), inv_b);
        cfm_sum += cfm.item();
        pos_sum += pos.item();
        coll_sum += coll.item();
    }

    opt_.step(model_.params, grads);
    ++step_;
    return combine(cfm_sum * inv_b, pos_sum * inv_b, coll_sum * inv_b, lambda);
}

std::vector<StepRecord> Trainer::train_epoch(const std::vector<SceneSample>& corpus,
                                             std::ostream* log) {
    SG_CHECK(!corpus.empty(), "train_epoch: empty corpus");
    std::vector<int> counts;
    counts.reserve(corpus.size());
    for (const auto& s : corpus) counts.push_back(s.num_assets());
    const auto batches = make_batches(counts, cfg_.batch_size, rng_);

    std::vector<StepRecord> recs;
    recs.reserve(batches.size());
    for (const auto& b : batches) {
        std::vector<const SceneSample*> ptrs;
        ptrs.reserve(b.indices.size());
        for (int i : b.indices) ptrs.push_back(&corpus[static_cast<size_t>(i)]);
        StepRecord r;
        r.loss = train_step(ptrs);
        r.step = step_;
        r.epoch = epoch_;
        if (log) (*log) << r.to_json().dump() << "\n";
        recs.push_back(r);
    }
    ++epoch_;
    return recs;
}

void Trainer::save_checkpoint(const std::string& dir) const {
    fs::create_directories(dir);

    scenegen::save_checkpoint(dir + "/weights.sgck", model_.to_checkpoint("f8"));

    Checkpoint o;
    o.meta["format"] = "scenegen-optimizer";
    o.meta["adam_steps"] = opt_.step_count();
    for (const auto& [name, mom] : opt_.state()) {
        o.add("m." + name, {static_cast<int>(mom.m.size())}, mom.m, "f8");
        o.add("v." + name, {static_cast<int>(mom.v.size())}, mom.v, "f8");
    }
    scenegen::save_checkpoint(dir + "/optimizer.sgck", o);

    nlohmann::json st;
    st["step"] = step_;
    st["epoch"] = epoch_;
    const auto rs = rng_.state();
    st["rng_state"] = {u64_hex(rs[0]), u64_hex(rs[1]), u64_hex(rs[2]), u64_hex(rs[3])};
    st["rng_seed"] = rng_.seed();
    st["train_config"] = cfg_.to_json();
    st["model_config"] = model_.cfg.to_json();
    std::ofstream os(dir + "/state.json");
    SG_CHECK(os.good(), "save_checkpoint: cannot write " + dir + "/state.json");
    os << st.dump(2) << "\n";
}

void Trainer::load_checkpoint(const std::string& dir) {
    std::ifstream is(dir + "/state.json");
    if (!is) throw FormatError("load_checkpoint: missing " + dir + "/state.json");
    nlohmann::json st = nlohmann::json::parse(is);

    if (st["model_config"] != model_.cfg.to_json())
        throw FormatError("load_checkpoint: model config mismatch with checkpoint");

    model_.load_weights(scenegen::load_checkpoint(dir + "/weights.sgck"));

    const Checkpoint o = scenegen::load_checkpoint(dir + "/optimizer.sgck");
    opt_.set_step_count(o.meta.at("adam_steps").get<int64_t>());
    opt_.state().clear();
    for (const auto& rec : o.arrays) {
        const bool is_m = rec.name.rfind("m.", 0) == 0;
        const std::string pname = rec.name.substr(2);
        auto& mom = opt_.state()[pname];
        (is_m ? mom.m : mom.v) = rec.data;
    }

    std::array<uint64_t, 4> rs{};
    for (int i = 0; i < 4; ++i) rs[static_cast<size_t>(i)] = u64_from_hex(st["rng_state"][i]);
    rng_.set_state(rs);

    step_ = st["step"].get<int64_t>();
    epoch_ = st["epoch"].get<int64_t>();
}

Trainer Trainer::from_checkpoint(const std::string& dir) {
    std::ifstream is(dir + "/state.json");
    if (!is) throw FormatError("from_checkpoint: missing " + dir + "/state.json");
    nlohmann::json st = nlohmann::json::parse(is);
    const ModelConfig mc = ModelConfig::from_json(st["model_config"]);
    const TrainConfig tc = TrainConfig::from_json(st["train_config"]);
    Trainer tr(SceneGenModel::create(mc, tc.seed), tc);
    tr.load_checkpoint(dir);
    return tr;
}

real train_decoder(SceneGenModel& model, const std::vector<SceneSample>& corpus, int epochs,
                   real lr, real noise_std, uint64_t seed, std::ostream* log) {
    SG_CHECK(!corpus.empty(), "train_decoder: empty corpus");
    std::vector<const AssetLatent*> train_set, held;
    int k = 0;
    for (const auto& s : corpus)
        for (const auto& a : s.assets) ((k++ % 5 == 0) ? held : train_set).push_back(&a.latent);
    if (train_set.empty()) train_set = held;

    select_trainable(model.params, "decoder_only");
    AdamWConfig oc;
    oc.lr = lr;
    oc.weight_decay = 0;
    AdamW opt(oc);
    Rng rng(seed);

    for (int e = 0; e < epochs; ++e) {
        std::vector<size_t> order(train_set.size());
        std::iota(order.begin(), order.end(), size_t{0});
        shuffle_inplace(order, rng);
        real ep_loss = 0;
        for (size_t idx : order) {
            const AssetLatent& lat = *train_set[idx];
            std::vector<real> noisy(lat.feats.size()), target(lat.feats.size());
            for (size_t i = 0; i < noisy.size(); ++i) {
                noisy[i] = lat.feats[i] + noise_std * rng.normal();
                target[i] = lat.feats[i] > 0 ? 1 : 0;
            }
            const Tensor in = Tensor::from_data({lat.size(), kLatentFeatDim}, std::move(noisy));
            const Tensor tgt =
                Tensor::from_data({lat.size(), kLatentFeatDim}, std::move(target));
            const Tensor logits = model.decoder(in);
            // Binary cross-entropy on logits: softplus(x) - target*x.
            const Tensor loss = mean(sub(softplus(logits), mul(tgt, logits)));
            const GradMap g = backward(loss);
            opt.step(model.params, g);
            ep_loss += loss.item();
        }
        if (log)
            (*log) << nlohmann::json{{"epoch", e},
                                     {"bce", ep_loss / static_cast<real>(order.size())}}
                          .dump()
                   << "\n";
    }

    real iou_sum = 0;
    for (const AssetLatent* lp : held) {
        const auto dec = decode_structure(
            model.decoder, *lp, Tensor::from_data({lp->size(), kLatentFeatDim}, lp->feats));
        iou_sum += voxel_iou(dec.shell, latent_to_shell(*lp));
    }
    return held.empty() ? real(1) : iou_sum / static_cast<real>(held.size());
}

}  // namespace scenegen
