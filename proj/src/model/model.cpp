#include "scenegen/model/model.hpp"

#include <cmath>
#include <set>

namespace scenegen {

// ------------------------------------------------------------ layer helpers

Tensor init_weight(ParamStore& ps, const std::string& name, int rows, int cols, Rng& rng,
                   real std_dev) {
    std::vector<real> v(static_cast<size_t>(rows) * cols);
    for (real& x : v) x = rng.normal() * std_dev;
    return ps.add(name, Tensor::leaf({rows, cols}, std::move(v), true));
}

Tensor init_zeros(ParamStore& ps, const std::string& name, std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return ps.add(name, Tensor::leaf(std::move(shape), std::vector<real>(n, 0), true));
}

Tensor init_const(ParamStore& ps, const std::string& name, std::vector<int> shape, real value) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    return ps.add(name, Tensor::leaf(std::move(shape), std::vector<real>(n, value), true));
}

Linear Linear::create(ParamStore& ps, const std::string& name, int in, int out, Rng& rng,
                      bool zero_init) {
    Linear l;
    l.w = zero_init ? init_zeros(ps, name + ".w", {in, out})
                    : init_weight(ps, name + ".w", in, out, rng);
    l.b = init_zeros(ps, name + ".b", {out});
    return l;
}

Tensor Linear::operator()(const Tensor& x) const { return add_rowvec(matmul(x, w), b); }

LayerNorm LayerNorm::create(ParamStore& ps, const std::string& name, int dim) {
    LayerNorm ln;
    ln.g = init_const(ps, name + ".g", {dim}, 1);
    ln.b = init_zeros(ps, name + ".b", {dim});
    return ln;
}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, g, b); }

Tensor ln_plain(const Tensor& x) {
    const int dim = x.shape().back();
    return layer_norm(x, Tensor::full({dim}, 1), Tensor::zeros({dim}));
}

MultiHeadAttention MultiHeadAttention::create(ParamStore& ps, const std::string& name, int dim,
                                              int heads, Rng& rng) {
    SG_CHECK(dim % heads == 0, "attention: dim must be divisible by heads");
    MultiHeadAttention a;
    a.heads = heads;
    a.q = Linear::create(ps, name + ".q", dim, dim, rng);
    a.k = Linear::create(ps, name + ".k", dim, dim, rng);
    a.v = Linear::create(ps, name + ".v", dim, dim, rng);
    a.o = Linear::create(ps, name + ".o", dim, dim, rng);
    return a;
}

Tensor MultiHeadAttention::operator()(const Tensor& x, const Tensor& ctx) const {
    const int dim = x.dim(1);
    const int dh = dim / heads;
    const Tensor Q = q(x), K = k(ctx), V = v(ctx);
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (int h = 0; h < heads; ++h)
        outs.push_back(softmax_attention(slice_cols(Q, h * dh, dh), slice_cols(K, h * dh, dh),
                                         slice_cols(V, h * dh, dh)));
    return o(concat_cols(outs));
}

FeedForward FeedForward::create(ParamStore& ps, const std::string& name, int dim, int hidden,
                                Rng& rng) {
    FeedForward f;
    f.w1 = Linear::create(ps, name + ".w1", dim, hidden, rng);
    f.w2 = Linear::create(ps, name + ".w2", hidden, dim, rng);
    return f;
}

Tensor FeedForward::operator()(const Tensor& x) const { return w2(silu(w1(x))); }

TransformerLayer TransformerLayer::create(ParamStore& ps, const std::string& name, int dim,
                                          int heads, Rng& rng) {
    TransformerLayer t;
    t.ln1 = LayerNorm::create(ps, name + ".ln1", dim);
    t.ln2 = LayerNorm::create(ps, name + ".ln2", dim);
    t.attn = MultiHeadAttention::create(ps, name + ".attn", dim, heads, rng);
    t.ffn = FeedForward::create(ps, name + ".ffn", dim, 4 * dim, rng);
    return t;
}

Tensor TransformerLayer::operator()(const Tensor& x) const {
    const Tensor h = ln1(x);
    const Tensor y = add(x, attn(h, h));
    return add(y, ffn(ln2(y)));
}

Tensor TransformerLayer::cross(const Tensor& x, const Tensor& ctx) const {
    const Tensor y = add(x, attn(ln1(x), ctx));
    return add(y, ffn(ln2(y)));
}

Tensor timestep_features(real t, int dim) {
    SG_CHECK(dim % 2 == 0, "timestep_features: dim must be even");
    const int half = dim / 2;
    std::vector<real> v(static_cast<size_t>(dim));
    for (int k = 0; k < half; ++k) {
        const real freq = std::exp(-std::log(real(10000)) * k / half);
        const real arg = t * 1000 * freq;
        v[k] = std::cos(arg);
        v[half + k] = std::sin(arg);
    }
    return Tensor::from_data({1, dim}, std::move(v));
}

// ------------------------------------------------------------ full model

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    static const std::set<std::string> kKeys = {
        "dim",        "heads",          "blocks",      "lat_res",        "registers",
        "freq_dim",   "ffn_mult",       "view_size",   "patch",          "view_layers",
        "geo_layers", "max_views",      "pos_head_layers", "decoder_hidden"};
    for (const auto& [key, value] : j.items())
        if (!kKeys.count(key)) throw FormatError("model config: unknown key '" + key + "'");
    ModelConfig c;
    const int dim = j.value("dim", 64);
    c.enc.dim = dim;
    c.agg.dim = dim;
    c.enc.heads = c.agg.heads = j.value("heads", 4);
    c.agg.blocks = j.value("blocks", 4);
    c.agg.lat_res = j.value("lat_res", 8);
    c.agg.registers = j.value("registers", 4);
    c.agg.freq_dim = j.value("freq_dim", 64);
    c.agg.ffn_mult = j.value("ffn_mult", 4);
    c.enc.view_size = j.value("view_size", 32);
    c.enc.patch = j.value("patch", 8);
    c.enc.view_layers = j.value("view_layers", 2);
    c.enc.geo_layers = j.value("geo_layers", 2);
    c.enc.max_views = j.value("max_views", 8);
    c.pos_head_layers = j.value("pos_head_layers", 4);
    c.decoder_hidden = j.value("decoder_hidden", 32);
    return c;
}

nlohmann::json ModelConfig::to_json() const {
    return {{"dim", agg.dim},
            {"heads", agg.heads},
            {"blocks", agg.blocks},
            {"lat_res", agg.lat_res},
            {"registers", agg.registers},
            {"freq_dim", agg.freq_dim},
            {"ffn_mult", agg.ffn_mult},
            {"view_size", enc.view_size},
            {"patch", enc.patch},
            {"view_layers", enc.view_layers},
            {"geo_layers", enc.geo_layers},
            {"max_views", enc.max_views},
            {"pos_head_layers", pos_head_layers},
            {"decoder_hidden", decoder_hidden}};
}

SceneGenModel SceneGenModel::create(const ModelConfig& cfg, uint64_t seed) {
    SG_CHECK(cfg.enc.dim == cfg.agg.dim, "model: encoder/aggregator width mismatch");
    SceneGenModel m;
    m.cfg = cfg;
    Rng rng(seed);
    m.visual_enc = VisualEncoder::create(m.params, "view_enc", cfg.enc, rng);
    m.geo_enc = GeoEncoder::create(m.params, "geo_enc", cfg.enc, rng);
    m.null_cond = NullConditioning::create(m.params, "null", cfg.enc.dim, rng);
    m.aggregator = Aggregator::create(m.params, "agg", cfg.agg, rng);
    m.velocity_head = VelocityHead::create(m.params, "vel", cfg.agg.dim, cfg.agg.feat_dim, rng);
    m.position_head =
        PositionHead::create(m.params, "pos_head", cfg.agg.dim, cfg.agg.heads,
                             cfg.pos_head_layers, rng);
    m.decoder = StructureDecoder::create(m.params, "decoder", cfg.agg.feat_dim,
                                         cfg.decoder_hidden, rng);
    return m;
}

std::vector<SceneEncoding> SceneGenModel::encode_views(const SceneSample& scene,
                                                       const std::vector<int>& view_indices) const {
    return encode_scene_views(visual_enc, geo_enc, scene, view_indices, ablation.toggles());
}

SceneEncoding SceneGenModel::null_encoding(int num_assets, int view_tokens,
                                           int geo_tokens) const {
    SceneEncoding enc;
    enc.view_tokens = view_tokens;
    enc.geo_tokens = geo_tokens;
    const ConditioningBundle b = null_cond.bundle(view_tokens, geo_tokens, ablation.toggles());
    enc.per_asset.assign(static_cast<size_t>(num_assets), b);
    return enc;
}

SceneForward SceneGenModel::forward(const std::vector<const AssetLatent*>& latents,
                                    const std::vector<Tensor>& noisy_feats,
                                    const std::vector<real>& t, const SceneEncoding& cond,
                                    int query_index) const {
    const size_t n = latents.size();
    SG_CHECK(noisy_feats.size() == n && t.size() == n && cond.per_asset.size() == n,
             "forward: per-asset input count mismatch");
    std::vector<Tensor> t_embs;
    t_embs.reserve(n);
    for (real ti : t) t_embs.push_back(aggregator.embed_timestep(ti));

    const auto states = aggregator.run(latents, noisy_feats, t_embs, cond.per_asset, query_index,
                                       ablation.ss_to_as);

    SceneForward out;
    std::vector<Tensor> pos_rows;  // non-query assets only, in index order
    for (size_t i = 0; i < n; ++i) {
        const Tensor final_lat = aggregator.final_ln_apply(states[i].latent, t_embs[i]);
        out.velocity.push_back(velocity_head(final_lat));
        if (static_cast<int>(i) == query_index) continue;
        const Tensor final_prefix = aggregator.final_ln_apply(states[i].prefix, t_embs[i]);
        pos_rows.push_back(slice_rows(final_prefix, 0, 1));
    }
    if (!pos_rows.empty()) out.pose_raw = position_head(concat_rows(pos_rows));
    return out;
}

Checkpoint SceneGenModel::to_checkpoint(const std::string& dtype) const {
    Checkpoint ck;
    for (const auto& [name, t] : params.items()) ck.add(name, t.shape(), t.data(), dtype);
    ck.meta["format"] = "scenegen-model";
    ck.meta["model"] = cfg.to_json();
    return ck;
}

void SceneGenModel::load_weights(const Checkpoint& ck) {
    for (const auto& [name, t] : params.items()) {
        const ArrayRecord& rec = ck.at(name);
        SG_CHECK(rec.shape == t.shape(), "load_weights: shape mismatch for " + name);
        Tensor handle = t;  // handles share the node; leaves may be mutated in place
        handle.mutable_data() = rec.data;
    }
}

DecodedStructure decode_structure(const StructureDecoder& dec, const AssetLatent& lat,
                                  const Tensor& feats) {
    SG_CHECK_SHAPE(feats.ndim() == 2 && feats.dim(0) == lat.size() &&
                       feats.dim(1) == kLatentFeatDim,
                   "decode_structure: feature shape mismatch");
    NoGradGuard ng;
    const Tensor logits = dec(feats);
    DecodedStructure out;
    out.shell = latent_to_shell(lat, logits.data());
    out.cloud = occupied_centers(out.shell, {-1, -1, -1}, {1, 1, 1});
    return out;
}

}  // namespace scenegen
