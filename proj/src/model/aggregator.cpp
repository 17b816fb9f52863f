#include "scenegen/model/aggregator.hpp"

namespace scenegen {

namespace {

// adaLN modulation: y = x * (1 + scale) + shift, applied row-wise.
Tensor modulate(const Tensor& x, const Tensor& shift, const Tensor& scale) {
    return add_rowvec(mul_rowvec(x, add_const(scale, 1)), shift);
}

}  // namespace

AggregatorBlock AggregatorBlock::create(ParamStore& ps, const std::string& name,
                                        const AggregatorConfig& cfg, Rng& rng) {
    AggregatorBlock b;
    b.local_self = MultiHeadAttention::create(ps, name + ".local_self", cfg.dim, cfg.heads, rng);
    b.local_cross = MultiHeadAttention::create(ps, name + ".local_cross", cfg.dim, cfg.heads, rng);
    b.global_self = MultiHeadAttention::create(ps, name + ".global_self", cfg.dim, cfg.heads, rng);
    b.global_cross =
        MultiHeadAttention::create(ps, name + ".global_cross", cfg.dim, cfg.heads, rng);
    b.ffn = FeedForward::create(ps, name + ".ffn", cfg.dim, cfg.ffn_mult * cfg.dim, rng);
    b.ada = Linear::create(ps, name + ".ada", cfg.dim, 15 * cfg.dim, rng, /*zero_init=*/true);
    return b;
}

BlockModulation AggregatorBlock::modulation(const Tensor& t_emb, int dim) const {
    const Tensor all = ada(silu(t_emb));  // [1, 15*dim]
    BlockModulation m;
    for (int k = 0; k < 5; ++k) {
        m.shift[k] = slice_cols(all, (3 * k + 0) * dim, dim);
        m.scale[k] = slice_cols(all, (3 * k + 1) * dim, dim);
        m.gate[k] = slice_cols(all, (3 * k + 2) * dim, dim);
    }
    return m;
}

Aggregator Aggregator::create(ParamStore& ps, const std::string& name,
                              const AggregatorConfig& cfg, Rng& rng) {
    Aggregator a;
    a.cfg = cfg;
    a.tok_embed = Linear::create(ps, name + ".tok_embed", cfg.feat_dim, cfg.dim, rng);
    a.pos_x = init_weight(ps, name + ".pos_x", cfg.lat_res, cfg.dim, rng);
    a.pos_y = init_weight(ps, name + ".pos_y", cfg.lat_res, cfg.dim, rng);
    a.pos_z = init_weight(ps, name + ".pos_z", cfg.lat_res, cfg.dim, rng);
    a.prefix_tokens = init_weight(ps, name + ".prefix", cfg.prefix_len(), cfg.dim, rng);
    a.prefix_tokens_query = init_weight(ps, name + ".prefix_query", cfg.prefix_len(), cfg.dim, rng);
    a.t_mlp1 = Linear::create(ps, name + ".t_mlp1", cfg.freq_dim, cfg.dim, rng);
    a.t_mlp2 = Linear::create(ps, name + ".t_mlp2", cfg.dim, cfg.dim, rng);
    for (int b = 0; b < cfg.blocks; ++b)
        a.blocks.push_back(
            AggregatorBlock::create(ps, name + ".block" + std::to_string(b), cfg, rng));
    a.final_ada = Linear::create(ps, name + ".final_ada", cfg.dim, 2 * cfg.dim, rng,
                                 /*zero_init=*/true);
    return a;
}

Tensor Aggregator::embed_latent(const AssetLatent& lat, const Tensor& noisy_feats) const {
    SG_CHECK(lat.res == cfg.lat_res, "embed_latent: latent resolution mismatch");
    SG_CHECK_SHAPE(noisy_feats.dim(0) == lat.size() && noisy_feats.dim(1) == cfg.feat_dim,
                   "embed_latent: feature shape mismatch");
    std::vector<int> xs, ys, zs;
    xs.reserve(lat.coords.size());
    for (const auto& c : lat.coords) {
        xs.push_back(c[0]);
        ys.push_back(c[1]);
        zs.push_back(c[2]);
    }
    Tensor x = tok_embed(noisy_feats);
    x = add(x, rows_from_table(pos_x, xs));
    x = add(x, rows_from_table(pos_y, ys));
    x = add(x, rows_from_table(pos_z, zs));
    return x;
}

Tensor Aggregator::embed_timestep(real t) const {
    const Tensor f = timestep_features(t, cfg.freq_dim);
    return t_mlp2(silu(t_mlp1(f)));
}

Tensor Aggregator::final_ln_apply(const Tensor& x, const Tensor& t_emb) const {
    const Tensor ss = final_ada(silu(t_emb));  // [1, 2*dim]
    const Tensor shift = slice_cols(ss, 0, cfg.dim);
    const Tensor scale = slice_cols(ss, cfg.dim, cfg.dim);
    return modulate(ln_plain(x), shift, scale);
}

std::vector<AssetState> Aggregator::run(const std::vector<const AssetLatent*>& latents,
                                        const std::vector<Tensor>& noisy_feats,
                                        const std::vector<Tensor>& t_embs,
                                        const std::vector<ConditioningBundle>& cond,
                                        int query_index, bool asset_level_self) const {
    const int n = static_cast<int>(latents.size());
    SG_CHECK(n >= 1, "aggregator: empty scene");
    SG_CHECK(static_cast<int>(noisy_feats.size()) == n && static_cast<int>(t_embs.size()) == n &&
                 static_cast<int>(cond.size()) == n,
             "aggregator: per-asset input count mismatch");
    SG_CHECK(query_index >= 0 && query_index < n, "aggregator: query index out of range");
    const int P = cfg.prefix_len();

    std::vector<AssetState> st(n);
    std::vector<Tensor> ctx(n);
    for (int i = 0; i < n; ++i) {
        st[i].prefix = i == query_index ? prefix_tokens_query : prefix_tokens;
        st[i].latent = embed_latent(*latents[i], noisy_feats[i]);
        ctx[i] = cond[i].scene_context();
    }

    for (const auto& block : blocks) {
        std::vector<BlockModulation> mods;
        mods.reserve(n);
        for (int i = 0; i < n; ++i) mods.push_back(block.modulation(t_embs[i], cfg.dim));

        // Local stage over latent tokens only.
        for (int i = 0; i < n; ++i) {
            Tensor h = modulate(ln_plain(st[i].latent), mods[i].shift[0], mods[i].scale[0]);
            st[i].latent = add(st[i].latent, mul_rowvec(block.local_self(h, h), mods[i].gate[0]));
            h = modulate(ln_plain(st[i].latent), mods[i].shift[1], mods[i].scale[1]);
            st[i].latent = add(
                st[i].latent,
                mul_rowvec(block.local_cross(h, cond[i].asset_visual), mods[i].gate[1]));
        }

        // Global stage over [prefix; latent] rows of every asset jointly. The
        // ablated variant keeps the weights but attends within each asset.
        std::vector<Tensor> seq(n), modded(n);
        for (int i = 0; i < n; ++i) {
            seq[i] = concat_rows({st[i].prefix, st[i].latent});
            modded[i] = modulate(ln_plain(seq[i]), mods[i].shift[2], mods[i].scale[2]);
        }
        if (asset_level_self) {
            for (int i = 0; i < n; ++i)
                seq[i] = add(seq[i],
                             mul_rowvec(block.global_self(modded[i], modded[i]), mods[i].gate[2]));
        } else {
            const Tensor joint = block.global_self(concat_rows(modded), concat_rows(modded));
            int row = 0;
            for (int i = 0; i < n; ++i) {
                const int len = P + latents[i]->size();
                seq[i] = add(seq[i], mul_rowvec(slice_rows(joint, row, len), mods[i].gate[2]));
                row += len;
            }
        }
        for (int i = 0; i < n; ++i) {
            Tensor h = modulate(ln_plain(seq[i]), mods[i].shift[3], mods[i].scale[3]);
            seq[i] = add(seq[i], mul_rowvec(block.global_cross(h, ctx[i]), mods[i].gate[3]));
            h = modulate(ln_plain(seq[i]), mods[i].shift[4], mods[i].scale[4]);
            seq[i] = add(seq[i], mul_rowvec(block.ffn(h), mods[i].gate[4]));
            st[i].prefix = slice_rows(seq[i], 0, P);
            st[i].latent = slice_rows(seq[i], P, latents[i]->size());
        }
    }
    return st;
}

}  // namespace scenegen
