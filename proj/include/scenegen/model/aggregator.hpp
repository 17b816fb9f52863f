#pragma once

#include "scenegen/model/encoders.hpp"

namespace scenegen {

struct AggregatorConfig {
    int dim = 64;
    int heads = 4;
    int blocks = 4;
    int lat_res = 8;
    int feat_dim = kLatentFeatDim;
    int registers = 4;   // register tokens per asset
    int freq_dim = 64;   // sinusoidal timestep feature width
    int ffn_mult = 4;

    int prefix_len() const { return 1 + registers; }  // position token + registers
};

// Per-sublayer adaLN modulation: shift/scale/gate triples for the five
// sublayers of a block, produced from the timestep embedding.
struct BlockModulation {
    Tensor shift[5], scale[5], gate[5];  // each [1, dim]
};

// One aggregation block: asset-local self attention and visual cross
// attention over latent tokens, then scene-global self attention, scene
// context cross attention and a feed-forward over [prefix; latent] rows.
struct AggregatorBlock {
    MultiHeadAttention local_self, local_cross, global_self, global_cross;
    FeedForward ffn;
    Linear ada;  // [dim, 15*dim], zero-init so blocks start as identity

    static AggregatorBlock create(ParamStore& ps, const std::string& name,
                                  const AggregatorConfig& cfg, Rng& rng);
    BlockModulation modulation(const Tensor& t_emb, int dim) const;
};

// Per-asset state threaded through the blocks.
struct AssetState {
    Tensor prefix;  // [prefix_len, dim]: position token then registers
    Tensor latent;  // [n_i, dim]
};

struct Aggregator {
    AggregatorConfig cfg;
    Linear tok_embed;                 // latent feature -> dim
    Tensor pos_x, pos_y, pos_z;       // [lat_res, dim] learned axis tables
    Tensor prefix_tokens;             // [prefix_len, dim] shared assets
    Tensor prefix_tokens_query;       // [prefix_len, dim] the query asset
    Linear t_mlp1, t_mlp2;            // timestep embedder
    std::vector<AggregatorBlock> blocks;
    Linear final_ada;                 // [dim, 2*dim] shift/scale before the heads
    Tensor final_ln_apply(const Tensor& x, const Tensor& t_emb) const;

    static Aggregator create(ParamStore& ps, const std::string& name, const AggregatorConfig& cfg,
                             Rng& rng);

    Tensor embed_latent(const AssetLatent& lat, const Tensor& noisy_feats) const;
    Tensor embed_timestep(real t) const;  // [1, dim]

    // Runs all blocks jointly over the scene; query_index selects which asset
    // receives the query prefix tokens. asset_level_self restricts the scene
    // self-attention sublayer to each asset's own rows (ablation variant).
    std::vector<AssetState> run(const std::vector<const AssetLatent*>& latents,
                                const std::vector<Tensor>& noisy_feats,
                                const std::vector<Tensor>& t_embs,
                                const std::vector<ConditioningBundle>& cond, int query_index,
                                bool asset_level_self = false) const;
};

}  // namespace scenegen
