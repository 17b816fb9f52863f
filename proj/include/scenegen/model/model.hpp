#pragma once

#include "scenegen/model/heads.hpp"
#include "scenegen/numerics/checkpoint.hpp"

namespace scenegen {

struct ModelConfig {
    EncoderConfig enc;
    AggregatorConfig agg;
    int pos_head_layers = 4;
    int decoder_hidden = 32;

    static ModelConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

// Architecture ablation switches. The drop_* flags remove one conditioning
// stream everywhere (lengths shrink accordingly); ss_to_as replaces the
// scene-level self-attention with per-asset self-attention.
struct AblationFlags {
    bool drop_geo = false;
    bool drop_global_v = false;
    bool drop_mask = false;
    bool ss_to_as = false;

    StreamToggles toggles() const {
        StreamToggles t;
        t.asset_mask = !drop_mask;
        t.global_visual = !drop_global_v;
        t.global_geo = !drop_geo;
        return t;
    }
    bool any() const { return drop_geo || drop_global_v || drop_mask || ss_to_as; }
};

// Result of one denoising pass over a scene. Raw poses cover only the
// non-query assets in index order (the query is pinned to the identity), so
// pose_raw is [N-1, 8] and stays undefined for single-asset scenes.
struct SceneForward {
    std::vector<Tensor> velocity;  // per asset [n_i, feat]
    Tensor pose_raw;
};

struct SceneGenModel {
    ModelConfig cfg;
    AblationFlags ablation;  // behavioural variant, not part of the weights
    ParamStore params;
    VisualEncoder visual_enc;
    GeoEncoder geo_enc;
    NullConditioning null_cond;
    Aggregator aggregator;
    VelocityHead velocity_head;
    PositionHead position_head;
    StructureDecoder decoder;

    static SceneGenModel create(const ModelConfig& cfg, uint64_t seed);

    // One conditioning set per listed view; the geometric stream is encoded
    // jointly across the whole list and sliced per view.
    std::vector<SceneEncoding> encode_views(const SceneSample& scene,
                                            const std::vector<int>& view_indices) const;

    // Replaces every stream with its learned null token, keeping lengths.
    SceneEncoding null_encoding(int num_assets, int view_tokens, int geo_tokens) const;

    SceneForward forward(const std::vector<const AssetLatent*>& latents,
                         const std::vector<Tensor>& noisy_feats, const std::vector<real>& t,
                         const SceneEncoding& cond, int query_index) const;

    // Weight (de)serialization; dtype "f8" round-trips exactly.
    Checkpoint to_checkpoint(const std::string& dtype = "f4") const;
    void load_weights(const Checkpoint& ck);
};

// The ablated variant shares weights; only the forward behaviour changes.
inline void apply_ablation(SceneGenModel& m, const AblationFlags& flags) { m.ablation = flags; }

// Decoded structure of one sampled asset: occupancy logits thresholded at
// zero, reassembled into the double-resolution shell grid, plus the occupied
// cell centers as a cloud in the canonical [-1,1] frame.
struct DecodedStructure {
    VoxelGrid shell;
    PointCloud cloud;
};
DecodedStructure decode_structure(const StructureDecoder& dec, const AssetLatent& lat,
                                  const Tensor& feats);

}  // namespace scenegen
