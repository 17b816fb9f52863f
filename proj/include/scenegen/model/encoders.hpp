#pragma once

#include "scenegen/model/layers.hpp"
#include "scenegen/synth/scene.hpp"

namespace scenegen {

struct EncoderConfig {
    int view_size = 32;
    int patch = 8;
    int channels = 2;  // silhouette + depth
    int dim = 64;
    int heads = 4;
    int view_layers = 2;  // self-attention depth of the visual encoder
    int geo_layers = 2;   // within/cross alternation pairs of the geometric encoder
    int max_views = 8;

    int tokens_per_view() const {
        const int g = view_size / patch;
        return g * g;
    }
    int patch_feat() const { return patch * patch * channels; }
};

// Patch-embedding visual encoder, shared across the image, masked-image and
// mask-only streams.
struct VisualEncoder {
    EncoderConfig cfg;
    Linear patch_embed;
    Tensor pos;  // [tokens_per_view, dim]
    std::vector<TransformerLayer> layers;
    LayerNorm ln_out;

    static VisualEncoder create(ParamStore& ps, const std::string& name, const EncoderConfig& cfg,
                                Rng& rng);
    Tensor operator()(const Tensor& image) const;  // [ch,H,W] -> [tokens, dim]
};

// Multi-view geometric encoder refined by alternating within-view and
// cross-view attention. Views carry no index embedding, so the per-view output
// slices are equivariant to view order and unchanged by duplicated views.
struct GeoEncoder {
    EncoderConfig cfg;
    Linear patch_embed;
    Tensor pos;  // [tokens_per_view, dim]
    std::vector<TransformerLayer> within;
    std::vector<TransformerLayer> across;
    LayerNorm ln_out;

    static GeoEncoder create(ParamStore& ps, const std::string& name, const EncoderConfig& cfg,
                             Rng& rng);
    Tensor operator()(const std::vector<Tensor>& images) const;  // -> [views*tokens, dim]
};

// Which conditioning streams are active; ablations switch streams off.
struct StreamToggles {
    bool asset_mask = true;
    bool global_visual = true;
    bool global_geo = true;
};

// Conditioning for one asset. Global streams are shared tensors across the
// scene (computed once); per-asset streams differ.
struct ConditioningBundle {
    Tensor asset_visual;   // encoder on the asset-masked image
    Tensor asset_mask;     // encoder on the mask alone
    Tensor global_visual;  // encoder on the full image
    Tensor global_geo;     // this view's slice of the joint multi-view encoding
    StreamToggles toggles;

    // Scene-level context: active streams concatenated in the order above.
    Tensor scene_context() const;
};

// Learned stand-in tokens used for the unconditional branch of guidance.
struct NullConditioning {
    Tensor asset_visual, asset_mask, global_visual, global_geo;  // each [1, dim]

    static NullConditioning create(ParamStore& ps, const std::string& name, int dim, Rng& rng);
    // Bundle with every stream replaced by its tiled null token.
    ConditioningBundle bundle(int view_tokens, int geo_tokens, const StreamToggles& t) const;
};

// Image assembly from rendered views.
Tensor view_image(const SceneView& view);                    // [2,H,W]
Tensor masked_view_image(const SceneView& view, int asset);  // image * mask
Tensor mask_only_image(const SceneView& view, int asset);    // mask channel + zero channel

struct SceneEncoding {
    std::vector<ConditioningBundle> per_asset;
    int view_tokens = 0;
    int geo_tokens = 0;
};

// Runs the encoders once and produces one conditioning set per requested view:
// view k drives the visual streams of set k, while its geometric stream is the
// k-th per-view slice of the joint multi-view encoding.
std::vector<SceneEncoding> encode_scene_views(const VisualEncoder& venc, const GeoEncoder& genc,
                                              const SceneSample& scene,
                                              const std::vector<int>& view_indices,
                                              const StreamToggles& toggles);

}  // namespace scenegen
