#include "scenegen/model/encoders.hpp"

namespace scenegen {

VisualEncoder VisualEncoder::create(ParamStore& ps, const std::string& name,
                                    const EncoderConfig& cfg, Rng& rng) {
    VisualEncoder e;
    e.cfg = cfg;
    e.patch_embed = Linear::create(ps, name + ".patch", cfg.patch_feat(), cfg.dim, rng);
    e.pos = init_weight(ps, name + ".pos", cfg.tokens_per_view(), cfg.dim, rng);
    for (int l = 0; l < cfg.view_layers; ++l)
        e.layers.push_back(
            TransformerLayer::create(ps, name + ".l" + std::to_string(l), cfg.dim, cfg.heads, rng));
    e.ln_out = LayerNorm::create(ps, name + ".ln_out", cfg.dim);
    return e;
}

Tensor VisualEncoder::operator()(const Tensor& image) const {
    Tensor x = add(patch_embed(patchify(image, cfg.patch)), pos);
    for (const auto& l : layers) x = l(x);
    return ln_out(x);
}

GeoEncoder GeoEncoder::create(ParamStore& ps, const std::string& name, const EncoderConfig& cfg,
                              Rng& rng) {
    GeoEncoder e;
    e.cfg = cfg;
    e.patch_embed = Linear::create(ps, name + ".patch", cfg.patch_feat(), cfg.dim, rng);
    e.pos = init_weight(ps, name + ".pos", cfg.tokens_per_view(), cfg.dim, rng);
    for (int l = 0; l < cfg.geo_layers; ++l) {
        e.within.push_back(TransformerLayer::create(ps, name + ".within" + std::to_string(l),
                                                    cfg.dim, cfg.heads, rng));
        e.across.push_back(TransformerLayer::create(ps, name + ".across" + std::to_string(l),
                                                    cfg.dim, cfg.heads, rng));
    }
    e.ln_out = LayerNorm::create(ps, name + ".ln_out", cfg.dim);
    return e;
}

Tensor GeoEncoder::operator()(const std::vector<Tensor>& images) const {
    const int nv = static_cast<int>(images.size());
    SG_CHECK(nv >= 1 && nv <= cfg.max_views, "geo encoder: unsupported view count");
    const int tpv = cfg.tokens_per_view();
    std::vector<Tensor> per_view;
    // No view-index embedding: per-view slices stay equivariant to view order.
    for (int v = 0; v < nv; ++v)
        per_view.push_back(add(patch_embed(patchify(images[v], cfg.patch)), pos));
    Tensor all = concat_rows(per_view);
    for (size_t l = 0; l < within.size(); ++l) {
        std::vector<Tensor> parts;
        for (int v = 0; v < nv; ++v) parts.push_back(within[l](slice_rows(all, v * tpv, tpv)));
        all = across[l](concat_rows(parts));
    }
    return ln_out(all);
}

Tensor ConditioningBundle::scene_context() const {
    std::vector<Tensor> parts{asset_visual};
    if (toggles.asset_mask) parts.push_back(asset_mask);
    if (toggles.global_visual) parts.push_back(global_visual);
    if (toggles.global_geo) parts.push_back(global_geo);
    return concat_rows(parts);
}

NullConditioning NullConditioning::create(ParamStore& ps, const std::string& name, int dim,
                                          Rng& rng) {
    NullConditioning n;
    n.asset_visual = init_weight(ps, name + ".asset_visual", 1, dim, rng);
    n.asset_mask = init_weight(ps, name + ".asset_mask", 1, dim, rng);
    n.global_visual = init_weight(ps, name + ".global_visual", 1, dim, rng);
    n.global_geo = init_weight(ps, name + ".global_geo", 1, dim, rng);
    return n;
}

ConditioningBundle NullConditioning::bundle(int view_tokens, int geo_tokens,
                                            const StreamToggles& t) const {
    ConditioningBundle b;
    b.toggles = t;
    b.asset_visual = tile_rows(asset_visual, view_tokens);
    if (t.asset_mask) b.asset_mask = tile_rows(asset_mask, view_tokens);
    if (t.global_visual) b.global_visual = tile_rows(global_visual, view_tokens);
    if (t.global_geo) b.global_geo = tile_rows(global_geo, geo_tokens);
    return b;
}

Tensor view_image(const SceneView& view) {
    return Tensor::from_data({2, view.size, view.size}, view.image);
}

Tensor masked_view_image(const SceneView& view, int asset) {
    const auto& m = view.masks.at(asset);
    const size_t hw = m.size();
    std::vector<real> data(2 * hw);
    for (size_t i = 0; i < hw; ++i) {
        data[i] = view.image[i] * m[i];
        data[hw + i] = view.image[hw + i] * m[i];
    }
    return Tensor::from_data({2, view.size, view.size}, std::move(data));
}

Tensor mask_only_image(const SceneView& view, int asset) {
    // One-channel information: the second channel stays zero so the shared
    // encoder sees the raw mask without a fabricated depth.
    const auto& m = view.masks.at(asset);
    std::vector<real> data(2 * m.size(), 0);
    std::copy(m.begin(), m.end(), data.begin());
    return Tensor::from_data({2, view.size, view.size}, std::move(data));
}

std::vector<SceneEncoding> encode_scene_views(const VisualEncoder& venc, const GeoEncoder& genc,
                                              const SceneSample& scene,
                                              const std::vector<int>& view_indices,
                                              const StreamToggles& toggles) {
    SG_CHECK(!view_indices.empty(), "encode_scene_views: need at least one view");
    for (int v : view_indices)
        SG_CHECK(v >= 0 && v < static_cast<int>(scene.views.size()),
                 "encode_scene_views: view index out of range");
    const int tpv = venc.cfg.tokens_per_view();

    // The geometric encoder runs once over the whole view set; each output
    // conditioning set takes its own per-view slice.
    Tensor geo_joint;
    if (toggles.global_geo) {
        std::vector<Tensor> imgs;
        for (int v : view_indices) imgs.push_back(view_image(scene.views[v]));
        geo_joint = genc(imgs);
    }

    std::vector<SceneEncoding> out;
    for (size_t k = 0; k < view_indices.size(); ++k) {
        const SceneView& view = scene.views[view_indices[k]];
        SceneEncoding enc;
        enc.view_tokens = tpv;
        enc.geo_tokens = tpv;
        Tensor global_visual, global_geo;
        if (toggles.global_visual) global_visual = venc(view_image(view));
        if (toggles.global_geo)
            global_geo = slice_rows(geo_joint, static_cast<int>(k) * tpv, tpv);
        for (int i = 0; i < scene.num_assets(); ++i) {
            ConditioningBundle b;
            b.toggles = toggles;
            b.asset_visual = venc(masked_view_image(view, i));
            if (toggles.asset_mask) b.asset_mask = venc(mask_only_image(view, i));
            b.global_visual = global_visual;
            b.global_geo = global_geo;
            enc.per_asset.push_back(std::move(b));
        }
        out.push_back(std::move(enc));
    }
    return out;
}

}  // namespace scenegen
