#include "scenegen/model/heads.hpp"

#include <cmath>

namespace scenegen {

VelocityHead VelocityHead::create(ParamStore& ps, const std::string& name, int dim, int feat_dim,
                                  Rng& rng) {
    VelocityHead h;
    h.out = Linear::create(ps, name + ".out", dim, feat_dim, rng, /*zero_init=*/true);
    return h;
}

Tensor VelocityHead::operator()(const Tensor& latent_state) const { return out(latent_state); }

PositionHead PositionHead::create(ParamStore& ps, const std::string& name, int dim, int heads,
                                  int depth, Rng& rng) {
    PositionHead h;
    for (int l = 0; l < depth; ++l)
        h.layers.push_back(
            TransformerLayer::create(ps, name + ".l" + std::to_string(l), dim, heads, rng));
    h.out = Linear::create(ps, name + ".out", dim, 8, rng, /*zero_init=*/true);
    // Start at the identity pose: zero translation, unit quaternion, and a raw
    // scale whose softplus is a typical asset scale.
    auto& b = h.out.b.mutable_data();
    b[3] = 1;                                        // q.w
    b[7] = std::log(std::exp(real(0.25)) - real(1));  // softplus^-1(0.25)
    return h;
}

Tensor PositionHead::operator()(const Tensor& position_tokens) const {
    Tensor x = position_tokens;
    for (const auto& l : layers) x = l(x);
    return out(x);
}

PoseGraph pose_graph_from_raw(const Tensor& raw_row) {
    SG_CHECK_SHAPE(raw_row.ndim() == 2 && raw_row.dim(0) == 1 && raw_row.dim(1) == 8,
                   "pose_graph_from_raw: [1,8] row expected");
    PoseGraph g;
    g.t = slice_cols(raw_row, 0, 3);
    const Tensor qraw = slice_cols(raw_row, 3, 4);
    const Tensor nn = add_const(dot(qraw, qraw), real(1e-24));
    const Tensor inv = div(Tensor::scalar(1), sqrt(nn));
    g.q = scale(qraw, inv);
    g.s = add_const(softplus(slice_cols(raw_row, 7, 1)), real(1e-12));
    return g;
}

Pose pose_from_raw_values(const std::array<real, 8>& raw) {
    Pose p;
    p.t = {raw[0], raw[1], raw[2]};
    const Quat q{raw[3], raw[4], raw[5], raw[6]};
    // A vanishing raw quaternion has no direction; fall back to the identity
    // so arbitrary head outputs always yield a valid pose.
    p.q = quat_norm(q) < real(1e-12) ? Quat{1, 0, 0, 0} : quat_normalize(q);
    const real x = raw[7];
    p.s = (x > real(30) ? x : std::log1p(std::exp(std::min(x, real(30))))) + real(1e-12);
    return p;
}

StructureDecoder StructureDecoder::create(ParamStore& ps, const std::string& name, int feat_dim,
                                          int hidden, Rng& rng) {
    StructureDecoder d;
    d.w1 = Linear::create(ps, name + ".w1", feat_dim, hidden, rng);
    d.w2 = Linear::create(ps, name + ".w2", hidden, feat_dim, rng);
    return d;
}

Tensor StructureDecoder::operator()(const Tensor& feats) const { return w2(silu(w1(feats))); }

}  // namespace scenegen
