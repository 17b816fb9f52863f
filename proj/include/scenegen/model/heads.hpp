#pragma once

#include "scenegen/model/aggregator.hpp"

namespace scenegen {

// Linear readout from final latent-token states to per-voxel velocity.
struct VelocityHead {
    Linear out;  // [dim, feat_dim], zero-init

    static VelocityHead create(ParamStore& ps, const std::string& name, int dim, int feat_dim,
                               Rng& rng);
    Tensor operator()(const Tensor& latent_state) const;  // [n, dim] -> [n, feat_dim]
};

// Joint pose readout: self-attention over the per-asset position tokens,
// then a linear map to [t(3), q(4), s(1)] per asset.
struct PositionHead {
    std::vector<TransformerLayer> layers;
    Linear out;  // bias starts at the identity pose

    static PositionHead create(ParamStore& ps, const std::string& name, int dim, int heads,
                               int depth, Rng& rng);
    Tensor operator()(const Tensor& position_tokens) const;  // [N, dim] -> [N, 8]
};

// Differentiable pose parts extracted from one raw 8-vector row.
struct PoseGraph {
    Tensor t;  // [1,3]
    Tensor q;  // [1,4], unit norm
    Tensor s;  // [1,1], positive via softplus
};
PoseGraph pose_graph_from_raw(const Tensor& raw_row);
Pose pose_from_raw_values(const std::array<real, 8>& raw);

// Maps latent feature vectors to per-sub-cell occupancy logits; trained
// separately so sampled features decode to a surface shell.
struct StructureDecoder {
    Linear w1, w2;

    static StructureDecoder create(ParamStore& ps, const std::string& name, int feat_dim,
                                   int hidden, Rng& rng);
    Tensor operator()(const Tensor& feats) const;  // [n, feat] -> [n, feat] logits
};

}  // namespace scenegen
