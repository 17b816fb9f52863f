#pragma once

#include <string>

#include "scenegen/numerics/ops.hpp"
#include "scenegen/numerics/optim.hpp"
#include "scenegen/numerics/rng.hpp"

namespace scenegen {

// Gaussian init scaled to 0.02, the usual transformer weight scale.
Tensor init_weight(ParamStore& ps, const std::string& name, int rows, int cols, Rng& rng,
                   real std_dev = real(0.02));
Tensor init_zeros(ParamStore& ps, const std::string& name, std::vector<int> shape);
Tensor init_const(ParamStore& ps, const std::string& name, std::vector<int> shape, real value);

struct Linear {
    Tensor w;  // [in, out]
    Tensor b;  // [out]

    static Linear create(ParamStore& ps, const std::string& name, int in, int out, Rng& rng,
                         bool zero_init = false);
    Tensor operator()(const Tensor& x) const;  // x [T, in] -> [T, out]
};

struct LayerNorm {
    Tensor g;
    Tensor b;

    static LayerNorm create(ParamStore& ps, const std::string& name, int dim);
    Tensor operator()(const Tensor& x) const;
};

// Layer norm without learnable affine, for modulated (adaLN) sublayers.
Tensor ln_plain(const Tensor& x);

struct MultiHeadAttention {
    int heads = 0;
    Linear q, k, v, o;

    static MultiHeadAttention create(ParamStore& ps, const std::string& name, int dim, int heads,
                                     Rng& rng);
    // Attends x rows to ctx rows (self-attention when ctx is x).
    Tensor operator()(const Tensor& x, const Tensor& ctx) const;
};

struct FeedForward {
    Linear w1, w2;

    static FeedForward create(ParamStore& ps, const std::string& name, int dim, int hidden,
                              Rng& rng);
    Tensor operator()(const Tensor& x) const;
};

// Pre-norm transformer layer: x + attn(ln(x)), x + ffn(ln(x)).
struct TransformerLayer {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    FeedForward ffn;

    static TransformerLayer create(ParamStore& ps, const std::string& name, int dim, int heads,
                                   Rng& rng);
    Tensor operator()(const Tensor& x) const;
    // Cross variant: attention context differs from the residual stream.
    Tensor cross(const Tensor& x, const Tensor& ctx) const;
};

// Sinusoidal features of a scalar timestep (constant, not differentiated).
Tensor timestep_features(real t, int dim);

}  // namespace scenegen
