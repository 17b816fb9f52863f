#include "scenegen/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace scenegen {

namespace {

NodePtr fresh(std::vector<int> shape) {
    auto n = std::make_shared<TensorNode>();
    n->shape = std::move(shape);
    n->leaf = false;
    int64_t numel = 1;
    for (int d : n->shape) numel *= d;
    n->value.resize(static_cast<size_t>(numel));
    return n;
}

// Attach inputs + backward rule if grad mode is on and any input needs it.
Tensor finish(NodePtr out, std::vector<NodePtr> inputs, std::function<void(TensorNode&)> bp) {
    if (grad_enabled()) {
        bool rg = false;
        for (const auto& in : inputs) rg = rg || in->requires_grad;
        if (rg) {
            out->requires_grad = true;
            out->inputs = std::move(inputs);
            out->backprop = std::move(bp);
        }
    }
    return Tensor(out);
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    SG_CHECK_SHAPE(a.shape() == b.shape(), std::string(op) + ": shape mismatch");
}

int last_dim(const Tensor& t) { return t.shape().back(); }

// grad may be empty when that input does not require grad
void acc(std::vector<real>& grad, size_t i, real v) {
    if (!grad.empty()) grad[i] += v;
}

}  // namespace

// ---------------------------------------------------------------- gemm kernels

void gemm(const real* A, const real* B, real* C, int m, int k, int n, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        real* crow = C + static_cast<size_t>(i) * n;
        if (!accumulate) std::fill(crow, crow + n, real(0));
        const real* arow = A + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const real a = arow[p];
            const real* brow = B + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
}

void gemm_at_b(const real* A, const real* B, real* C, int m, int k, int n, bool accumulate) {
    if (!accumulate) std::fill(C, C + static_cast<size_t>(k) * n, real(0));
    for (int i = 0; i < m; ++i) {
        const real* arow = A + static_cast<size_t>(i) * k;
        const real* brow = B + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; ++p) {
            const real a = arow[p];
            real* crow = C + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
}

void gemm_a_bt(const real* A, const real* B, real* C, int m, int n, int k, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        const real* arow = A + static_cast<size_t>(i) * n;
        real* crow = C + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; ++p) {
            const real* brow = B + static_cast<size_t>(p) * n;
            real s = 0;
            for (int j = 0; j < n; ++j) s += arow[j] * brow[j];
            crow[p] = accumulate ? crow[p] + s : s;
        }
    }
}

// ---------------------------------------------------------------- elementwise

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    auto out = fresh(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] + bv[i];
    return finish(out, {a.node_ptr(), b.node_ptr()}, [](TensorNode& n) {
        for (size_t i = 0; i < n.grad.size(); ++i) {
            acc(n.inputs[0]->grad, i, n.grad[i]);
            acc(n.inputs[1]->grad, i, n.grad[i]);
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    auto out = fresh(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] - bv[i];
    return finish(out, {a.node_ptr(), b.node_ptr()}, [](TensorNode& n) {
        for (size_t i = 0; i < n.grad.size(); ++i) {
            acc(n.inputs[0]->grad, i, n.grad[i]);
            acc(n.inputs[1]->grad, i, -n.grad[i]);
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    auto out = fresh(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * bv[i];
    return finish(out, {a.node_ptr(), b.node_ptr()}, [](TensorNode& n) {
        const auto& av = n.inputs[0]->value;
        const auto& bv = n.inputs[1]->value;
        for (size_t i = 0; i < n.grad.size(); ++i) {
            acc(n.inputs[0]->grad, i, n.grad[i] * bv[i]);
            acc(n.inputs[1]->grad, i, n.grad[i] * av[i]);
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "div");
    auto out = fresh(a.shape());
    const auto& av = a.data();
    const auto& bv = b.data();
    for (size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] / bv[i];
    return finish(out, {a.node_ptr(), b.node_ptr()}, [](TensorNode& n) {
        const auto& av = n.inputs[0]->value;
        const auto& bv = n.inputs[1]->value;
        for (size_t i = 0; i < n.grad.size(); ++i) {
            acc(n.inputs[0]->grad, i, n.grad[i] / bv[i]);
            acc(n.inputs[1]->grad, i, -n.grad[i] * av[i] / (bv[i] * bv[i]));
        }
    });
}

Tensor neg(const Tensor& a) { return mul_const(a, real(-1)); }

Tensor add_const(const Tensor& a, real c) {
    auto out = fresh(a.shape());
    const auto& av = a.data();
    for (size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] + c;
    return finish(out, {a.node_ptr()}, [](TensorNode& n) {
        for (size_t i = 0; i < n.grad.size(); ++i) acc(n.inputs[0]->grad, i, n.grad[i]);
    });
}

Tensor mul_const(const Tensor& a, real c) {
    auto out = fresh(a.shape());
    const auto& av = a.data();
    for (size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * c;
    return finish(out, {a.node_ptr()}, [c](TensorNode& n) {
        for (size_t i = 0; i < n.grad.size(); ++i) acc(n.inputs[0]->grad, i, c * n.grad[i]);
    });
}

Tensor scale(const Tensor& a, const Tensor& s) {
    SG_CHECK_SHAPE(s.numel() == 1, "scale: scalar tensor expected");
    auto out = fresh(a.shape());
    const auto& av = a.data();
    const real sv = s.data()[0];
    for (size_t i = 0; i < av.size(); ++i) out->value[i] = av[i] * sv;
    return finish(out, {a.node_ptr(), s.node_ptr()}, [](TensorNode& n) {
        const auto& av = n.inputs[0]->value;
        const real sv = n.inputs[1]->value[0];
        real ds = 0;
        for (size_t i = 0; i < n.grad.size(); ++i) {
            acc(n.inputs[0]->grad, i, sv * n.grad[i]);
            ds += n.grad[i] * av[i];
        }
        acc(n.inputs[1]->grad, 0, ds);
    });
}

// ---------------------------------------------------------------- unary maps

namespace {
template <class F, class G>
Tensor unary(const Tensor& a, F fwd, G dval) {
    auto out = fresh(a.shape());
    const auto& av = a.data();
    for (size_t i = 0; i < av.size(); ++i) out->value[i] = fwd(av[i]);
    return finish(out, {a.node_ptr()}, [dval](TensorNode& n) {
        const auto& x = n.inputs[0]->value;
        for (size_t i = 0; i < n.grad.size(); ++i)
            acc(n.inputs[0]->grad, i, n.grad[i] * dval(x[i], n.value[i]));
    });
}

real sigm(real x) { return real(1) / (real(1) + std::exp(-x)); }
}  // namespace

Tensor exp(const Tensor& a) {
    return unary(a, [](real x) { return std::exp(x); }, [](real, real y) { return y; });
}

Tensor log(const Tensor& a) {
    return unary(a, [](real x) { return std::log(x); }, [](real x, real) { return real(1) / x; });
}

Tensor sqrt(const Tensor& a) {
    return unary(a, [](real x) { return std::sqrt(x); },
                 [](real, real y) { return real(0.5) / y; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(a, [](real x) { return sigm(x); },
                 [](real, real y) { return y * (real(1) - y); });
}

Tensor silu(const Tensor& a) {
    return unary(a, [](real x) { return x * sigm(x); },
                 [](real x, real) {
                     const real s = sigm(x);
                     return s * (real(1) + x * (real(1) - s));
                 });
}

Tensor softplus(const Tensor& a) {
    // log(1+e^x), computed stably; derivative is sigmoid(x).
    return unary(a,
                 [](real x) { return x > real(30) ? x : std::log1p(std::exp(std::min(x, real(30)))); },
                 [](real x, real) { return sigm(x); });
}

// ---------------------------------------------------------------- reductions

Tensor sum(const Tensor& a) {
    auto out = fresh({1});
    real s = 0;
    for (real v : a.data()) s += v;
    out->value[0] = s;
    return finish(out, {a.node_ptr()}, [](TensorNode& n) {
        const real g = n.grad[0];
        auto& ig = n.inputs[0]->grad;
        for (size_t i = 0; i < ig.size(); ++i) ig[i] += g;
    });
}

Tensor mean(const Tensor& a) {
    SG_CHECK_SHAPE(a.numel() > 0, "mean: empty tensor");
    return mul_const(sum(a), real(1) / static_cast<real>(a.numel()));
}

Tensor dot(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "dot");
    auto out = fresh({1});
    real s = 0;
    for (size_t i = 0; i < a.data().size(); ++i) s += a.data()[i] * b.data()[i];
    out->value[0] = s;
    return finish(out, {a.node_ptr(), b.node_ptr()}, [](TensorNode& n) {
        const real g = n.grad[0];
        const auto& av = n.inputs[0]->value;
        const auto& bv = n.inputs[1]->value;
        for (size_t i = 0; i < av.size(); ++i) {
            acc(n.inputs[0]->grad, i, g * bv[i]);
            acc(n.inputs[1]->grad, i, g * av[i]);
        }
    });
}

// ---------------------------------------------------------------- matrix ops

Tensor matmul(const Tensor& a, const Tensor& b) {
    SG_CHECK_SHAPE(a.ndim() == 2 && b.ndim() == 2, "matmul: 2-D tensors expected");
    SG_CHECK_SHAPE(a.dim(1) == b.dim(0), "matmul: inner dimensions disagree");
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto out = fresh({m, n});
    gemm(a.data().data(), b.data().data(), out->value.data(), m, k, n, false);
    return finish(out, {a.node_ptr(), b.node_ptr()}, [m, k, n](TensorNode& nd) {
        const real* A = nd.inputs[0]->value.data();
        const real* B = nd.inputs[1]->value.data();
        if (!nd.inputs[0]->grad.empty())
            gemm_a_bt(nd.grad.data(), B, nd.inputs[0]->grad.data(), m, n, k, true);
        if (!nd.inputs[1]->grad.empty())
            gemm_at_b(A, nd.grad.data(), nd.inputs[1]->grad.data(), m, k, n, true);
    });
}

Tensor transpose(const Tensor& a) {
    SG_CHECK_SHAPE(a.ndim() == 2, "transpose: 2-D tensor expected");
    const int m = a.dim(0), n = a.dim(1);
    auto out = fresh({n, m});
    const auto& av = a.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out->value[static_cast<size_t>(j) * m + i] = av[static_cast<size_t>(i) * n + j];
    return finish(out, {a.node_ptr()}, [m, n](TensorNode& nd) {
        auto& ig = nd.inputs[0]->grad;
        if (ig.empty()) return;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                ig[static_cast<size_t>(i) * n + j] += nd.grad[static_cast<size_t>(j) * m + i];
    });
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
    SG_CHECK_SHAPE(m.ndim() == 2 && v.numel() == m.dim(1), "add_rowvec: width mismatch");
    const int rows = m.dim(0), cols = m.dim(1);
    auto out = fresh(m.shape());
    const auto& mv = m.data();
    const auto& vv = v.data();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out->value[static_cast<size_t>(r) * cols + c] = mv[static_cast<size_t>(r) * cols + c] + vv[c];
    return finish(out, {m.node_ptr(), v.node_ptr()}, [rows, cols](TensorNode& nd) {
        auto& mg = nd.inputs[0]->grad;
        auto& vg = nd.inputs[1]->grad;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                const real g = nd.grad[static_cast<size_t>(r) * cols + c];
                if (!mg.empty()) mg[static_cast<size_t>(r) * cols + c] += g;
                if (!vg.empty()) vg[c] += g;
            }
    });
}

Tensor mul_rowvec(const Tensor& m, const Tensor& v) {
    SG_CHECK_SHAPE(m.ndim() == 2 && v.numel() == m.dim(1), "mul_rowvec: width mismatch");
    const int rows = m.dim(0), cols = m.dim(1);
    auto out = fresh(m.shape());
    const auto& mv = m.data();
    const auto& vv = v.data();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out->value[static_cast<size_t>(r) * cols + c] = mv[static_cast<size_t>(r) * cols + c] * vv[c];
    return finish(out, {m.node_ptr(), v.node_ptr()}, [rows, cols](TensorNode& nd) {
        const auto& mv = nd.inputs[0]->value;
        const auto& vv = nd.inputs[1]->value;
        auto& mg = nd.inputs[0]->grad;
        auto& vg = nd.inputs[1]->grad;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                const size_t i = static_cast<size_t>(r) * cols + c;
                const real g = nd.grad[i];
                if (!mg.empty()) mg[i] += g * vv[c];
                if (!vg.empty()) vg[c] += g * mv[i];
            }
    });
}

// ---------------------------------------------------------------- shape ops

Tensor reshape(const Tensor& a, std::vector<int> shape) {
    int64_t n = 1;
    for (int d : shape) n *= d;
    SG_CHECK_SHAPE(n == a.numel(), "reshape: numel mismatch");
    auto out = fresh(std::move(shape));
    out->value = a.data();
    return finish(out, {a.node_ptr()}, [](TensorNode& nd) {
        auto& ig = nd.inputs[0]->grad;
        if (ig.empty()) return;
        for (size_t i = 0; i < nd.grad.size(); ++i) ig[i] += nd.grad[i];
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    SG_CHECK_SHAPE(!parts.empty(), "concat_rows: empty list");
    const int cols = parts[0].dim(1);
    int rows = 0;
    for (const auto& p : parts) {
        SG_CHECK_SHAPE(p.ndim() == 2 && p.dim(1) == cols, "concat_rows: width mismatch");
        rows += p.dim(0);
    }
    auto out = fresh({rows, cols});
    std::vector<NodePtr> inputs;
    size_t off = 0;
    for (const auto& p : parts) {
        std::memcpy(out->value.data() + off, p.data().data(), p.data().size() * sizeof(real));
        off += p.data().size();
        inputs.push_back(p.node_ptr());
    }
    return finish(out, std::move(inputs), [](TensorNode& nd) {
        size_t off = 0;
        for (auto& in : nd.inputs) {
            const size_t sz = in->value.size();
            if (!in->grad.empty())
                for (size_t i = 0; i < sz; ++i) in->grad[i] += nd.grad[off + i];
            off += sz;
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    SG_CHECK_SHAPE(!parts.empty(), "concat_cols: empty list");
    const int rows = parts[0].dim(0);
    int cols = 0;
    for (const auto& p : parts) {
        SG_CHECK_SHAPE(p.ndim() == 2 && p.dim(0) == rows, "concat_cols: height mismatch");
        cols += p.dim(1);
    }
    auto out = fresh({rows, cols});
    std::vector<NodePtr> inputs;
    int col0 = 0;
    for (const auto& p : parts) {
        const int pc = p.dim(1);
        for (int r = 0; r < rows; ++r)
            std::memcpy(out->value.data() + static_cast<size_t>(r) * cols + col0,
                        p.data().data() + static_cast<size_t>(r) * pc,
                        static_cast<size_t>(pc) * sizeof(real));
        col0 += pc;
        inputs.push_back(p.node_ptr());
    }
    return finish(out, std::move(inputs), [rows, cols](TensorNode& nd) {
        int col0 = 0;
        for (auto& in : nd.inputs) {
            const int pc = in->shape[1];
            if (!in->grad.empty())
                for (int r = 0; r < rows; ++r)
                    for (int c = 0; c < pc; ++c)
                        in->grad[static_cast<size_t>(r) * pc + c] +=
                            nd.grad[static_cast<size_t>(r) * cols + col0 + c];
            col0 += pc;
        }
    });
}

Tensor slice_rows(const Tensor& a, int row0, int nrows) {
    SG_CHECK_SHAPE(a.ndim() == 2 && row0 >= 0 && row0 + nrows <= a.dim(0), "slice_rows: out of range");
    const int cols = a.dim(1);
    auto out = fresh({nrows, cols});
    const size_t off = static_cast<size_t>(row0) * cols;
    std::memcpy(out->value.data(), a.data().data() + off, out->value.size() * sizeof(real));
    return finish(out, {a.node_ptr()}, [off](TensorNode& nd) {
        auto& ig = nd.inputs[0]->grad;
        if (ig.empty()) return;
        for (size_t i = 0; i < nd.grad.size(); ++i) ig[off + i] += nd.grad[i];
    });
}

Tensor slice_cols(const Tensor& a, int col0, int ncols) {
    SG_CHECK_SHAPE(a.ndim() == 2 && col0 >= 0 && col0 + ncols <= a.dim(1), "slice_cols: out of range");
    const int rows = a.dim(0), cols = a.dim(1);
    auto out = fresh({rows, ncols});
    const auto& av = a.data();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < ncols; ++c)
            out->value[static_cast<size_t>(r) * ncols + c] = av[static_cast<size_t>(r) * cols + col0 + c];
    return finish(out, {a.node_ptr()}, [rows, cols, col0, ncols](TensorNode& nd) {
        auto& ig = nd.inputs[0]->grad;
        if (ig.empty()) return;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < ncols; ++c)
                ig[static_cast<size_t>(r) * cols + col0 + c] += nd.grad[static_cast<size_t>(r) * ncols + c];
    });
}

Tensor tile_rows(const Tensor& v, int n) {
    const int cols = static_cast<int>(v.numel());
    SG_CHECK_SHAPE(n >= 1, "tile_rows: n must be >= 1");
    auto out = fresh({n, cols});
    for (int r = 0; r < n; ++r)
        std::memcpy(out->value.data() + static_cast<size_t>(r) * cols, v.data().data(),
                    static_cast<size_t>(cols) * sizeof(real));
    return finish(out, {v.node_ptr()}, [n, cols](TensorNode& nd) {
        auto& ig = nd.inputs[0]->grad;
        if (ig.empty()) return;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < cols; ++c) ig[c] += nd.grad[static_cast<size_t>(r) * cols + c];
    });
}

// ---------------------------------------------------------------- nn blocks

Tensor softmax_rows(const Tensor& a) {
    SG_CHECK_SHAPE(a.ndim() >= 1 && last_dim(a) > 0, "softmax_rows: empty last dim");
    const int cols = last_dim(a);
    const int rows = static_cast<int>(a.numel() / cols);
    auto out = fresh(a.shape());
    const auto& av = a.data();
    for (int r = 0; r < rows; ++r) {
        const real* x = av.data() + static_cast<size_t>(r) * cols;
        real* y = out->value.data() + static_cast<size_t>(r) * cols;
        real mx = x[0];
        for (int c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
        real z = 0;
        for (int c = 0; c < cols; ++c) {
            y[c] = std::exp(x[c] - mx);
            z += y[c];
        }
        const real inv = real(1) / z;
        for (int c = 0; c < cols; ++c) y[c] *= inv;
    }
    return finish(out, {a.node_ptr()}, [rows, cols](TensorNode& nd) {
        auto& ig = nd.inputs[0]->grad;
        if (ig.empty()) return;
        for (int r = 0; r < rows; ++r) {
            const real* y = nd.value.data() + static_cast<size_t>(r) * cols;
            const real* g = nd.grad.data() + static_cast<size_t>(r) * cols;
            real dot = 0;
            for (int c = 0; c < cols; ++c) dot += g[c] * y[c];
            real* dst = ig.data() + static_cast<size_t>(r) * cols;
            for (int c = 0; c < cols; ++c) dst[c] += y[c] * (g[c] - dot);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
    const int cols = last_dim(x);
    SG_CHECK_SHAPE(gain.numel() == cols && bias.numel() == cols, "layer_norm: affine width mismatch");
    constexpr real eps = real(1e-5);
    const int rows = static_cast<int>(x.numel() / cols);
    auto out = fresh(x.shape());

    auto xhat = std::make_shared<std::vector<real>>(x.numel());
    auto inv_s = std::make_shared<std::vector<real>>(rows);
    const auto& xv = x.data();
    const auto& gv = gain.data();
    const auto& bv = bias.data();
    for (int r = 0; r < rows; ++r) {
        const real* px = xv.data() + static_cast<size_t>(r) * cols;
        real mu = 0;
        for (int c = 0; c < cols; ++c) mu += px[c];
        mu /= cols;
        real var = 0;
        for (int c = 0; c < cols; ++c) {
            const real d = px[c] - mu;
            var += d * d;
        }
        var /= cols;
        const real is = real(1) / std::sqrt(var + eps);
        (*inv_s)[r] = is;
        real* ph = xhat->data() + static_cast<size_t>(r) * cols;
        real* py = out->value.data() + static_cast<size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) {
            ph[c] = (px[c] - mu) * is;
            py[c] = ph[c] * gv[c] + bv[c];
        }
    }
    return finish(out, {x.node_ptr(), gain.node_ptr(), bias.node_ptr()},
                  [rows, cols, xhat, inv_s](TensorNode& nd) {
                      const auto& gv = nd.inputs[1]->value;
                      auto& xg = nd.inputs[0]->grad;
                      auto& gg = nd.inputs[1]->grad;
                      auto& bg = nd.inputs[2]->grad;
                      std::vector<real> dh(cols);
                      for (int r = 0; r < rows; ++r) {
                          const real* g = nd.grad.data() + static_cast<size_t>(r) * cols;
                          const real* h = xhat->data() + static_cast<size_t>(r) * cols;
                          real m1 = 0, m2 = 0;
                          for (int c = 0; c < cols; ++c) {
                              if (!gg.empty()) gg[c] += g[c] * h[c];
                              if (!bg.empty()) bg[c] += g[c];
                              dh[c] = g[c] * gv[c];
                              m1 += dh[c];
                              m2 += dh[c] * h[c];
                          }
                          if (xg.empty()) continue;
                          m1 /= cols;
                          m2 /= cols;
                          const real is = (*inv_s)[r];
                          real* dst = xg.data() + static_cast<size_t>(r) * cols;
                          for (int c = 0; c < cols; ++c) dst[c] += is * (dh[c] - m1 - h[c] * m2);
                      }
                  });
}

Tensor softmax_attention(const Tensor& Q, const Tensor& K, const Tensor& V) {
    SG_CHECK_SHAPE(Q.ndim() == 2 && K.ndim() == 2 && V.ndim() == 2, "attention: 2-D tensors expected");
    const int d = Q.dim(1);
    SG_CHECK_SHAPE(d > 0, "attention: zero feature dim");
    SG_CHECK_SHAPE(K.dim(1) == d, "attention: Q/K feature dims disagree");
    SG_CHECK_SHAPE(K.dim(0) == V.dim(0), "attention: K/V lengths disagree");
    Tensor scores = mul_const(matmul(Q, transpose(K)), real(1) / std::sqrt(static_cast<real>(d)));
    return matmul(softmax_rows(scores), V);
}

Tensor rows_from_table(const Tensor& table, const std::vector<int>& idx) {
    SG_CHECK_SHAPE(table.ndim() == 2, "rows_from_table: 2-D table expected");
    const int rows = table.dim(0), cols = table.dim(1);
    auto out = fresh({static_cast<int>(idx.size()), cols});
    const auto& tv = table.data();
    for (size_t i = 0; i < idx.size(); ++i) {
        SG_CHECK_SHAPE(idx[i] >= 0 && idx[i] < rows, "rows_from_table: index out of range");
        std::memcpy(out->value.data() + i * cols, tv.data() + static_cast<size_t>(idx[i]) * cols,
                    static_cast<size_t>(cols) * sizeof(real));
    }
    auto keep = std::make_shared<std::vector<int>>(idx);
    return finish(out, {table.node_ptr()}, [cols, keep](TensorNode& nd) {
        auto& ig = nd.inputs[0]->grad;
        if (ig.empty()) return;
        for (size_t i = 0; i < keep->size(); ++i) {
            const size_t dst = static_cast<size_t>((*keep)[i]) * cols;
            for (int c = 0; c < cols; ++c) ig[dst + c] += nd.grad[i * cols + c];
        }
    });
}

Tensor patchify(const Tensor& img, int patch) {
    SG_CHECK_SHAPE(img.ndim() == 3, "patchify: {ch,H,W} image expected");
    const int ch = img.dim(0), H = img.dim(1), W = img.dim(2);
    SG_CHECK(patch > 0 && H % patch == 0 && W % patch == 0,
             "patchify: image size not divisible by patch size");
    const int gh = H / patch, gw = W / patch;
    const int feat = patch * patch * ch;
    auto out = fresh({gh * gw, feat});
    const auto& iv = img.data();
    auto src_index = [=](int c, int y, int x) {
        return (static_cast<size_t>(c) * H + y) * W + x;
    };
    for (int py = 0; py < gh; ++py)
        for (int px = 0; px < gw; ++px) {
            real* row = out->value.data() + static_cast<size_t>(py * gw + px) * feat;
            for (int c = 0; c < ch; ++c)
                for (int dy = 0; dy < patch; ++dy)
                    for (int dx = 0; dx < patch; ++dx)
                        row[(c * patch + dy) * patch + dx] =
                            iv[src_index(c, py * patch + dy, px * patch + dx)];
        }
    return finish(out, {img.node_ptr()}, [=](TensorNode& nd) {
        auto& ig = nd.inputs[0]->grad;
        if (ig.empty()) return;
        for (int py = 0; py < gh; ++py)
            for (int px = 0; px < gw; ++px) {
                const real* row = nd.grad.data() + static_cast<size_t>(py * gw + px) * feat;
                for (int c = 0; c < ch; ++c)
                    for (int dy = 0; dy < patch; ++dy)
                        for (int dx = 0; dx < patch; ++dx)
                            ig[src_index(c, py * patch + dy, px * patch + dx)] +=
                                row[(c * patch + dy) * patch + dx];
            }
    });
}

Tensor huber_sum(const Tensor& x, real delta) {
    SG_CHECK(delta > 0, "huber_sum: delta must be positive");
    auto out = fresh({1});
    real s = 0;
    for (real e : x.data()) {
        const real a = std::abs(e);
        s += a <= delta ? real(0.5) * e * e / delta : a - real(0.5) * delta;
    }
    out->value[0] = s;
    return finish(out, {x.node_ptr()}, [delta](TensorNode& nd) {
        auto& ig = nd.inputs[0]->grad;
        if (ig.empty()) return;
        const real g = nd.grad[0];
        const auto& xv = nd.inputs[0]->value;
        for (size_t i = 0; i < xv.size(); ++i) {
            const real e = xv[i];
            ig[i] += g * (std::abs(e) <= delta ? e / delta : (e > 0 ? real(1) : real(-1)));
        }
    });
}

Tensor quat_to_matrix(const Tensor& q) {
    SG_CHECK_SHAPE(q.numel() == 4, "quat_to_matrix: 4-vector expected");
    const real w = q.data()[0], x = q.data()[1], y = q.data()[2], z = q.data()[3];
    auto out = fresh({3, 3});
    real* R = out->value.data();
    R[0] = 1 - 2 * (y * y + z * z);
    R[1] = 2 * (x * y - w * z);
    R[2] = 2 * (x * z + w * y);
    R[3] = 2 * (x * y + w * z);
    R[4] = 1 - 2 * (x * x + z * z);
    R[5] = 2 * (y * z - w * x);
    R[6] = 2 * (x * z - w * y);
    R[7] = 2 * (y * z + w * x);
    R[8] = 1 - 2 * (x * x + y * y);
    return finish(out, {q.node_ptr()}, [](TensorNode& nd) {
        auto& qg = nd.inputs[0]->grad;
        if (qg.empty()) return;
        const real w = nd.inputs[0]->value[0], x = nd.inputs[0]->value[1];
        const real y = nd.inputs[0]->value[2], z = nd.inputs[0]->value[3];
        const real* g = nd.grad.data();
        qg[0] += 2 * (-g[1] * z + g[2] * y + g[3] * z - g[5] * x - g[6] * y + g[7] * x);
        qg[1] += 2 * (g[1] * y + g[2] * z + g[3] * y - 2 * g[4] * x - g[5] * w + g[6] * z +
                      g[7] * w - 2 * g[8] * x);
        qg[2] += 2 * (-2 * g[0] * y + g[1] * x + g[2] * w + g[3] * x + g[5] * z - g[6] * w +
                      g[7] * z - 2 * g[8] * y);
        qg[3] += 2 * (-2 * g[0] * z - g[1] * w + g[2] * x + g[3] * w - 2 * g[4] * z + g[5] * y +
                      g[6] * x + g[7] * y);
    });
}

Tensor splat_trilinear(const Tensor& points, const Tensor& weights, int res) {
    SG_CHECK_SHAPE(points.ndim() == 2 && points.dim(1) == 3, "splat: [P,3] points expected");
    SG_CHECK_SHAPE(weights.numel() == points.dim(0), "splat: weight count mismatch");
    SG_CHECK(res >= 2, "splat: resolution must be >= 2");
    const int P = points.dim(0);
    auto out = fresh({res * res * res});
    std::fill(out->value.begin(), out->value.end(), real(0));

    const auto& pv = points.data();
    const auto& wv = weights.data();
    auto cell = [res](int i, int j, int k) {
        return (static_cast<size_t>(i) * res + j) * res + k;
    };
    auto locate = [res](real p, int& i0, real& f, bool& inside) {
        real u = (p + real(1)) * real(0.5) * res - real(0.5);
        inside = u > real(0) && u < real(res - 1);
        u = std::clamp(u, real(0), real(res - 1));
        i0 = std::min(static_cast<int>(u), res - 2);
        f = u - i0;
    };
    for (int p = 0; p < P; ++p) {
        int i0, j0, k0;
        real fx, fy, fz;
        bool bx, by, bz;
        locate(pv[3 * p + 0], i0, fx, bx);
        locate(pv[3 * p + 1], j0, fy, by);
        locate(pv[3 * p + 2], k0, fz, bz);
        const real w = wv[p];
        for (int b = 0; b < 8; ++b) {
            const int di = (b >> 2) & 1, dj = (b >> 1) & 1, dk = b & 1;
            const real ww = (di ? fx : 1 - fx) * (dj ? fy : 1 - fy) * (dk ? fz : 1 - fz);
            out->value[cell(i0 + di, j0 + dj, k0 + dk)] += w * ww;
        }
    }
    return finish(out, {points.node_ptr(), weights.node_ptr()}, [res, P](TensorNode& nd) {
        auto& pg = nd.inputs[0]->grad;
        auto& wg = nd.inputs[1]->grad;
        const auto& pv = nd.inputs[0]->value;
        const auto& wv = nd.inputs[1]->value;
        auto cell = [res](int i, int j, int k) {
            return (static_cast<size_t>(i) * res + j) * res + k;
        };
        auto locate = [res](real p, int& i0, real& f, bool& inside) {
            real u = (p + real(1)) * real(0.5) * res - real(0.5);
            inside = u > real(0) && u < real(res - 1);
            u = std::clamp(u, real(0), real(res - 1));
            i0 = std::min(static_cast<int>(u), res - 2);
            f = u - i0;
        };
        const real dscale = real(0.5) * res;  // du/dp
        for (int p = 0; p < P; ++p) {
            int i0, j0, k0;
            real fx, fy, fz;
            bool bx, by, bz;
            locate(pv[3 * p + 0], i0, fx, bx);
            locate(pv[3 * p + 1], j0, fy, by);
            locate(pv[3 * p + 2], k0, fz, bz);
            const real w = wv[p];
            real dw = 0, dfx = 0, dfy = 0, dfz = 0;
            for (int b = 0; b < 8; ++b) {
                const int di = (b >> 2) & 1, dj = (b >> 1) & 1, dk = b & 1;
                const real wx = di ? fx : 1 - fx;
                const real wy = dj ? fy : 1 - fy;
                const real wz = dk ? fz : 1 - fz;
                const real g = nd.grad[cell(i0 + di, j0 + dj, k0 + dk)];
                dw += g * wx * wy * wz;
                dfx += g * w * (di ? 1 : -1) * wy * wz;
                dfy += g * w * wx * (dj ? 1 : -1) * wz;
                dfz += g * w * wx * wy * (dk ? 1 : -1);
            }
            if (!wg.empty()) wg[p] += dw;
            if (!pg.empty()) {
                if (bx) pg[3 * p + 0] += dfx * dscale;
                if (by) pg[3 * p + 1] += dfy * dscale;
                if (bz) pg[3 * p + 2] += dfz * dscale;
            }
        }
    });
}

}  // namespace scenegen
