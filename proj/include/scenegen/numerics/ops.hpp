#pragma once

#include <array>
#include <vector>

#include "scenegen/numerics/tensor.hpp"

namespace scenegen {

// Elementwise (shapes must match exactly).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor add_const(const Tensor& a, real c);
Tensor mul_const(const Tensor& a, real c);

// Broadcast multiply by a scalar tensor (gradient flows into both).
Tensor scale(const Tensor& a, const Tensor& s);

// Unary maps.
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor silu(const Tensor& a);
Tensor softplus(const Tensor& a);

// Reductions to scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);

// Matrix ops on 2-D tensors.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add_rowvec(const Tensor& m, const Tensor& v);  // m[T,C] + v[C] per row
Tensor mul_rowvec(const Tensor& m, const Tensor& v);  // m[T,C] * v[C] per row

// Shape plumbing.
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, int row0, int nrows);
Tensor slice_cols(const Tensor& a, int col0, int ncols);
Tensor tile_rows(const Tensor& v, int n);  // v[1,C] -> [n,C]

// Neural building blocks.
Tensor softmax_rows(const Tensor& a);
// Zero-mean unit-variance over the last dim, then affine; eps = 1e-5.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
// softmax(Q Kᵀ / √d) V.
Tensor softmax_attention(const Tensor& Q, const Tensor& K, const Tensor& V);
// Gather rows of a [V,C] table; backward scatter-adds.
Tensor rows_from_table(const Tensor& table, const std::vector<int>& idx);
// {ch,H,W} image -> [(H/p)(W/p), p*p*ch] patch matrix, row-major patches.
Tensor patchify(const Tensor& img, int patch);

// Sum of elementwise Huber: 0.5 e^2/δ for |e|<=δ else |e|-0.5δ.
Tensor huber_sum(const Tensor& x, real delta);

// Rotation matrix from a unit quaternion [w,x,y,z].
Tensor quat_to_matrix(const Tensor& q);

// Trilinear splat of weighted points in [-1,1]^3 onto a res^3 grid
// (flattened x-major). Out-of-bounds points clamp to boundary cells.
Tensor splat_trilinear(const Tensor& points, const Tensor& weights, int res);

// Raw row-major kernels shared with non-graph paths.
// C[m,n] = A[m,k] @ B[k,n]
void gemm(const real* A, const real* B, real* C, int m, int k, int n, bool accumulate);
// C[k,n] = A[m,k]ᵀ @ B[m,n]
void gemm_at_b(const real* A, const real* B, real* C, int m, int k, int n, bool accumulate);
// C[m,k] = A[m,n] @ B[k,n]ᵀ
void gemm_a_bt(const real* A, const real* B, real* C, int m, int n, int k, bool accumulate);

}  // namespace scenegen
