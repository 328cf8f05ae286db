#pragma once

#include <vector>

#include "proto_ood/tensor.hpp"

namespace proto_ood {

// Differentiable operations. Each records its backward rule on `tape` when
// the tape is recording and any input tracks gradients; otherwise it is a
// plain evaluation. Shape violations throw ShapeError naming the shapes.

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b, Tape& tape);
Tensor mul(const Tensor& a, const Tensor& b, Tape& tape);

// Multiply by a compile-time-known constant.
Tensor scale(const Tensor& a, double factor, Tape& tape);

// Rank-2 matrix product [m x k] * [k x n] -> [m x n].
// Backward: dA += dC * B^T, dB += A^T * dC.
Tensor matmul(const Tensor& a, const Tensor& b, Tape& tape);

Tensor transpose(const Tensor& a, Tape& tape);

// Column block [rows x count] starting at `start`.
Tensor slice_cols(const Tensor& a, Index start, Index count, Tape& tape);

// Horizontal / vertical concatenation. concat_rows accepts rank-1 pieces
// (treated as a single row) mixed with rank-2 blocks of equal width.
Tensor concat_cols(const std::vector<Tensor>& parts, Tape& tape);
Tensor concat_rows(const std::vector<Tensor>& parts, Tape& tape);

// Row i of a rank-2 tensor as a rank-1 vector.
Tensor row(const Tensor& a, Index i, Tape& tape);

Tensor reshape(const Tensor& a, const Shape& shape, Tape& tape);

// x * sigmoid(x), elementwise.
Tensor silu(const Tensor& a, Tape& tape);

// Row-wise root-mean-square normalization with a gain vector:
// y[r,j] = gain[j] * x[r,j] / sqrt(mean_j(x[r,j]^2) + eps).
Tensor rms_norm(const Tensor& x, const Tensor& gain, double eps, Tape& tape);

// Row-wise softmax over the causal prefix of a square score matrix:
// row i is normalized over columns j <= i; columns j > i are exactly zero.
Tensor softmax_causal(const Tensor& scores, Tape& tape);

// Cosine similarity of two equal-length rank-1 vectors. Refuses vectors of
// norm < 1e-12 (ValueError) instead of clamping.
Tensor cosine(const Tensor& a, const Tensor& b, Tape& tape);

// -log softmax(logits)[target], max-shifted log-sum-exp.
Tensor softmax_cross_entropy(const Tensor& logits, Index target, Tape& tape);

// Sum of all entries as a scalar.
Tensor sum(const Tensor& a, Tape& tape);

// K scalar tensors -> rank-1 [K].
Tensor stack_scalars(const std::vector<Tensor>& scalars, Tape& tape);

// Mean of K scalar tensors as a scalar (stack + sum + scale).
Tensor mean_scalars(const std::vector<Tensor>& scalars, Tape& tape);

}  // namespace proto_ood
