#pragma once

#include <vector>

#include "gazeworld/tensor.hpp"

namespace gazeworld::ops {

// Elementwise; shapes must match.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& x, T c);

// Row-broadcast arithmetic: x is (m,n), v is (1,n).
template <typename T> Tensor<T> add_rowvec(const Tensor<T>& x, const Tensor<T>& v);
template <typename T> Tensor<T> mul_rowvec(const Tensor<T>& x, const Tensor<T>& v);

// (m,k) x (k,n) -> (m,n).
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> transpose(const Tensor<T>& x);

// Row selection/reassembly.
template <typename T> Tensor<T> gather_rows(const Tensor<T>& x, std::vector<std::size_t> idx);
template <typename T> Tensor<T> slice_cols(const Tensor<T>& x, std::size_t c0, std::size_t c1);
template <typename T> Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts);
template <typename T> Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows);
template <typename T> Tensor<T> mean_rows(const Tensor<T>& x);  // (m,n) -> (1,n)

// Per-row layer normalization over the last axis, no affine parameters.
template <typename T> Tensor<T> layer_norm(const Tensor<T>& x, T eps);

// Per-row softmax. The causal variant requires a square input and normalizes
// row i over columns 0..i only; masked entries are exactly zero and are never
// read by the backward pass.
template <typename T> Tensor<T> softmax_rows(const Tensor<T>& x);
template <typename T> Tensor<T> softmax_causal(const Tensor<T>& x);

template <typename T> Tensor<T> gelu(const Tensor<T>& x);

// Reductions to scalar.
template <typename T> Tensor<T> sum_all(const Tensor<T>& x);
template <typename T> Tensor<T> mean_all(const Tensor<T>& x);

// Losses (mean-reduced scalars).
template <typename T> Tensor<T> smooth_l1(const Tensor<T>& pred, const Tensor<T>& target, T beta);
template <typename T> Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target);
template <typename T> Tensor<T> cross_entropy_logits(const Tensor<T>& logits,
                                                     const std::vector<std::size_t>& target);
template <typename T> Tensor<T> bce_logits(const Tensor<T>& logits, const std::vector<T>& target);

// layer_norm followed by a learned per-feature affine map.
template <typename T>
Tensor<T> layer_norm_affine(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                            T eps) {
  return add_rowvec(mul_rowvec(layer_norm(x, eps), gain), bias);
}

}  // namespace gazeworld::ops
