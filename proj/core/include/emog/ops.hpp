#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "emog/tensor.hpp"

namespace emog {

/// Per-frame validity flags, row-major [batch x frames]; 1 = valid. An empty
/// mask means every frame is valid.
using FrameMask = std::vector<std::uint8_t>;

// Elementwise (operands must have identical shapes).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor gelu(const Tensor& x);
Tensor silu(const Tensor& x);

/// Plain 2-D product [m x k] . [k x n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// x[..., in] . w[in, out] + b[out]. `b` may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

/// Normalizes over the last axis. `gain`/`bias` may be undefined (no affine).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Softmax over the last axis, max-subtracted.
Tensor softmax(const Tensor& x);

/// Mean over the batch of -log softmax(logits[b])[labels[b]]. logits: [B x C].
Tensor cross_entropy(const Tensor& logits, std::span<const int> labels);

/// Multi-head scaled dot-product attention.
///
/// q: [B x Nq x D], k: [B x Nk x D], v: [B x Nk x Dv]; D and Dv are split
/// evenly across `heads`. `key_valid` ([B x Nk], optional) excludes keys.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, double scale,
                 std::span<const std::uint8_t> key_valid = {});

/// softmax(Q K^T * scale) V for 2-D operands: Q [n x d], K [m x d], V [m x dv].
Tensor scaled_dot_attention(const Tensor& q, const Tensor& k, const Tensor& v, double scale);

/// gamma[b] * x[b, n] + beta[b] for every frame n. x: [B x N x d], gamma/beta: [B x d].
Tensor modulate(const Tensor& x, const Tensor& gamma, const Tensor& beta);

/// x[b, n] + v[b] for every frame n.
Tensor add_frames(const Tensor& x, const Tensor& v);

/// x[b, n] + table[n]; table is [P x d] with P >= N.
Tensor add_positional(const Tensor& x, const Tensor& table);

/// Concatenates along the token axis: [B x n1 x d] ++ [B x n2 x d].
Tensor concat_tokens(const Tensor& a, const Tensor& b);
Tensor slice_tokens(const Tensor& x, std::size_t start, std::size_t count);

Tensor reshape(const Tensor& x, Shape shape);

/// Rows of table [V x d] selected by ids -> [len(ids) x d].
Tensor embedding(const Tensor& table, std::span<const int> ids);

/// Mean over valid frames. x: [B x N x d] -> [B x d].
Tensor masked_mean_frames(const Tensor& x, std::span<const std::uint8_t> valid);

/// Learned weighted sum over time: out[b, f] = sum_n w[n] * x[b, n, f] over
/// valid frames. x: [B x N x F], w: [P] with P >= N.
Tensor time_collapse(const Tensor& x, const Tensor& w, std::span<const std::uint8_t> valid);

/// Multiplies batch item b by the constant coeffs[b].
Tensor scale_batch(const Tensor& x, std::span<const double> coeffs);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Mean of squared differences over valid frames. pred/target: [B x N x F].
Tensor masked_mse(const Tensor& pred, const Tensor& target, std::span<const std::uint8_t> valid);

/// Mean over valid frames of the per-frame L2 norm of (pred - target).
Tensor masked_frame_norm(const Tensor& pred, const Tensor& target, std::span<const std::uint8_t> valid);

}  // namespace emog
