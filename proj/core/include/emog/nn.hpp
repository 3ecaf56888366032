#pragma once

#include <string>

#include "emog/ops.hpp"
#include "emog/optim.hpp"

namespace emog {

class Rng;

enum class Activation { kGelu, kSilu };

Tensor activate(const Tensor& x, Activation act);

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out], undefined when bias-free

  /// Fan-in uniform weights and zero bias; `zero_init` zeroes the weights too.
  static Linear create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                       bool with_bias = true, bool zero_init = false);
  Tensor operator()(const Tensor& x) const { return linear(x, weight, bias); }
};

/// Adaptive layer normalization head: gamma = base + f(c), beta = h(c), with
/// f and h zero-initialized so the modulation starts as the identity.
struct AdaLNHead {
  Linear scale;
  Linear shift;
  double base = 1.0;

  static AdaLNHead create(ParameterSet& params, const std::string& name, std::size_t cond_dim, std::size_t features,
                          Rng& rng, double base = 1.0);
  Tensor gamma(const Tensor& cond) const { return add_scalar(scale(cond), base); }
  Tensor beta(const Tensor& cond) const { return shift(cond); }
  /// gamma(c) * x + beta(c), per channel and uniform over frames.
  Tensor modulate(const Tensor& x, const Tensor& cond) const { return emog::modulate(x, gamma(cond), beta(cond)); }
};

struct MultiHeadAttention {
  Linear query;
  Linear key;
  Linear value;
  Linear out;
  std::size_t heads = 1;

  static MultiHeadAttention create(ParameterSet& params, const std::string& name, std::size_t model_dim,
                                   std::size_t context_dim, std::size_t heads, Rng& rng);
  /// Queries from `x` [B x N x d], keys/values from `context` [B x M x dc].
  Tensor operator()(const Tensor& x, const Tensor& context, std::span<const std::uint8_t> context_valid = {}) const;
};

/// Pre-norm transformer encoder layer whose two normalizations are
/// modulated by a conditioning vector through AdaLN heads.
struct TransformerBlock {
  AdaLNHead norm_attn;
  AdaLNHead norm_ff;
  MultiHeadAttention attn;
  Linear ff_in;
  Linear ff_out;
  Activation act = Activation::kGelu;

  static TransformerBlock create(ParameterSet& params, const std::string& name, std::size_t dim, std::size_t heads,
                                 std::size_t ffn_mult, std::size_t cond_dim, Activation act, Rng& rng,
                                 double adaln_base = 1.0);
  Tensor operator()(const Tensor& x, const Tensor& cond, std::span<const std::uint8_t> valid = {}) const;
};

/// Fixed sinusoidal table [positions x dim].
Tensor sinusoidal_table(std::size_t positions, std::size_t dim);
/// Sinusoidal embedding of one scalar position per batch item -> [B x dim].
Tensor sinusoidal_embedding(std::span<const double> positions, std::size_t dim);

}  // namespace emog
