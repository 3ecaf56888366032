#include "emog/nn.hpp"

#include <cmath>

#include "emog/error.hpp"
#include "emog/rng.hpp"

namespace emog {

Tensor activate(const Tensor& x, Activation act) { return act == Activation::kSilu ? silu(x) : gelu(x); }

Linear Linear::create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
                      bool with_bias, bool zero_init) {
  Linear l;
  l.weight = params.add(name + ".weight", {in, out});
  if (!zero_init) init_uniform_fan_in(l.weight, in, rng);
  if (with_bias) l.bias = params.add(name + ".bias", {out});
  return l;
}

AdaLNHead AdaLNHead::create(ParameterSet& params, const std::string& name, std::size_t cond_dim,
                            std::size_t features, Rng& rng, double base) {
  AdaLNHead h;
  h.scale = Linear::create(params, name + ".scale", cond_dim, features, rng, true, true);
  h.shift = Linear::create(params, name + ".shift", cond_dim, features, rng, true, true);
  h.base = base;
  return h;
}

MultiHeadAttention MultiHeadAttention::create(ParameterSet& params, const std::string& name, std::size_t model_dim,
                                              std::size_t context_dim, std::size_t heads, Rng& rng) {
  if (heads == 0 || model_dim % heads != 0) {
    throw ConfigError(name + ": " + std::to_string(heads) + " heads do not divide dimension " +
                      std::to_string(model_dim));
  }
  MultiHeadAttention m;
  m.query = Linear::create(params, name + ".query", model_dim, model_dim, rng);
  m.key = Linear::create(params, name + ".key", context_dim, model_dim, rng);
  m.value = Linear::create(params, name + ".value", context_dim, model_dim, rng);
  m.out = Linear::create(params, name + ".out", model_dim, model_dim, rng);
  m.heads = heads;
  return m;
}

Tensor MultiHeadAttention::operator()(const Tensor& x, const Tensor& context,
                                      std::span<const std::uint8_t> context_valid) const {
  const std::size_t head_dim = query.weight.dim(1) / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  return out(attention(query(x), key(context), value(context), heads, scale, context_valid));
}

TransformerBlock TransformerBlock::create(ParameterSet& params, const std::string& name, std::size_t dim,
                                          std::size_t heads, std::size_t ffn_mult, std::size_t cond_dim,
                                          Activation act, Rng& rng, double adaln_base) {
  TransformerBlock b;
  b.norm_attn = AdaLNHead::create(params, name + ".norm_attn", cond_dim, dim, rng, adaln_base);
  b.norm_ff = AdaLNHead::create(params, name + ".norm_ff", cond_dim, dim, rng, adaln_base);
  b.attn = MultiHeadAttention::create(params, name + ".attn", dim, dim, heads, rng);
  b.ff_in = Linear::create(params, name + ".ff_in", dim, ffn_mult * dim, rng);
  b.ff_out = Linear::create(params, name + ".ff_out", ffn_mult * dim, dim, rng);
  b.act = act;
  return b;
}

Tensor TransformerBlock::operator()(const Tensor& x, const Tensor& cond, std::span<const std::uint8_t> valid) const {
  const Tensor h = norm_attn.modulate(layer_norm(x, {}, {}), cond);
  const Tensor x1 = add(x, attn(h, h, valid));
  const Tensor f = norm_ff.modulate(layer_norm(x1, {}, {}), cond);
  return add(x1, ff_out(activate(ff_in(f), act)));
}

Tensor sinusoidal_table(std::size_t positions, std::size_t dim) {
  std::vector<double> v(positions * dim);
  for (std::size_t p = 0; p < positions; ++p) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double a = static_cast<double>(p) * freq;
      v[p * dim + i] = (i % 2 == 0) ? std::sin(a) : std::cos(a);
    }
  }
  return Tensor({positions, dim}, std::move(v));
}

Tensor sinusoidal_embedding(std::span<const double> positions, std::size_t dim) {
  std::vector<double> v(positions.size() * dim);
  for (std::size_t b = 0; b < positions.size(); ++b) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double a = positions[b] * freq;
      v[b * dim + i] = (i % 2 == 0) ? std::sin(a) : std::cos(a);
    }
  }
  return Tensor({positions.size(), dim}, std::move(v));
}

}  // namespace emog
