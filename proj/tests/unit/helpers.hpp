#pragma once

#include <string>
#include <vector>

#include "emog/ops.hpp"
#include "emog/optim.hpp"
#include "emog/rng.hpp"
#include "emog/tensor.hpp"

namespace emog::testing {

inline std::vector<double> normal_values(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

inline Tensor random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  return Tensor(shape, normal_values(shape_numel(shape), rng, scale));
}

// Registers a leaf filled with normal noise and returns a handle (not a
// reference into the set, which may reallocate).
inline Tensor add_param(ParameterSet& params, const std::string& name, const Shape& shape, Rng& rng,
                        double scale = 1.0) {
  Tensor t = params.add(name, shape);
  auto d = t.mutable_data();
  for (auto& x : d) x = scale * rng.normal();
  return t;
}

// Contracts an arbitrary output with fixed random weights so every output
// element gets a distinct cotangent.
inline Tensor probe(const Tensor& out, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(out, random_tensor(out.shape(), rng)));
}

}  // namespace emog::testing
