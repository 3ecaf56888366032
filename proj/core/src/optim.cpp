#include "emog/optim.hpp"

#include <cmath>

#include "emog/error.hpp"
#include "emog/rng.hpp"

namespace emog {

Tensor& ParameterSet::add(const std::string& name, Shape shape) {
  if (contains(name)) throw ArgumentError("duplicate parameter name '" + name + "'");
  items_.push_back({name, Tensor::zeros(std::move(shape), true)});
  return items_.back().tensor;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (const auto& p : items_) {
    if (p.name == name) return p.tensor;
  }
  throw ArgumentError("unknown parameter '" + name + "'");
}

Tensor& ParameterSet::get(const std::string& name) {
  return const_cast<Tensor&>(static_cast<const ParameterSet&>(*this).get(name));
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& p : items_) {
    if (p.name == name) return true;
  }
  return false;
}

std::size_t ParameterSet::total_size() const {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.tensor.numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : items_) p.tensor.zero_grad();
}

void init_uniform_fan_in(Tensor& weight, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
  for (double& v : weight.mutable_data()) v = rng.uniform(-bound, bound);
}

void init_normal(Tensor& weight, double stddev, Rng& rng) {
  for (double& v : weight.mutable_data()) v = stddev * rng.normal();
}

Adam::Adam(AdamConfig config) : config_(config) {}

void Adam::step(ParameterSet& params) {
  auto& items = params.items();
  if (m_.size() != items.size()) {
    m_.assign(items.size(), {});
    v_.assign(items.size(), {});
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto g = items[i].tensor.grad();
    for (double x : g) {
      if (!std::isfinite(x)) throw TrainingError("non-finite gradient in parameter '" + items[i].name + "'");
    }
    if (m_[i].size() != items[i].tensor.numel()) {
      m_[i].assign(items[i].tensor.numel(), 0.0);
      v_[i].assign(items[i].tensor.numel(), 0.0);
    }
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto g = items[i].tensor.grad();
    if (g.empty()) continue;  // parameter unused this step
    auto w = items[i].tensor.mutable_data();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace emog
