#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emog/tensor.hpp"

namespace emog {

class Rng;

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

/// Ordered registry of trainable tensors. Order is registration order and is
/// what checkpoints and the optimizer iterate over.
class ParameterSet {
 public:
  /// Registers a fresh leaf of the given shape, zero-filled.
  Tensor& add(const std::string& name, Shape shape);

  const std::vector<NamedParameter>& items() const { return items_; }
  std::vector<NamedParameter>& items() { return items_; }
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const;
  std::size_t total_size() const;
  void zero_grad();

 private:
  std::vector<NamedParameter> items_;
};

/// Fan-in scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
void init_uniform_fan_in(Tensor& weight, std::size_t fan_in, Rng& rng);
void init_normal(Tensor& weight, double stddev, Rng& rng);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are stored in parameter order.
class Adam {
 public:
  explicit Adam(AdamConfig config = {});

  /// Applies one update from the gradients currently stored on the params.
  /// Throws TrainingError naming the first parameter with a non-finite grad.
  void step(ParameterSet& params);

  const AdamConfig& config() const { return config_; }
  void set_lr(double lr) { config_.lr = lr; }
  std::int64_t step_count() const { return steps_; }

  // Raw state for checkpointing.
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void set_step_count(std::int64_t steps) { steps_ = steps; }

 private:
  AdamConfig config_;
  std::int64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace emog
