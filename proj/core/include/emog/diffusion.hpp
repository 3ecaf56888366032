#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "emog/tensor.hpp"

namespace emog {

class Rng;

enum class BetaSchedule { kLinear, kCosine };

/// Variance of the reverse step: sigma_t^2 = beta_t, the posterior
/// beta~_t, or zero (deterministic chain, used for verification).
enum class VarianceMode { kBeta, kPosterior, kZero };

struct ScheduleConfig {
  std::size_t steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  BetaSchedule kind = BetaSchedule::kLinear;
  VarianceMode variance = VarianceMode::kBeta;

  bool operator==(const ScheduleConfig&) const = default;
};

/// beta_t, alpha_t = 1 - beta_t and alpha_bar_t = prod_{i<=t} alpha_i for
/// t = 1..T; alpha_bar_0 is 1.
class NoiseSchedule {
 public:
  static NoiseSchedule linear(std::size_t steps, double beta_start, double beta_end);
  static NoiseSchedule cosine(std::size_t steps);
  static NoiseSchedule make(const ScheduleConfig& config);

  std::size_t steps() const { return beta_.size() - 1; }
  double beta(std::size_t t) const;
  double alpha(std::size_t t) const { return 1.0 - beta(t); }
  double alpha_bar(std::size_t t) const;
  double sigma(std::size_t t, VarianceMode mode) const;

 private:
  explicit NoiseSchedule(std::vector<double> beta);
  void check_t(std::size_t t) const;

  std::vector<double> beta_;       // index 0 unused
  std::vector<double> alpha_bar_;  // alpha_bar_[0] == 1
};

/// x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
std::vector<double> q_sample(std::span<const double> x0, std::size_t t, std::span<const double> eps,
                             const NoiseSchedule& schedule);

/// x0_hat = (x_t - sqrt(1 - alpha_bar_t) eps_hat) / sqrt(alpha_bar_t).
std::vector<double> predict_x0(std::span<const double> x_t, std::span<const double> eps_hat, std::size_t t,
                               const NoiseSchedule& schedule);

/// mu = (x_t - beta_t / sqrt(1 - alpha_bar_t) eps_hat) / sqrt(alpha_t);
/// returns mu + sigma_t z, with z = 0 at t = 1.
std::vector<double> reverse_step(std::span<const double> x_t, std::size_t t, std::span<const double> eps_hat,
                                 const NoiseSchedule& schedule, VarianceMode mode, Rng& rng);

/// Maps (x_t, t) to the predicted noise, same shape as x_t.
using Denoiser = std::function<Tensor(const Tensor& x_t, std::size_t t)>;

struct SamplerOptions {
  VarianceMode variance = VarianceMode::kBeta;
  /// Called with (t, x_{t-1}) after every reverse step.
  std::function<void(std::size_t, std::span<const double>)> on_step;
};

/// Full T..1 ancestral chain from x_T ~ N(0, I).
Tensor sample(const Denoiser& denoiser, const Shape& shape, const NoiseSchedule& schedule, Rng& rng,
              const SamplerOptions& options = {});

/// Chain in which elements flagged in `pinned` are replaced by
/// q_sample(reference, t) before every step and set exactly to `reference`
/// after the last one. Pin noise is drawn from a separate sub-stream, so an
/// empty pin set reproduces sample() bit-for-bit.
Tensor pinned_sample(const Denoiser& denoiser, const Tensor& reference, std::span<const std::uint8_t> pinned,
                     const NoiseSchedule& schedule, Rng& rng, const SamplerOptions& options = {});

/// Regenerates joints whose mask entry is true and preserves the rest.
/// reference: [B x N x J*3]; joint_mask: [J]. `reference` may be undefined
/// only when every joint is regenerated.
Tensor inpaint_sample(const Denoiser& denoiser, const Tensor& reference, const std::vector<bool>& joint_mask,
                      const Shape& shape, const NoiseSchedule& schedule, Rng& rng,
                      const SamplerOptions& options = {});

/// Pins the first S frames to `seed` ([B x S x C], S may be 0) and
/// generates the rest of a [B x N x C] sequence.
Tensor seed_pose_sample(const Denoiser& denoiser, const Tensor& seed, const Shape& shape,
                        const NoiseSchedule& schedule, Rng& rng, const SamplerOptions& options = {});

/// Element flags for inpainting: true where the joint is preserved.
std::vector<std::uint8_t> joint_pin_flags(const Shape& shape, const std::vector<bool>& joint_mask);

}  // namespace emog
