#include "emog/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "emog/error.hpp"
#include "emog/rng.hpp"

namespace emog {

namespace {
constexpr double kAlphaBarFloor = 1e-12;
}

NoiseSchedule::NoiseSchedule(std::vector<double> beta) : beta_(std::move(beta)) {
  alpha_bar_.resize(beta_.size());
  alpha_bar_[0] = 1.0;
  for (std::size_t t = 1; t < beta_.size(); ++t) alpha_bar_[t] = alpha_bar_[t - 1] * (1.0 - beta_[t]);
}

NoiseSchedule NoiseSchedule::linear(std::size_t steps, double beta_start, double beta_end) {
  if (steps < 1) throw ArgumentError("noise schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
    throw ArgumentError("noise schedule requires 0 < beta_start <= beta_end < 1");
  }
  std::vector<double> beta(steps + 1, 0.0);
  for (std::size_t t = 1; t <= steps; ++t) {
    const double f = steps == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(steps - 1);
    beta[t] = beta_start + f * (beta_end - beta_start);
  }
  return NoiseSchedule(std::move(beta));
}

NoiseSchedule NoiseSchedule::cosine(std::size_t steps) {
  if (steps < 1) throw ArgumentError("noise schedule needs at least one step");
  constexpr double s = 0.008;
  auto f = [&](double t) {
    const double x = (t / static_cast<double>(steps) + s) / (1.0 + s) * std::numbers::pi / 2.0;
    return std::cos(x) * std::cos(x);
  };
  std::vector<double> beta(steps + 1, 0.0);
  for (std::size_t t = 1; t <= steps; ++t) {
    beta[t] = std::clamp(1.0 - f(static_cast<double>(t)) / f(static_cast<double>(t - 1)), 1e-8, 0.999);
  }
  return NoiseSchedule(std::move(beta));
}

NoiseSchedule NoiseSchedule::make(const ScheduleConfig& config) {
  return config.kind == BetaSchedule::kCosine ? cosine(config.steps)
                                              : linear(config.steps, config.beta_start, config.beta_end);
}

void NoiseSchedule::check_t(std::size_t t) const {
  if (t < 1 || t > steps()) {
    throw ArgumentError("diffusion step " + std::to_string(t) + " outside [1, " + std::to_string(steps()) + "]");
  }
}

double NoiseSchedule::beta(std::size_t t) const {
  check_t(t);
  return beta_[t];
}

double NoiseSchedule::alpha_bar(std::size_t t) const {
  if (t == 0) return 1.0;
  check_t(t);
  return alpha_bar_[t];
}

double NoiseSchedule::sigma(std::size_t t, VarianceMode mode) const {
  check_t(t);
  if (t == 1) return 0.0;
  switch (mode) {
    case VarianceMode::kBeta:
      return std::sqrt(beta_[t]);
    case VarianceMode::kPosterior:
      return std::sqrt(beta_[t] * (1.0 - alpha_bar_[t - 1]) / (1.0 - alpha_bar_[t]));
    case VarianceMode::kZero:
      return 0.0;
  }
  return 0.0;
}

std::vector<double> q_sample(std::span<const double> x0, std::size_t t, std::span<const double> eps,
                             const NoiseSchedule& schedule) {
  if (x0.size() != eps.size()) {
    throw DimensionError("q_sample: noise has " + std::to_string(eps.size()) + " values, signal " +
                         std::to_string(x0.size()));
  }
  const double ab = schedule.alpha_bar(t);
  if (t == 0) throw ArgumentError("q_sample: step 0 is not a noising step");
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  std::vector<double> out(x0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * eps[i];
  return out;
}

std::vector<double> predict_x0(std::span<const double> x_t, std::span<const double> eps_hat, std::size_t t,
                               const NoiseSchedule& schedule) {
  if (x_t.size() != eps_hat.size()) throw DimensionError("predict_x0: prediction size differs from x_t");
  if (t == 0) throw ArgumentError("predict_x0: step 0 is not a noising step");
  const double ab = schedule.alpha_bar(t);
  if (ab < kAlphaBarFloor) {
    throw NumericError("predict_x0: alpha_bar_" + std::to_string(t) + " = " + std::to_string(ab) +
                       " is below the 1e-12 floor");
  }
  const double a = std::sqrt(ab), b = std::sqrt(1.0 - ab);
  std::vector<double> out(x_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x_t[i] - b * eps_hat[i]) / a;
  return out;
}

std::vector<double> reverse_step(std::span<const double> x_t, std::size_t t, std::span<const double> eps_hat,
                                 const NoiseSchedule& schedule, VarianceMode mode, Rng& rng) {
  if (x_t.size() != eps_hat.size()) throw DimensionError("reverse_step: prediction size differs from x_t");
  const double beta = schedule.beta(t);
  const double coef = beta / std::sqrt(1.0 - schedule.alpha_bar(t));
  const double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
  const double sigma = schedule.sigma(t, mode);
  std::vector<double> out(x_t.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = inv_sqrt_alpha * (x_t[i] - coef * eps_hat[i]);
    if (sigma > 0.0) out[i] += sigma * rng.normal();
  }
  return out;
}

namespace {

std::vector<double> run_chain(const Denoiser& denoiser, const Shape& shape, const NoiseSchedule& schedule,
                              Rng& rng, const SamplerOptions& options, std::span<const double> reference,
                              std::span<const std::uint8_t> pinned) {
  NoGradGuard no_grad;
  const std::size_t count = shape_numel(shape);
  std::vector<double> x(count);
  for (double& v : x) v = rng.normal();
  Rng pin_rng = rng.split(0x70696eull);
  const bool any_pinned = std::any_of(pinned.begin(), pinned.end(), [](auto f) { return f != 0; });

  for (std::size_t t = schedule.steps(); t >= 1; --t) {
    if (any_pinned) {
      const double a = std::sqrt(schedule.alpha_bar(t)), b = std::sqrt(1.0 - schedule.alpha_bar(t));
      for (std::size_t i = 0; i < count; ++i) {
        if (pinned[i]) x[i] = a * reference[i] + b * pin_rng.normal();
      }
    }
    Tensor eps = denoiser(Tensor(shape, x), t);
    if (eps.shape() != shape) {
      throw DimensionError("denoiser returned " + shape_string(eps.shape()) + " for input " + shape_string(shape));
    }
    x = reverse_step(x, t, eps.data(), schedule, options.variance, rng);
    for (double v : x) {
      if (!std::isfinite(v)) throw NumericError("sampler produced a non-finite value at step " + std::to_string(t));
    }
    if (options.on_step) options.on_step(t, x);
  }
  if (any_pinned) {
    for (std::size_t i = 0; i < count; ++i) {
      if (pinned[i]) x[i] = reference[i];
    }
  }
  return x;
}

}  // namespace

Tensor sample(const Denoiser& denoiser, const Shape& shape, const NoiseSchedule& schedule, Rng& rng,
              const SamplerOptions& options) {
  return Tensor(shape, run_chain(denoiser, shape, schedule, rng, options, {}, {}));
}

Tensor pinned_sample(const Denoiser& denoiser, const Tensor& reference, std::span<const std::uint8_t> pinned,
                     const NoiseSchedule& schedule, Rng& rng, const SamplerOptions& options) {
  if (pinned.size() != reference.numel()) {
    throw DimensionError("pinned_sample: " + std::to_string(pinned.size()) + " pin flags for reference " +
                         shape_string(reference.shape()));
  }
  return Tensor(reference.shape(), run_chain(denoiser, reference.shape(), schedule, rng, options, reference.data(), pinned));
}

std::vector<std::uint8_t> joint_pin_flags(const Shape& shape, const std::vector<bool>& joint_mask) {
  if (shape.size() != 3 || shape[2] != 3 * joint_mask.size()) {
    throw DimensionError("joint mask of " + std::to_string(joint_mask.size()) + " joints for motion " +
                         shape_string(shape));
  }
  std::vector<std::uint8_t> flags(shape_numel(shape));
  for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = joint_mask[(i % shape[2]) / 3] ? 0 : 1;
  return flags;
}

Tensor inpaint_sample(const Denoiser& denoiser, const Tensor& reference, const std::vector<bool>& joint_mask,
                      const Shape& shape, const NoiseSchedule& schedule, Rng& rng, const SamplerOptions& options) {
  const bool regenerate_all = std::all_of(joint_mask.begin(), joint_mask.end(), [](bool b) { return b; });
  auto flags = joint_pin_flags(shape, joint_mask);
  if (!reference.defined()) {
    if (!regenerate_all) throw ArgumentError("inpaint_sample: preserved joints need a reference motion");
    return sample(denoiser, shape, schedule, rng, options);
  }
  if (reference.shape() != shape) {
    throw DimensionError("inpaint_sample: reference " + shape_string(reference.shape()) + " for output " +
                         shape_string(shape));
  }
  return pinned_sample(denoiser, reference, flags, schedule, rng, options);
}

Tensor seed_pose_sample(const Denoiser& denoiser, const Tensor& seed, const Shape& shape,
                        const NoiseSchedule& schedule, Rng& rng, const SamplerOptions& options) {
  if (shape.size() != 3) throw DimensionError("seed_pose_sample: output shape must be [B x N x C]");
  const std::size_t B = shape[0], N = shape[1], C = shape[2];
  if (!seed.defined() || seed.numel() == 0) return sample(denoiser, shape, schedule, rng, options);
  if (seed.rank() != 3 || seed.dim(0) != B || seed.dim(2) != C) {
    throw DimensionError("seed_pose_sample: seed " + shape_string(seed.shape()) + " for output " + shape_string(shape));
  }
  const std::size_t S = seed.dim(1);
  if (S > N) {
    throw ArgumentError("seed pose of " + std::to_string(S) + " frames is longer than the " + std::to_string(N) +
                        "-frame output");
  }
  std::vector<double> ref(B * N * C, 0.0);
  std::vector<std::uint8_t> flags(B * N * C, 0);
  const auto sv = seed.data();
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t n = 0; n < S; ++n) {
      for (std::size_t c = 0; c < C; ++c) {
        ref[(b * N + n) * C + c] = sv[(b * S + n) * C + c];
        flags[(b * N + n) * C + c] = 1;
      }
    }
  }
  return pinned_sample(denoiser, Tensor(shape, std::move(ref)), flags, schedule, rng, options);
}

}  // namespace emog
