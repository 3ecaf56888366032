#include "emog/training.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "emog/error.hpp"
#include "emog/motion_io.hpp"
#include "emog/rng.hpp"

namespace emog {

void TrainConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("training: " + msg);
  };
  need(batch_size >= 1, "batch_size must be >= 1");
  need(lr > 0.0, "lr must be > 0");
  need(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam betas must be in [0,1)");
  need(adam_eps > 0.0, "adam_eps must be > 0");
  need(grad_clip >= 0.0, "grad_clip must be >= 0");
  need(clip_length >= 1 && clip_stride >= 1, "clip_length and clip_stride must be >= 1");
  need(vl_window >= 1 && vl_stride >= 1, "vl_window and vl_stride must be >= 1");
  need(mask_ratio_min >= 0.0 && mask_ratio_min <= mask_ratio_max && mask_ratio_max < 1.0,
       "mask ratios must satisfy 0 <= min <= max < 1");
  need(lambda_rec >= 0.0, "lambda_rec must be >= 0");
}

std::string to_string(LrSchedule s) { return s == LrSchedule::kCosine ? "cosine" : "constant"; }

LrSchedule parse_lr_schedule(const std::string& name) {
  if (name == "constant") return LrSchedule::kConstant;
  if (name == "cosine") return LrSchedule::kCosine;
  throw ConfigError("unknown lr schedule '" + name + "' (expected constant or cosine)");
}

std::string to_string(MaskPlacement p) { return p == MaskPlacement::kScatter ? "scatter" : "suffix"; }

MaskPlacement parse_mask_placement(const std::string& name) {
  if (name == "suffix") return MaskPlacement::kSuffix;
  if (name == "scatter") return MaskPlacement::kScatter;
  throw ConfigError("unknown mask placement '" + name + "' (expected suffix or scatter)");
}

namespace {

void require_some_valid(std::span<const std::uint8_t> valid) {
  if (!valid.empty() && std::none_of(valid.begin(), valid.end(), [](std::uint8_t v) { return v != 0; })) {
    throw ArgumentError("every frame is masked; the loss is undefined");
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

}  // namespace

Tensor loss_mse(const Tensor& eps, const Tensor& eps_hat, std::span<const std::uint8_t> valid) {
  require_same_shape(eps, eps_hat, "loss_mse");
  require_some_valid(valid);
  return masked_mse(eps_hat, eps, valid);
}

Tensor loss_rec(const Tensor& x0, const Tensor& x0_hat, std::span<const std::uint8_t> valid) {
  require_same_shape(x0, x0_hat, "loss_rec");
  require_some_valid(valid);
  return masked_frame_norm(x0_hat, x0, valid);
}

Tensor loss_ce(const Tensor& logits, std::span<const int> labels) { return cross_entropy(logits, labels); }

Tensor total_loss(const Tensor& mse, const Tensor& rec, const Tensor& ce, const LossWeights& weights) {
  auto check = [](const Tensor& t, const char* name) {
    if (t.defined() && !std::isfinite(t.item())) {
      throw TrainingError(std::string("loss diverged: ") + name + " = " + format_double(t.item()));
    }
  };
  check(mse, "L_mse");
  check(rec, "L_rec");
  check(ce, "L_ce");
  if (weights.lambda_rec < 0.0) throw ArgumentError("lambda_rec must be >= 0");
  Tensor total = mse;
  if (weights.use_rec && rec.defined()) total = add(total, scale(rec, weights.lambda_rec));
  if (weights.use_ce && ce.defined()) total = add(total, ce);
  return total;
}

Tensor predict_x0_batch(const Tensor& x_t, const Tensor& eps_hat, std::span<const std::size_t> steps,
                        const NoiseSchedule& schedule) {
  std::vector<double> noise_coef(steps.size()), inv_signal(steps.size());
  for (std::size_t b = 0; b < steps.size(); ++b) {
    const double ab = schedule.alpha_bar(steps[b]);
    if (ab < 1e-12) throw NumericError("alpha_bar_" + std::to_string(steps[b]) + " below 1e-12");
    noise_coef[b] = std::sqrt(1.0 - ab);
    inv_signal[b] = 1.0 / std::sqrt(ab);
  }
  return scale_batch(sub(x_t, scale_batch(eps_hat, noise_coef)), inv_signal);
}

TrainingSet make_training_set(std::span<const CorpusSample> samples, const DatasetStats& stats,
                              const TrainConfig& config) {
  if (samples.empty()) throw ArgumentError("training corpus is empty");
  std::size_t shortest = samples.front().motion.frame_count();
  for (const auto& s : samples) shortest = std::min(shortest, s.motion.frame_count());
  const std::size_t length = config.variable_length ? std::min(config.vl_window, shortest) : config.clip_length;
  const std::size_t stride = config.variable_length ? config.vl_stride : config.clip_stride;

  TrainingSet set;
  set.frames = length;
  set.channels = samples.front().motion.channels();
  set.audio_dim = samples.front().audio.dims();
  if (stats.channels() != set.channels) {
    throw DimensionError("dataset stats have " + std::to_string(stats.channels()) + " channels, motion has " +
                         std::to_string(set.channels));
  }
  for (const auto& s : samples) {
    const std::size_t n = s.motion.frame_count();
    if (s.motion.channels() != set.channels || s.audio.dims() != set.audio_dim) {
      throw DimensionError("sample " + std::to_string(s.id) + " has inconsistent dimensions");
    }
    std::vector<double> audio(s.audio.values().begin(), s.audio.values().end());
    if (s.audio.frame_count() != n) audio = interpolate_frames(audio, s.audio.frame_count(), set.audio_dim, n);
    for (std::size_t off : window_offsets(n, length, stride)) {
      TrainingClip clip;
      const auto mv = s.motion.values();
      clip.motion.assign(mv.begin() + static_cast<std::ptrdiff_t>(off * set.channels),
                         mv.begin() + static_cast<std::ptrdiff_t>((off + length) * set.channels));
      normalize_values(clip.motion, stats);
      clip.audio.assign(audio.begin() + static_cast<std::ptrdiff_t>(off * set.audio_dim),
                        audio.begin() + static_cast<std::ptrdiff_t>((off + length) * set.audio_dim));
      clip.emotion = s.emotion;
      clip.speaker = s.speaker;
      set.clips.push_back(std::move(clip));
    }
  }
  if (set.clips.empty()) {
    throw ArgumentError("no sample is at least " + std::to_string(length) + " frames long");
  }
  return set;
}

std::string loss_log_csv(std::span<const LossRecord> log) {
  std::string out = "step,L_mse,L_rec,L_ce,total\n";
  for (const auto& r : log) {
    out += std::to_string(r.step) + "," + format_double(r.mse) + "," + format_double(r.rec) + "," +
           format_double(r.ce) + "," + format_double(r.total) + "\n";
  }
  return out;
}

Trainer::Trainer(JCFormer& model, NoiseSchedule schedule, TrainConfig config, TrainingSet data)
    : model_(model),
      schedule_(std::move(schedule)),
      config_(std::move(config)),
      data_(std::move(data)),
      adam_(AdamConfig{config_.lr, config_.adam_beta1, config_.adam_beta2, config_.adam_eps}) {
  config_.validate();
  if (data_.clips.empty()) throw ArgumentError("training set is empty");
  if (data_.channels != model_.config().channels()) {
    throw DimensionError("training data has " + std::to_string(data_.channels) + " channels, model expects " +
                         std::to_string(model_.config().channels()));
  }
  if (data_.audio_dim != model_.config().audio_in_dim) {
    throw DimensionError("training audio has " + std::to_string(data_.audio_dim) + " dims, model expects " +
                         std::to_string(model_.config().audio_in_dim));
  }
}

double Trainer::learning_rate(std::size_t step) const {
  double lr = config_.lr;
  if (config_.warmup_steps > 0 && step < config_.warmup_steps) {
    return lr * static_cast<double>(step) / static_cast<double>(config_.warmup_steps);
  }
  if (config_.lr_schedule == LrSchedule::kCosine && config_.steps > config_.warmup_steps) {
    const double progress = static_cast<double>(step - config_.warmup_steps) /
                            static_cast<double>(config_.steps - config_.warmup_steps);
    lr *= 0.5 * (1.0 + std::cos(std::numbers::pi * std::min(progress, 1.0)));
  }
  return lr;
}

LossRecord Trainer::step() {
  const std::size_t s = steps_done_ + 1;
  Rng rng = Rng(config_.seed).split(s);
  const std::size_t B = config_.batch_size, N = data_.frames, C = data_.channels, D = data_.audio_dim;
  const std::size_t T = schedule_.steps();
  const bool use_emotion = model_.config().use_emotion;

  std::vector<double> x0(B * N * C), eps(B * N * C), xt(B * N * C), audio(B * N * D);
  std::vector<std::size_t> steps(B);
  std::vector<int> speakers(B), labels(B);
  FrameMask valid;
  if (config_.variable_length) valid.assign(B * N, 1);
  for (std::size_t b = 0; b < B; ++b) {
    const TrainingClip& clip = data_.clips[rng.below(data_.clips.size())];
    steps[b] = 1 + rng.below(T);
    const std::span<double> eb(eps.data() + b * N * C, N * C);
    for (double& v : eb) v = rng.normal();
    std::copy(clip.motion.begin(), clip.motion.end(), x0.begin() + static_cast<std::ptrdiff_t>(b * N * C));
    const auto noised = q_sample(clip.motion, steps[b], eb, schedule_);
    std::copy(noised.begin(), noised.end(), xt.begin() + static_cast<std::ptrdiff_t>(b * N * C));
    std::copy(clip.audio.begin(), clip.audio.end(), audio.begin() + static_cast<std::ptrdiff_t>(b * N * D));
    speakers[b] = clip.speaker;
    labels[b] = clip.emotion;
    if (config_.variable_length) {
      const auto masked = random_proportional_mask(N, config_.mask_ratio_min, config_.mask_ratio_max, rng,
                                                   config_.mask_placement);
      for (std::size_t n = 0; n < N; ++n) valid[b * N + n] = masked[n] ? 0 : 1;
    }
  }

  const Tensor x0_t({B, N, C}, std::move(x0));
  const Tensor eps_t({B, N, C}, std::move(eps));
  const Tensor xt_t({B, N, C}, std::move(xt));
  DenoiseInput input;
  input.audio = Tensor({B, N, D}, std::move(audio));
  input.speakers = speakers;
  if (use_emotion) input.emotion_override = labels;
  input.valid = valid;
  for (std::size_t t : steps) input.alpha_bar.push_back(schedule_.alpha_bar(t));

  const DenoiseOutput out = model_.forward(xt_t, steps, input);
  const Tensor mse = loss_mse(eps_t, out.eps, valid);
  const Tensor rec = loss_rec(x0_t, predict_x0_batch(xt_t, out.eps, steps, schedule_), valid);
  Tensor ce;
  if (use_emotion) ce = loss_ce(out.emotion.logits, labels);
  const LossWeights weights{config_.lambda_rec, config_.use_rec, use_emotion};
  const Tensor total = total_loss(mse, rec, ce, weights);

  ParameterSet& params = model_.parameters();
  params.zero_grad();
  total.backward();
  if (config_.grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto& p : params.items()) {
      for (double g : p.tensor.grad()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (std::isfinite(norm) && norm > config_.grad_clip) {
      const double f = config_.grad_clip / norm;
      for (auto& p : params.items()) {
        for (double& g : p.tensor.node()->grad) g *= f;
      }
    }
  }
  adam_.set_lr(learning_rate(s));
  adam_.step(params);

  LossRecord r{s, mse.item(), rec.item(), ce.defined() ? ce.item() : 0.0, total.item()};
  log_.push_back(r);
  steps_done_ = s;
  return r;
}

void Trainer::run(std::size_t target, const std::function<void(const LossRecord&)>& on_step) {
  while (steps_done_ < target) {
    const LossRecord r = step();
    if (on_step) on_step(r);
  }
}

void Trainer::restore(std::size_t steps_done, std::vector<LossRecord> log) {
  steps_done_ = steps_done;
  log_ = std::move(log);
}

ValidationSnapshot evaluate_validation(const JCFormer& model, const NoiseSchedule& schedule, const TrainingSet& set,
                                       std::uint64_t seed) {
  if (set.clips.empty()) throw ArgumentError("validation set is empty");
  NoGradGuard guard;
  constexpr std::size_t kBatch = 16;
  const std::size_t N = set.frames, C = set.channels, D = set.audio_dim;
  Rng rng(seed);
  ValidationSnapshot snap;
  snap.has_emotion = model.config().use_emotion;
  double mse = 0.0, rec = 0.0;
  std::size_t hits = 0;
  for (std::size_t at = 0; at < set.clips.size(); at += kBatch) {
    const std::size_t B = std::min(kBatch, set.clips.size() - at);
    std::vector<double> x0(B * N * C), eps(B * N * C), xt(B * N * C), audio(B * N * D);
    std::vector<std::size_t> steps(B);
    std::vector<int> speakers(B);
    for (std::size_t b = 0; b < B; ++b) {
      const TrainingClip& clip = set.clips[at + b];
      steps[b] = 1 + rng.below(schedule.steps());
      const std::span<double> eb(eps.data() + b * N * C, N * C);
      for (double& v : eb) v = rng.normal();
      std::copy(clip.motion.begin(), clip.motion.end(), x0.begin() + static_cast<std::ptrdiff_t>(b * N * C));
      const auto noised = q_sample(clip.motion, steps[b], eb, schedule);
      std::copy(noised.begin(), noised.end(), xt.begin() + static_cast<std::ptrdiff_t>(b * N * C));
      std::copy(clip.audio.begin(), clip.audio.end(), audio.begin() + static_cast<std::ptrdiff_t>(b * N * D));
      speakers[b] = clip.speaker;
    }
    const Tensor xt_t({B, N, C}, std::move(xt));
    DenoiseInput input;
    input.audio = Tensor({B, N, D}, std::move(audio));
    input.speakers = speakers;
    for (std::size_t t : steps) input.alpha_bar.push_back(schedule.alpha_bar(t));
    const DenoiseOutput out = model.forward(xt_t, steps, input);
    const double w = static_cast<double>(B);
    mse += w * loss_mse(Tensor({B, N, C}, std::move(eps)), out.eps).item();
    rec += w * loss_rec(Tensor({B, N, C}, std::move(x0)), predict_x0_batch(xt_t, out.eps, steps, schedule)).item();
    if (snap.has_emotion) {
      for (std::size_t b = 0; b < B; ++b) hits += out.emotion.labels[b] == set.clips[at + b].emotion ? 1 : 0;
    }
  }
  snap.clips = set.clips.size();
  snap.mse = mse / static_cast<double>(snap.clips);
  snap.rec = rec / static_cast<double>(snap.clips);
  if (snap.has_emotion) snap.emotion_accuracy = static_cast<double>(hits) / static_cast<double>(snap.clips);
  return snap;
}

std::vector<double> smooth(std::span<const double> values, std::size_t window) {
  if (window == 0) throw ArgumentError("smoothing window must be >= 1");
  std::vector<double> out(values.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    acc += values[i];
    if (i >= window) acc -= values[i - window];
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

}  // namespace emog
