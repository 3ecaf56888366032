#include "emog/jcformer.hpp"

#include <algorithm>
#include <cmath>

#include "emog/error.hpp"
#include "emog/rng.hpp"

namespace emog {

std::string to_string(EmotionMode mode) {
  switch (mode) {
    case EmotionMode::kAdaLN: return "adaln";
    case EmotionMode::kInContextToken: return "in_context_token";
    case EmotionMode::kInContextContent: return "in_context_content";
    case EmotionMode::kCrossAttention: return "cross_attention";
  }
  return "?";
}

EmotionMode parse_emotion_mode(const std::string& name) {
  if (name == "adaln") return EmotionMode::kAdaLN;
  if (name == "in_context_token") return EmotionMode::kInContextToken;
  if (name == "in_context_content") return EmotionMode::kInContextContent;
  if (name == "cross_attention") return EmotionMode::kCrossAttention;
  throw ConfigError("unknown emotion mode '" + name +
                    "' (expected adaln, in_context_token, in_context_content or cross_attention)");
}

void ModelConfig::validate() const {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("model: " + msg);
  };
  need(joints >= 1, "joints must be >= 1");
  need(max_frames >= 1, "max_frames must be >= 1");
  need(audio_in_dim >= 1 && audio_dim >= 1, "audio dims must be >= 1");
  need(temporal_layers >= 1 && joint_layers >= 1, "layer counts must be >= 1");
  need(joint_heads >= 1 && d_joint % joint_heads == 0, "d_joint not divisible by joint_heads");
  need(temporal_heads >= 1 && d_temporal % temporal_heads == 0, "d_temporal not divisible by temporal_heads");
  need(d_fusion % temporal_heads == 0, "d_fusion not divisible by temporal_heads");
  need(ffn_mult >= 1, "ffn_mult must be >= 1");
  need(emotion_count >= 2, "emotion_count must be >= 2");
  need(speaker_count >= 1, "speaker_count must be >= 1");
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.max_frames = 150;
  c.d_joint = 64;
  c.d_temporal = 128;
  c.d_fusion = 128;
  c.temporal_layers = 2;
  c.joint_layers = 2;
  c.fusion_layers = 2;
  c.ffn_mult = 2;
  return c;
}

std::vector<double> interpolate_frames(std::span<const double> values, std::size_t frames, std::size_t dims,
                                       std::size_t target) {
  if (frames < 2) throw ArgumentError("audio alignment needs at least 2 source frames, got " + std::to_string(frames));
  if (target < 1) throw ArgumentError("audio alignment needs at least 1 target frame");
  if (values.size() != frames * dims) throw DimensionError("interpolate_frames: value count does not match shape");
  std::vector<double> out(target * dims);
  if (frames == target) {
    std::copy(values.begin(), values.end(), out.begin());
    return out;
  }
  for (std::size_t n = 0; n < target; ++n) {
    const double pos =
        target == 1 ? 0.0 : static_cast<double>(n) * static_cast<double>(frames - 1) / static_cast<double>(target - 1);
    const std::size_t i0 = std::min(static_cast<std::size_t>(pos), frames - 2);
    const double w = pos - static_cast<double>(i0);
    for (std::size_t d = 0; d < dims; ++d) {
      out[n * dims + d] = (1.0 - w) * values[i0 * dims + d] + w * values[(i0 + 1) * dims + d];
    }
  }
  return out;
}

JCFormer::JCFormer(ModelConfig config) : config_(std::move(config)) {
  config_.validate();
  const ModelConfig& c = config_;
  Rng rng(c.init_seed);
  const std::size_t dc = c.d_temporal;
  const std::size_t ch = c.channels();

  time_in_ = Linear::create(params_, "time.in", dc, dc, rng);
  time_out_ = Linear::create(params_, "time.out", dc, dc, rng);
  speaker_table_ = params_.add("speaker.table", {c.speaker_count, dc});
  init_normal(speaker_table_, 1.0, rng);

  audio_proj_ = Linear::create(params_, "audio.proj", c.audio_in_dim, c.audio_dim, rng);

  if (c.use_emotion) {
    emotion_fc_ = Linear::create(params_, "emotion.fc", c.audio_dim, c.emotion_count, rng);
    emotion_table_ = params_.add("emotion.table", {c.emotion_count, c.d_fusion});
    init_normal(emotion_table_, 1.0, rng);
    if (c.emotion_in_blocks) emotion_to_cond_ = Linear::create(params_, "emotion.to_cond", c.d_fusion, dc, rng);
  }

  if (c.use_spatial) {
    time_weights_ = params_.add("joint.time_weights", {c.max_frames});
    init_uniform_fan_in(time_weights_, c.max_frames, rng);
    joint_embed_ = Linear::create(params_, "joint.embed", 3, c.d_joint, rng);
    corr_token_ = params_.add("joint.corr_token", {1, c.d_joint});
    init_normal(corr_token_, 0.02, rng);
    joint_pe_ = sinusoidal_table(c.joints + 1, c.d_joint);
    for (std::size_t l = 0; l < c.joint_layers; ++l) {
      joint_blocks_.push_back(TransformerBlock::create(params_, "joint.block" + std::to_string(l), c.d_joint,
                                                       c.joint_heads, c.ffn_mult, dc, c.activation, rng));
    }
    token_proj_ = Linear::create(params_, "fuse.token_proj", c.d_joint, c.d_temporal, rng);
  }

  frame_embed_ = Linear::create(params_, "temporal.embed", ch, c.d_temporal, rng);
  temporal_pe_ = params_.add("temporal.pe", {c.max_frames, c.d_temporal});
  init_normal(temporal_pe_, 0.02, rng);
  for (std::size_t l = 0; l < c.temporal_layers; ++l) {
    temporal_blocks_.push_back(TransformerBlock::create(params_, "temporal.block" + std::to_string(l), c.d_temporal,
                                                        c.temporal_heads, c.ffn_mult, dc, c.activation, rng));
  }

  if (c.d_fusion != c.d_temporal) fusion_proj_ = Linear::create(params_, "fuse.proj", c.d_temporal, c.d_fusion, rng);
  for (std::size_t l = 0; l < c.fusion_layers; ++l) {
    fusion_blocks_.push_back(TransformerBlock::create(params_, "fuse.block" + std::to_string(l), c.d_fusion,
                                                      c.temporal_heads, c.ffn_mult, dc, c.activation, rng));
  }

  audio_attn_ = MultiHeadAttention::create(params_, "audio_attn", c.d_fusion, c.audio_dim, c.temporal_heads, rng);

  if (c.use_emotion) {
    switch (c.emotion_mode) {
      case EmotionMode::kAdaLN:
        emotion_adaln_ = AdaLNHead::create(params_, "emotion.adaln", c.d_fusion, c.d_fusion, rng);
        break;
      case EmotionMode::kInContextContent:
        emotion_content_ = Linear::create(params_, "emotion.content", c.d_fusion, c.d_fusion, rng);
        break;
      case EmotionMode::kCrossAttention:
        emotion_attn_ =
            MultiHeadAttention::create(params_, "emotion.attn", c.d_fusion, c.d_fusion, c.temporal_heads, rng);
        break;
      case EmotionMode::kInContextToken:
        break;
    }
  }
  for (std::size_t l = 0; l < c.refine_layers; ++l) {
    refine_blocks_.push_back(TransformerBlock::create(params_, "refine.block" + std::to_string(l), c.d_fusion,
                                                      c.temporal_heads, c.ffn_mult, dc, c.activation, rng));
  }

  out_gain_ = params_.add("out.norm.gain", {c.d_fusion});
  std::fill(out_gain_.mutable_data().begin(), out_gain_.mutable_data().end(), 1.0);
  out_bias_ = params_.add("out.norm.bias", {c.d_fusion});
  out_head_ = Linear::create(params_, "out.head", c.d_fusion, ch, rng);
  if (c.output_skip) {
    skip_ = Linear::create(params_, "out.skip", ch, ch, rng, false, true);
    skip_gain_ = AdaLNHead::create(params_, "out.skip_gain", dc, ch, rng);
  }
}

void JCFormer::randomize(Rng& rng, double stddev) {
  for (auto& p : params_.items()) init_normal(p.tensor, stddev, rng);
}

Tensor JCFormer::align_audio_raw(const AudioFeatureSequence& raw, std::size_t frames) {
  return Tensor({1, frames, raw.dims()}, interpolate_frames(raw.values(), raw.frame_count(), raw.dims(), frames));
}

Tensor JCFormer::project_audio(const Tensor& raw) const {
  if (raw.rank() != 3 || raw.dim(2) != config_.audio_in_dim) {
    throw DimensionError("audio features must be [B x N x " + std::to_string(config_.audio_in_dim) + "], got " +
                         shape_string(raw.shape()));
  }
  return audio_proj_(raw);
}

Tensor JCFormer::condition_vector(std::span<const std::size_t> steps, std::span<const int> speakers,
                                  const Tensor& emotion_embedding) const {
  if (speakers.size() != steps.size()) {
    throw DimensionError("condition: " + std::to_string(steps.size()) + " timesteps but " +
                         std::to_string(speakers.size()) + " speaker ids");
  }
  for (int s : speakers) {
    if (s < 0 || static_cast<std::size_t>(s) >= config_.speaker_count) {
      throw ArgumentError("speaker id " + std::to_string(s) + " out of range [0," +
                          std::to_string(config_.speaker_count) + ")");
    }
  }
  std::vector<double> pos(steps.begin(), steps.end());
  Tensor c = time_out_(silu(time_in_(sinusoidal_embedding(pos, config_.d_temporal))));
  c = add(c, embedding(speaker_table_, speakers));
  if (config_.use_emotion && config_.emotion_in_blocks && emotion_embedding.defined()) {
    c = add(c, emotion_to_cond_(emotion_embedding));
  }
  return silu(c);
}

EmotionCondition JCFormer::emotion_head(const Tensor& audio, std::span<const std::uint8_t> valid,
                                        std::span<const int> override_labels) const {
  if (!config_.use_emotion) throw ConfigError("emotion head is disabled in this model");
  EmotionCondition out;
  out.logits = emotion_fc_(masked_mean_frames(audio, valid));
  const std::size_t batch = audio.dim(0);
  const std::size_t classes = config_.emotion_count;
  if (!override_labels.empty()) {
    if (override_labels.size() != batch) {
      throw DimensionError("emotion override: expected " + std::to_string(batch) + " labels, got " +
                           std::to_string(override_labels.size()));
    }
    for (int l : override_labels) {
      if (l < 0 || static_cast<std::size_t>(l) >= classes) {
        throw ArgumentError("emotion label " + std::to_string(l) + " out of range [0," + std::to_string(classes) +
                            ")");
      }
    }
    out.labels.assign(override_labels.begin(), override_labels.end());
  } else {
    const auto& lg = out.logits.data();
    out.labels.resize(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < classes; ++k) {
        if (lg[b * classes + k] > lg[b * classes + best]) best = k;
      }
      out.labels[b] = static_cast<int>(best);
    }
  }
  out.embedding = embedding(emotion_table_, out.labels);
  return out;
}

Tensor JCFormer::joint_transformer(const Tensor& x_t, const Tensor& cond, std::span<const std::uint8_t> valid) const {
  const std::size_t batch = x_t.dim(0);
  const std::size_t joints = config_.joints;
  Tensor pooled = time_collapse(x_t, time_weights_, valid);                 // [B x 3J]
  Tensor tokens = joint_embed_(reshape(pooled, {batch, joints, 3}));        // [B x J x dj]
  Tensor corr = reshape(corr_token_, {1, 1, config_.d_joint});
  Tensor token_batch = corr;
  for (std::size_t b = 1; b < batch; ++b) token_batch = concat_tokens(token_batch, corr);
  token_batch = reshape(token_batch, {batch, 1, config_.d_joint});
  Tensor h = add_positional(concat_tokens(token_batch, tokens), joint_pe_);
  for (const auto& block : joint_blocks_) h = block(h, cond);
  return reshape(slice_tokens(h, 0, 1), {batch, config_.d_joint});
}

Tensor JCFormer::temporal_transformer(const Tensor& x_t, const Tensor& cond,
                                      std::span<const std::uint8_t> valid) const {
  Tensor h = add_positional(frame_embed_(x_t), temporal_pe_);
  for (const auto& block : temporal_blocks_) h = block(h, cond, valid);
  return h;
}

Tensor JCFormer::fuse_input(const Tensor& token, const Tensor& frames) const {
  return add_frames(frames, token_proj_(token));
}

Tensor JCFormer::fuse(const Tensor& token, const Tensor& frames, const Tensor& cond,
                      std::span<const std::uint8_t> valid) const {
  Tensor h = token.defined() ? fuse_input(token, frames) : frames;
  if (fusion_proj_) h = (*fusion_proj_)(h);
  for (const auto& block : fusion_blocks_) h = block(h, cond, valid);
  return h;
}

Tensor JCFormer::audio_cross_attention(const Tensor& h, const Tensor& audio,
                                       std::span<const std::uint8_t> valid) const {
  if (h.dim(0) != audio.dim(0) || h.dim(1) != audio.dim(1)) {
    throw DimensionError("audio cross-attention: gesture " + shape_string(h.shape()) + " vs audio " +
                         shape_string(audio.shape()));
  }
  return add(h, audio_attn_(h, audio, valid));
}

Tensor JCFormer::inject_emotion(const Tensor& h, const Tensor& e) const {
  switch (config_.emotion_mode) {
    case EmotionMode::kAdaLN:
      return emotion_adaln_.modulate(h, e);
    case EmotionMode::kInContextContent:
      return add_frames(h, emotion_content_(e));
    case EmotionMode::kCrossAttention:
      return add(h, emotion_attn_(h, reshape(e, {e.dim(0), 1, e.dim(1)})));
    case EmotionMode::kInContextToken:
      return concat_tokens(h, reshape(e, {e.dim(0), 1, e.dim(1)}));
  }
  throw ConfigError("unknown emotion mode");
}

Tensor JCFormer::condition_emotion(const Tensor& h, const Tensor& e, const Tensor& cond,
                                   std::span<const std::uint8_t> valid) const {
  const bool token = config_.emotion_mode == EmotionMode::kInContextToken;
  Tensor x = e.defined() ? inject_emotion(h, e) : h;
  FrameMask extended;
  std::span<const std::uint8_t> mask = valid;
  if (token && e.defined() && !valid.empty()) {
    const std::size_t batch = h.dim(0), frames = h.dim(1);
    extended.resize(batch * (frames + 1));
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(valid.begin() + static_cast<std::ptrdiff_t>(b * frames), frames,
                  extended.begin() + static_cast<std::ptrdiff_t>(b * (frames + 1)));
      extended[b * (frames + 1) + frames] = 1;
    }
    mask = extended;
  }
  for (const auto& block : refine_blocks_) x = block(x, cond, mask);
  if (token && e.defined()) x = slice_tokens(x, 0, h.dim(1));
  return x;
}

DenoiseOutput JCFormer::forward(const Tensor& x_t, std::span<const std::size_t> steps,
                                const DenoiseInput& input) const {
  const ModelConfig& c = config_;
  if (x_t.rank() != 3 || x_t.dim(2) != c.channels()) {
    throw DimensionError("x_t must be [B x N x " + std::to_string(c.channels()) + "], got " +
                         shape_string(x_t.shape()));
  }
  const std::size_t batch = x_t.dim(0), frames = x_t.dim(1);
  if (frames > c.max_frames) {
    throw ArgumentError("sequence of " + std::to_string(frames) + " frames exceeds max_frames " +
                        std::to_string(c.max_frames));
  }
  if (steps.size() != batch) {
    throw DimensionError("expected " + std::to_string(batch) + " timesteps, got " + std::to_string(steps.size()));
  }
  if (!input.audio.defined() || input.audio.rank() != 3 || input.audio.dim(0) != batch ||
      input.audio.dim(1) != frames) {
    throw DimensionError("audio must be aligned to x_t: x_t " + shape_string(x_t.shape()) + ", audio " +
                         (input.audio.defined() ? shape_string(input.audio.shape()) : std::string("<none>")));
  }
  if (!input.valid.empty() && input.valid.size() != batch * frames) {
    throw DimensionError("frame mask has " + std::to_string(input.valid.size()) + " entries, expected " +
                         std::to_string(batch * frames));
  }
  if (c.v_prediction) {
    if (input.alpha_bar.size() != batch) {
      throw DimensionError("v-prediction needs alpha_bar for each of the " + std::to_string(batch) + " items, got " +
                           std::to_string(input.alpha_bar.size()));
    }
    for (double a : input.alpha_bar) {
      if (!(a > 0.0 && a <= 1.0)) throw ArgumentError("alpha_bar must lie in (0, 1], got " + std::to_string(a));
    }
  }
  const std::span<const std::uint8_t> valid = input.valid;

  const Tensor audio = project_audio(input.audio);
  DenoiseOutput out;
  Tensor e;
  if (c.use_emotion) {
    out.emotion = emotion_head(audio, valid, input.emotion_override);
    e = out.emotion.embedding;
  }
  const Tensor cond = condition_vector(steps, input.speakers, e);

  Tensor token;
  if (c.use_spatial) token = joint_transformer(x_t, cond, valid);
  Tensor h = fuse(token, temporal_transformer(x_t, cond, valid), cond, valid);
  h = audio_cross_attention(h, audio, valid);
  h = condition_emotion(h, e, cond, valid);
  out.eps = out_head_(layer_norm(h, out_gain_, out_bias_));
  if (c.output_skip) out.eps = add(out.eps, modulate(skip_(x_t), skip_gain_.gamma(cond), skip_gain_.beta(cond)));
  if (c.v_prediction) {
    std::vector<double> keep(batch), gain(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      keep[b] = std::sqrt(1.0 - input.alpha_bar[b]);
      gain[b] = std::sqrt(input.alpha_bar[b]);
    }
    out.eps = add(scale_batch(x_t, keep), scale_batch(out.eps, gain));
  }
  return out;
}

}  // namespace emog
