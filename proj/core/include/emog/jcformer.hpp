#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emog/motion.hpp"
#include "emog/nn.hpp"
#include "emog/ops.hpp"
#include "emog/optim.hpp"

namespace emog {

enum class EmotionMode { kAdaLN, kInContextToken, kInContextContent, kCrossAttention };

std::string to_string(EmotionMode mode);
/// Accepts "adaln", "in_context_token", "in_context_content", "cross_attention".
EmotionMode parse_emotion_mode(const std::string& name);

struct ModelConfig {
  std::size_t joints = 47;
  std::size_t max_frames = 150;
  std::size_t audio_in_dim = 32;  // raw feature width before projection
  std::size_t audio_dim = 128;
  std::size_t d_joint = 64;
  std::size_t d_temporal = 512;
  std::size_t d_fusion = 512;
  std::size_t temporal_layers = 8;
  std::size_t joint_layers = 4;
  std::size_t fusion_layers = 2;
  std::size_t refine_layers = 1;  // blocks after emotion conditioning
  std::size_t joint_heads = 4;
  std::size_t temporal_heads = 8;
  std::size_t ffn_mult = 4;
  std::size_t emotion_count = 8;
  std::size_t speaker_count = 4;
  EmotionMode emotion_mode = EmotionMode::kAdaLN;
  bool use_spatial = true;
  bool use_emotion = true;
  /// Also feed the emotion embedding into the block-level conditioning vector.
  bool emotion_in_blocks = false;
  /// The head predicts v = sqrt(abar) eps - sqrt(1 - abar) x0 and forward()
  /// returns eps = sqrt(1 - abar) x_t + sqrt(abar) v. Needs
  /// DenoiseInput::alpha_bar. Off: the head predicts eps directly.
  bool v_prediction = true;
  /// Adds a per-frame linear map of x_t to the head, gated by the condition
  /// vector, so channels lost in the temporal embedding (d_temporal < 3J)
  /// still reach the output.
  bool output_skip = true;
  Activation activation = Activation::kGelu;
  std::uint64_t init_seed = 1;

  std::size_t channels() const { return 3 * joints; }
  void validate() const;
  bool operator==(const ModelConfig&) const = default;

  static ModelConfig toy();
};

/// Linear time interpolation of `frames` x `dims` rows onto `target` rows.
/// Endpoints map to endpoints.
std::vector<double> interpolate_frames(std::span<const double> values, std::size_t frames, std::size_t dims,
                                       std::size_t target);

struct EmotionCondition {
  Tensor logits;              // [B x C]
  std::vector<int> labels;    // hard labels actually used
  Tensor embedding;           // [B x d_fusion]
};

/// Everything the denoiser sees besides x_t and t.
struct DenoiseInput {
  Tensor audio;                       // [B x N x audio_in_dim], already time-aligned
  std::vector<int> speakers;          // [B]
  std::vector<int> emotion_override;  // empty = argmax of the head
  FrameMask valid;                    // [B x N], empty = all valid
  std::vector<double> alpha_bar;      // [B], abar at each item's step; v-prediction only
};

struct DenoiseOutput {
  Tensor eps;  // [B x N x 3J]
  EmotionCondition emotion;  // undefined tensors when emotion is disabled
};

class JCFormer {
 public:
  explicit JCFormer(ModelConfig config);

  JCFormer(const JCFormer&) = delete;
  JCFormer& operator=(const JCFormer&) = delete;

  const ModelConfig& config() const { return config_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  /// x_t: [B x N x 3J], one step per batch item.
  DenoiseOutput forward(const Tensor& x_t, std::span<const std::size_t> steps, const DenoiseInput& input) const;

  /// Interpolates raw audio onto `frames` rows, returned [1 x frames x D_raw].
  static Tensor align_audio_raw(const AudioFeatureSequence& raw, std::size_t frames);
  /// Learned projection D_raw -> D_a.
  Tensor project_audio(const Tensor& raw) const;

  /// Conditioning vector from timestep and speaker (plus emotion when
  /// configured) -> [B x d_temporal].
  Tensor condition_vector(std::span<const std::size_t> steps, std::span<const int> speakers,
                          const Tensor& emotion_embedding = {}) const;
  EmotionCondition emotion_head(const Tensor& audio, std::span<const std::uint8_t> valid,
                                std::span<const int> override_labels) const;
  /// [B x N x 3J] -> [B x d_joint].
  Tensor joint_transformer(const Tensor& x_t, const Tensor& cond, std::span<const std::uint8_t> valid) const;
  /// [B x N x 3J] -> [B x N x d_temporal].
  Tensor temporal_transformer(const Tensor& x_t, const Tensor& cond, std::span<const std::uint8_t> valid) const;
  /// Adds the projected token to every frame; returns the fusion-block input.
  Tensor fuse_input(const Tensor& token, const Tensor& frames) const;
  Tensor fuse(const Tensor& token, const Tensor& frames, const Tensor& cond,
              std::span<const std::uint8_t> valid) const;
  Tensor audio_cross_attention(const Tensor& h, const Tensor& audio, std::span<const std::uint8_t> valid) const;
  Tensor condition_emotion(const Tensor& h, const Tensor& e, const Tensor& cond,
                           std::span<const std::uint8_t> valid) const;
  /// The modulation before the refinement blocks, exposed for probes.
  Tensor inject_emotion(const Tensor& h, const Tensor& e) const;

  /// Overwrites every parameter with N(0, stddev) noise (tests and probes).
  void randomize(Rng& rng, double stddev = 0.2);

 private:
  ModelConfig config_;
  ParameterSet params_;

  Linear time_in_;
  Linear time_out_;
  Tensor speaker_table_;

  Linear audio_proj_;
  Linear emotion_fc_;
  Tensor emotion_table_;
  Linear emotion_to_cond_;

  Tensor time_weights_;  // [N_max]
  Linear joint_embed_;
  Tensor corr_token_;    // [1 x d_joint]
  Tensor joint_pe_;      // fixed [J+1 x d_joint]
  std::vector<TransformerBlock> joint_blocks_;

  Linear frame_embed_;
  Tensor temporal_pe_;   // learnable [N_max x d_temporal]
  std::vector<TransformerBlock> temporal_blocks_;

  Linear token_proj_;
  std::optional<Linear> fusion_proj_;
  std::vector<TransformerBlock> fusion_blocks_;

  MultiHeadAttention audio_attn_;

  AdaLNHead emotion_adaln_;
  Linear emotion_content_;
  MultiHeadAttention emotion_attn_;
  std::vector<TransformerBlock> refine_blocks_;

  Tensor out_gain_;
  Tensor out_bias_;
  Linear out_head_;
  Linear skip_;
  AdaLNHead skip_gain_;
};

}  // namespace emog
