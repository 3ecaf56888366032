#pragma once

// nlohmann::json conversions for the config structs. Private to the library.

#include <set>
#include <string>

#include "emog/config.hpp"
#include "emog/error.hpp"
#include "json.hpp"

namespace emog {

using Json = nlohmann::ordered_json;

/// Reads keys of one JSON object section, remembering which were consumed so
/// leftovers can be reported.
class SectionReader {
 public:
  SectionReader(const Json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw ConfigError(section_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(section_ + "." + key + ": " + e.what());
    }
  }

  template <typename T, typename Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    std::string s;
    bool present = j_.contains(key);
    get(key, s);
    if (present) out = parse(s);
  }

  const Json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(section_ + ": unknown key '" + it.key() + "'");
    }
  }

 private:
  const Json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

inline std::string activation_name(Activation a) { return a == Activation::kSilu ? "silu" : "gelu"; }
inline Activation parse_activation(const std::string& s) {
  if (s == "gelu") return Activation::kGelu;
  if (s == "silu") return Activation::kSilu;
  throw ConfigError("unknown activation '" + s + "' (expected gelu or silu)");
}
inline std::string beta_schedule_name(BetaSchedule b) { return b == BetaSchedule::kCosine ? "cosine" : "linear"; }
inline BetaSchedule parse_beta_schedule(const std::string& s) {
  if (s == "linear") return BetaSchedule::kLinear;
  if (s == "cosine") return BetaSchedule::kCosine;
  throw ConfigError("unknown beta schedule '" + s + "' (expected linear or cosine)");
}
inline std::string variance_name(VarianceMode v) {
  switch (v) {
    case VarianceMode::kBeta: return "beta";
    case VarianceMode::kPosterior: return "posterior";
    case VarianceMode::kZero: return "zero";
  }
  return "beta";
}
inline VarianceMode parse_variance(const std::string& s) {
  if (s == "beta") return VarianceMode::kBeta;
  if (s == "posterior") return VarianceMode::kPosterior;
  if (s == "zero") return VarianceMode::kZero;
  throw ConfigError("unknown variance mode '" + s + "' (expected beta, posterior or zero)");
}

inline void to_json(Json& j, const CorpusConfig& c) {
  j = Json{{"emotion_count", c.emotion_count}, {"speaker_count", c.speaker_count},
           {"clip_length", c.clip_length},     {"fps", c.fps},
           {"audio_dim", c.audio_dim},         {"emotion_block", c.emotion_block},
           {"beat_period_min", c.beat_period_min}, {"beat_period_max", c.beat_period_max},
           {"beat_jitter", c.beat_jitter},     {"amplitude_min", c.amplitude_min},
           {"amplitude_max", c.amplitude_max}, {"posture_scale", c.posture_scale},
           {"speaker_scale", c.speaker_scale}, {"emotion_noise", c.emotion_noise},
           {"filler_noise", c.filler_noise},   {"motion_noise", c.motion_noise},
           {"joints", c.joints},               {"seed", c.seed}};
}

inline void from_json(const Json& j, CorpusConfig& c) {
  SectionReader r(j, "corpus");
  r.get("emotion_count", c.emotion_count);
  r.get("speaker_count", c.speaker_count);
  r.get("clip_length", c.clip_length);
  r.get("fps", c.fps);
  r.get("audio_dim", c.audio_dim);
  r.get("emotion_block", c.emotion_block);
  r.get("beat_period_min", c.beat_period_min);
  r.get("beat_period_max", c.beat_period_max);
  r.get("beat_jitter", c.beat_jitter);
  r.get("amplitude_min", c.amplitude_min);
  r.get("amplitude_max", c.amplitude_max);
  r.get("posture_scale", c.posture_scale);
  r.get("speaker_scale", c.speaker_scale);
  r.get("emotion_noise", c.emotion_noise);
  r.get("filler_noise", c.filler_noise);
  r.get("motion_noise", c.motion_noise);
  r.get("joints", c.joints);
  r.get("seed", c.seed);
  r.finish();
}

inline void to_json(Json& j, const ModelConfig& c) {
  j = Json{{"joints", c.joints},
           {"max_frames", c.max_frames},
           {"audio_in_dim", c.audio_in_dim},
           {"audio_dim", c.audio_dim},
           {"d_joint", c.d_joint},
           {"d_temporal", c.d_temporal},
           {"d_fusion", c.d_fusion},
           {"temporal_layers", c.temporal_layers},
           {"joint_layers", c.joint_layers},
           {"fusion_layers", c.fusion_layers},
           {"refine_layers", c.refine_layers},
           {"joint_heads", c.joint_heads},
           {"temporal_heads", c.temporal_heads},
           {"ffn_mult", c.ffn_mult},
           {"emotion_count", c.emotion_count},
           {"speaker_count", c.speaker_count},
           {"emotion_mode", to_string(c.emotion_mode)},
           {"use_spatial", c.use_spatial},
           {"use_emotion", c.use_emotion},
           {"emotion_in_blocks", c.emotion_in_blocks},
           {"v_prediction", c.v_prediction},
           {"output_skip", c.output_skip},
           {"activation", activation_name(c.activation)},
           {"init_seed", c.init_seed}};
}

inline void from_json(const Json& j, ModelConfig& c) {
  SectionReader r(j, "model");
  r.get("joints", c.joints);
  r.get("max_frames", c.max_frames);
  r.get("audio_in_dim", c.audio_in_dim);
  r.get("audio_dim", c.audio_dim);
  r.get("d_joint", c.d_joint);
  r.get("d_temporal", c.d_temporal);
  r.get("d_fusion", c.d_fusion);
  r.get("temporal_layers", c.temporal_layers);
  r.get("joint_layers", c.joint_layers);
  r.get("fusion_layers", c.fusion_layers);
  r.get("refine_layers", c.refine_layers);
  r.get("joint_heads", c.joint_heads);
  r.get("temporal_heads", c.temporal_heads);
  r.get("ffn_mult", c.ffn_mult);
  r.get("emotion_count", c.emotion_count);
  r.get("speaker_count", c.speaker_count);
  r.get_enum("emotion_mode", c.emotion_mode, parse_emotion_mode);
  r.get("use_spatial", c.use_spatial);
  r.get("use_emotion", c.use_emotion);
  r.get("emotion_in_blocks", c.emotion_in_blocks);
  r.get("v_prediction", c.v_prediction);
  r.get("output_skip", c.output_skip);
  r.get_enum("activation", c.activation, parse_activation);
  r.get("init_seed", c.init_seed);
  r.finish();
}

inline void to_json(Json& j, const ScheduleConfig& c) {
  j = Json{{"steps", c.steps},
           {"beta_start", c.beta_start},
           {"beta_end", c.beta_end},
           {"kind", beta_schedule_name(c.kind)},
           {"variance", variance_name(c.variance)}};
}

inline void from_json(const Json& j, ScheduleConfig& c) {
  SectionReader r(j, "schedule");
  r.get("steps", c.steps);
  r.get("beta_start", c.beta_start);
  r.get("beta_end", c.beta_end);
  r.get_enum("kind", c.kind, parse_beta_schedule);
  r.get_enum("variance", c.variance, parse_variance);
  r.finish();
}

inline void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"batch_size", c.batch_size},
           {"steps", c.steps},
           {"lr", c.lr},
           {"lr_schedule", to_string(c.lr_schedule)},
           {"warmup_steps", c.warmup_steps},
           {"adam_beta1", c.adam_beta1},
           {"adam_beta2", c.adam_beta2},
           {"adam_eps", c.adam_eps},
           {"grad_clip", c.grad_clip},
           {"clip_length", c.clip_length},
           {"clip_stride", c.clip_stride},
           {"variable_length", c.variable_length},
           {"vl_window", c.vl_window},
           {"vl_stride", c.vl_stride},
           {"mask_ratio_min", c.mask_ratio_min},
           {"mask_ratio_max", c.mask_ratio_max},
           {"mask_placement", to_string(c.mask_placement)},
           {"lambda_rec", c.lambda_rec},
           {"use_rec", c.use_rec},
           {"checkpoint_every", c.checkpoint_every},
           {"seed", c.seed}};
}

inline void from_json(const Json& j, TrainConfig& c) {
  SectionReader r(j, "training");
  r.get("batch_size", c.batch_size);
  r.get("steps", c.steps);
  r.get("lr", c.lr);
  r.get_enum("lr_schedule", c.lr_schedule, parse_lr_schedule);
  r.get("warmup_steps", c.warmup_steps);
  r.get("adam_beta1", c.adam_beta1);
  r.get("adam_beta2", c.adam_beta2);
  r.get("adam_eps", c.adam_eps);
  r.get("grad_clip", c.grad_clip);
  r.get("clip_length", c.clip_length);
  r.get("clip_stride", c.clip_stride);
  r.get("variable_length", c.variable_length);
  r.get("vl_window", c.vl_window);
  r.get("vl_stride", c.vl_stride);
  r.get("mask_ratio_min", c.mask_ratio_min);
  r.get("mask_ratio_max", c.mask_ratio_max);
  r.get_enum("mask_placement", c.mask_placement, parse_mask_placement);
  r.get("lambda_rec", c.lambda_rec);
  r.get("use_rec", c.use_rec);
  r.get("checkpoint_every", c.checkpoint_every);
  r.get("seed", c.seed);
  r.finish();
}

inline void to_json(Json& j, const ExtractorConfig& c) {
  j = Json{{"clip_length", c.clip_length}, {"hidden", c.hidden},         {"latent", c.latent},
           {"steps", c.steps},             {"batch_size", c.batch_size}, {"lr", c.lr},
           {"target_mse", c.target_mse},   {"seed", c.seed}};
}

inline void from_json(const Json& j, ExtractorConfig& c) {
  SectionReader r(j, "metrics.extractor");
  r.get("clip_length", c.clip_length);
  r.get("hidden", c.hidden);
  r.get("latent", c.latent);
  r.get("steps", c.steps);
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr);
  r.get("target_mse", c.target_mse);
  r.get("seed", c.seed);
  r.finish();
}

inline void to_json(Json& j, const MetricsConfig& c) {
  j = Json{{"extractor", c.extractor},
           {"srgr_delta", c.srgr_delta},
           {"beat_sigma", c.beat_sigma},
           {"kinematic_min_prominence", c.kinematic.min_prominence},
           {"kinematic_window", c.kinematic.window},
           {"kinematic_endpoint_ratio", c.kinematic.endpoint_ratio},
           {"kinematic_speed_floor", c.kinematic.speed_floor},
           {"audio_beat_channel", c.audio.channel},
           {"audio_beat_threshold", c.audio.threshold},
           {"repetitions", c.repetitions},
           {"seed", c.seed}};
}

inline void from_json(const Json& j, MetricsConfig& c) {
  SectionReader r(j, "metrics");
  if (const Json* e = r.sub("extractor")) c.extractor = e->get<ExtractorConfig>();
  r.get("srgr_delta", c.srgr_delta);
  r.get("beat_sigma", c.beat_sigma);
  r.get("kinematic_min_prominence", c.kinematic.min_prominence);
  r.get("kinematic_window", c.kinematic.window);
  r.get("kinematic_endpoint_ratio", c.kinematic.endpoint_ratio);
  r.get("kinematic_speed_floor", c.kinematic.speed_floor);
  r.get("audio_beat_channel", c.audio.channel);
  r.get("audio_beat_threshold", c.audio.threshold);
  r.get("repetitions", c.repetitions);
  r.get("seed", c.seed);
  r.finish();
}

}  // namespace emog
