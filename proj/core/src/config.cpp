#include "emog/config.hpp"

#include "config_json.hpp"
#include "emog/motion_io.hpp"
#include "emog/rng.hpp"

namespace emog {

void RunConfig::apply_master_seed() {
  corpus.seed = mix64(seed ^ 0x636f72707573ull);
  model.init_seed = mix64(seed ^ 0x6d6f64656cull);
  training.seed = mix64(seed ^ 0x747261696eull);
  metrics.seed = mix64(seed ^ 0x6576616cull);
  metrics.extractor.seed = mix64(seed ^ 0x65787472ull);
}

void RunConfig::validate() const {
  corpus.validate();
  model.validate();
  training.validate();
  NoiseSchedule::make(schedule);
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(corpus_samples >= 10, "corpus_samples must be >= 10");
  need(corpus.joints == model.joints, "corpus.joints and model.joints differ");
  need(corpus.audio_dim == model.audio_in_dim, "corpus.audio_dim and model.audio_in_dim differ");
  need(corpus.emotion_count == model.emotion_count, "corpus.emotion_count and model.emotion_count differ");
  need(corpus.speaker_count == model.speaker_count, "corpus.speaker_count and model.speaker_count differ");
  need(training.clip_length <= model.max_frames, "training.clip_length exceeds model.max_frames");
  need(!training.variable_length || training.vl_window <= model.max_frames,
       "training.vl_window exceeds model.max_frames");
  need(metrics.extractor.clip_length >= 2, "metrics.extractor.clip_length must be >= 2");
  need(metrics.repetitions >= 1, "metrics.repetitions must be >= 1");
  need(metrics.srgr_delta > 0.0, "metrics.srgr_delta must be > 0");
  need(metrics.beat_sigma > 0.0, "metrics.beat_sigma must be > 0");
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.apply_master_seed();
  return c;
}

RunConfig RunConfig::toy() {
  RunConfig c;
  c.model = ModelConfig::toy();
  // A 200-step chain with the 1000-step betas scaled by 5 so that
  // alpha_bar_T still ends near zero.
  c.schedule.steps = 200;
  c.schedule.beta_start = 5e-4;
  c.schedule.beta_end = 0.1;
  c.training.steps = 2000;
  c.training.batch_size = 16;
  c.training.lr = 5e-4;
  c.training.warmup_steps = 100;
  c.training.checkpoint_every = 1000;
  c.apply_master_seed();
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  Json j;
  j["version"] = RunConfig::kVersion;
  j["seed"] = c.seed;
  j["corpus_samples"] = c.corpus_samples;
  j["corpus"] = c.corpus;
  j["model"] = c.model;
  j["schedule"] = c.schedule;
  j["training"] = c.training;
  j["metrics"] = c.metrics;
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("config: ") + e.what(), e.byte);
  }
  RunConfig c;
  SectionReader r(j, "config");
  int version = RunConfig::kVersion;
  r.get("version", version);
  if (version != RunConfig::kVersion) {
    throw ConfigError("config: unsupported version " + std::to_string(version) + " (expected " +
                      std::to_string(RunConfig::kVersion) + ")");
  }
  r.get("seed", c.seed);
  r.get("corpus_samples", c.corpus_samples);
  if (const Json* s = r.sub("corpus")) c.corpus = s->get<CorpusConfig>();
  if (const Json* s = r.sub("model")) c.model = s->get<ModelConfig>();
  if (const Json* s = r.sub("schedule")) c.schedule = s->get<ScheduleConfig>();
  if (const Json* s = r.sub("training")) c.training = s->get<TrainConfig>();
  if (const Json* s = r.sub("metrics")) c.metrics = s->get<MetricsConfig>();
  r.finish();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  try {
    return run_config_from_json(read_file(path));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_run_config(const std::filesystem::path& path, const RunConfig& config) {
  write_file(path, run_config_to_json(config));
}

std::string model_config_to_json(const ModelConfig& config) { return Json(config).dump(); }

ModelConfig model_config_from_json(const std::string& text) { return Json::parse(text).get<ModelConfig>(); }

}  // namespace emog
