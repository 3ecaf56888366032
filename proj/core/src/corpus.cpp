#include "emog/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "config_json.hpp"
#include "emog/error.hpp"
#include "emog/motion_io.hpp"
#include "emog/rng.hpp"

namespace emog {

void CorpusConfig::validate() const {
  if (emotion_count < 2) throw ConfigError("corpus.emotion_count must be at least 2");
  if (speaker_count < 1) throw ConfigError("corpus.speaker_count must be at least 1");
  if (clip_length < 5) throw ConfigError("corpus.clip_length must be at least 5 frames");
  if (!(fps > 0)) throw ConfigError("corpus.fps must be positive");
  if (beat_period_min < 2.0 || beat_period_max < beat_period_min) {
    throw ConfigError("corpus beat periods must satisfy 2 <= min <= max");
  }
  if (audio_dim < kEmotionBlockStart + emotion_block + 1) {
    throw ConfigError("corpus.audio_dim too small for beat, emotion and speaker channels");
  }
  if (emotion_block < 1 || (emotion_block < 63 && (std::size_t{1} << emotion_block) < emotion_count)) {
    throw ConfigError("corpus.emotion_block cannot encode every emotion distinctly");
  }
  if (joints < 1) throw ConfigError("corpus.joints must be positive");
  if (beat_jitter < 0.0 || beat_jitter >= 0.5) throw ConfigError("corpus.beat_jitter must lie in [0, 0.5)");
}

std::shared_ptr<const SkeletonSpec> corpus_skeleton(const CorpusConfig& config) {
  if (config.joints == 47) return std::make_shared<const SkeletonSpec>(SkeletonSpec::upper_body());
  return std::make_shared<const SkeletonSpec>(SkeletonSpec::chain(config.joints));
}

CorpusTables CorpusTables::derive(const CorpusConfig& config) {
  config.validate();
  const std::size_t C = config.emotion_count, S = config.speaker_count, ch = 3 * config.joints;
  Rng rng = Rng(config.seed).split(0x7461626c6573ull);
  CorpusTables t;
  for (std::size_t e = 0; e < C; ++e) {
    const double f = static_cast<double>(e) / static_cast<double>(C - 1);
    t.amplitude.push_back(config.amplitude_min + f * (config.amplitude_max - config.amplitude_min));
    t.period.push_back(config.beat_period_min + f * (config.beat_period_max - config.beat_period_min));
  }
  // Decouple amplitude and period ordering so neither is a proxy for the other.
  for (std::size_t i = C - 1; i > 0; --i) std::swap(t.period[i], t.period[rng.below(i + 1)]);

  for (std::size_t e = 0; e < C; ++e) {
    std::vector<double> p(ch);
    for (double& v : p) v = config.posture_scale * rng.normal();
    t.posture.push_back(std::move(p));
  }
  for (std::size_t s = 0; s < S; ++s) {
    std::vector<double> p(ch);
    for (double& v : p) v = config.speaker_scale * rng.normal();
    t.speaker_offset.push_back(std::move(p));
    t.speaker_gain.push_back(rng.uniform(0.8, 1.2));
    t.speaker_code.push_back(S == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(s) / static_cast<double>(S - 1));
  }
  t.stroke_weights.resize(ch);
  for (double& w : t.stroke_weights) w = rng.uniform(0.3, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);

  std::set<std::vector<double>> used;
  for (std::size_t e = 0; e < C; ++e) {
    std::vector<double> code(config.emotion_block);
    do {
      for (double& v : code) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
    } while (!used.insert(code).second);
    t.emotion_code.push_back(std::move(code));
  }
  return t;
}

CorpusSample generate_sample(const CorpusConfig& config, int emotion, int speaker, std::uint64_t seed) {
  return generate_sample(config, CorpusTables::derive(config), corpus_skeleton(config), emotion, speaker, seed);
}

CorpusSample generate_sample(const CorpusConfig& config, const CorpusTables& tables,
                             const std::shared_ptr<const SkeletonSpec>& skeleton, int emotion, int speaker,
                             std::uint64_t seed) {
  if (emotion < 0 || static_cast<std::size_t>(emotion) >= config.emotion_count) {
    throw ArgumentError("emotion " + std::to_string(emotion) + " outside [0, " +
                        std::to_string(config.emotion_count) + ")");
  }
  if (speaker < 0 || static_cast<std::size_t>(speaker) >= config.speaker_count) {
    throw ArgumentError("speaker " + std::to_string(speaker) + " outside [0, " +
                        std::to_string(config.speaker_count) + ")");
  }
  const std::size_t N = config.clip_length, ch = 3 * config.joints, D = config.audio_dim;
  Rng rng(seed);
  const double period = tables.period[emotion];

  // Beat schedule, starting one virtual beat before frame 0.
  std::vector<double> beats;
  double b = -std::floor(rng.uniform(0.0, period));
  beats.push_back(b);
  while (b < static_cast<double>(N) + period) {
    const double jitter = 1.0 + config.beat_jitter * rng.uniform(-1.0, 1.0);
    b += std::max(2.0, std::round(period * jitter));
    beats.push_back(b);
  }

  CorpusSample s;
  s.emotion = emotion;
  s.speaker = speaker;
  s.seed = seed;
  for (double v : beats) {
    if (v >= 0.0 && v < static_cast<double>(N)) s.beat_frames.push_back(static_cast<std::size_t>(v));
  }

  const double first_sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const double amp = tables.amplitude[emotion] * tables.speaker_gain[speaker];
  std::vector<double> motion(N * ch);
  std::vector<double> phase_cos(N), phase_sin(N);
  for (std::size_t n = 0; n < N; ++n) {
    const double t = static_cast<double>(n);
    std::size_t k = 0;
    while (k + 1 < beats.size() && beats[k + 1] <= t) ++k;
    const double u = (t - beats[k]) / (beats[k + 1] - beats[k]);
    const double sign = (k % 2 == 0) ? first_sign : -first_sign;
    const double stroke = sign * std::cos(std::numbers::pi * u);
    phase_cos[n] = std::cos(std::numbers::pi * u);
    phase_sin[n] = std::sin(std::numbers::pi * u);
    for (std::size_t c = 0; c < ch; ++c) {
      double v = tables.posture[emotion][c] + tables.speaker_offset[speaker][c] + amp * tables.stroke_weights[c] * stroke;
      if (config.motion_noise > 0.0) v += config.motion_noise * rng.normal();
      motion[n * ch + c] = v;
    }
  }

  std::vector<double> audio(N * D, 0.0);
  for (std::size_t n = 0; n < N; ++n) {
    const double t = static_cast<double>(n);
    double sharp = 0.0, wide = 0.0;
    for (double bt : beats) {
      const double d = t - bt;
      sharp += std::exp(-d * d / (2.0 * 0.7 * 0.7));
      wide += std::exp(-d * d / (2.0 * 2.0 * 2.0));
    }
    double* row = audio.data() + n * D;
    row[kOnsetChannel] = sharp;
    row[kWideOnsetChannel] = wide;
    row[kPhaseCosChannel] = phase_cos[n];
    row[kPhaseSinChannel] = phase_sin[n];
    for (std::size_t c = 0; c < config.emotion_block; ++c) {
      row[kEmotionBlockStart + c] = tables.emotion_code[emotion][c] + config.emotion_noise * rng.normal();
    }
    const std::size_t speaker_ch = kEmotionBlockStart + config.emotion_block;
    row[speaker_ch] = tables.speaker_code[speaker];
    for (std::size_t c = speaker_ch + 1; c < D; ++c) row[c] = config.filler_noise * rng.normal();
  }

  s.motion = GestureSequence(skeleton, N, std::move(motion), config.fps);
  s.audio = AudioFeatureSequence(N, D, std::move(audio), config.fps);
  return s;
}

Corpus generate_corpus(const CorpusConfig& config, std::size_t sample_count) {
  if (sample_count < 10) throw ArgumentError("corpus needs at least 10 samples");
  const CorpusTables tables = CorpusTables::derive(config);
  const auto skeleton = corpus_skeleton(config);
  const std::size_t C = config.emotion_count;

  std::vector<std::vector<CorpusSample>> by_emotion(C);
  for (std::size_t i = 0; i < sample_count; ++i) {
    const int emotion = static_cast<int>(i % C);
    const int speaker = static_cast<int>((i / C) % config.speaker_count);
    CorpusSample s = generate_sample(config, tables, skeleton, emotion, speaker, mix64(config.seed ^ mix64(i + 1)));
    s.id = i;
    by_emotion[emotion].push_back(std::move(s));
  }

  Corpus corpus;
  corpus.config = config;
  for (auto& group : by_emotion) {
    const std::size_t n = group.size();
    const std::size_t n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
    const std::size_t n_val = static_cast<std::size_t>(std::llround(0.1 * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
      auto& dst = i < n_train ? corpus.train : (i < n_train + n_val ? corpus.validation : corpus.test);
      dst.push_back(std::move(group[i]));
    }
  }
  auto by_id = [](const CorpusSample& a, const CorpusSample& b) { return a.id < b.id; };
  std::sort(corpus.train.begin(), corpus.train.end(), by_id);
  std::sort(corpus.validation.begin(), corpus.validation.end(), by_id);
  std::sort(corpus.test.begin(), corpus.test.end(), by_id);
  return corpus;
}

namespace {

std::string sample_stem(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", id);
  return buf;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "samples", ec);
  if (ec) throw IoError("cannot create '" + (dir / "samples").string() + "': " + ec.message());

  nlohmann::ordered_json manifest;
  manifest["format"] = "emog-corpus";
  manifest["version"] = 1;
  manifest["config"] = corpus.config;
  nlohmann::ordered_json splits;
  auto write_split = [&](const char* name, const std::vector<CorpusSample>& samples) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& s : samples) {
      const std::string stem = sample_stem(s.id);
      save_motion(s.motion, dir / "samples" / (stem + ".motion"));
      save_audio(s.audio, dir / "samples" / (stem + ".audio"));
      nlohmann::ordered_json meta;
      meta["id"] = s.id;
      meta["emotion"] = s.emotion;
      meta["speaker"] = s.speaker;
      meta["seed"] = s.seed;
      meta["beat_frames"] = s.beat_frames;
      write_file(dir / "samples" / (stem + ".json"), meta.dump(2) + "\n");
      list.push_back(stem);
    }
    splits[name] = list;
  };
  write_split("train", corpus.train);
  write_split("validation", corpus.validation);
  write_split("test", corpus.test);
  manifest["splits"] = splits;
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

Corpus load_corpus(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / "manifest.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("corpus manifest: " + std::string(e.what()), e.byte);
  }
  if (manifest.value("format", "") != "emog-corpus" || manifest.value("version", 0) != 1) {
    throw ParseError("'" + (dir / "manifest.json").string() + "' is not a version 1 corpus manifest", 0);
  }
  Corpus corpus;
  try {
    corpus.config = manifest.at("config").get<CorpusConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("corpus manifest config: " + std::string(e.what()));
  }
  auto read_split = [&](const char* name, std::vector<CorpusSample>& out) {
    for (const auto& stem_json : manifest.at("splits").at(name)) {
      const std::string stem = stem_json.get<std::string>();
      CorpusSample s;
      s.motion = load_motion(dir / "samples" / (stem + ".motion"));
      s.audio = load_audio(dir / "samples" / (stem + ".audio"));
      const auto meta = nlohmann::json::parse(read_file(dir / "samples" / (stem + ".json")));
      s.id = meta.at("id").get<std::size_t>();
      s.emotion = meta.at("emotion").get<int>();
      s.speaker = meta.at("speaker").get<int>();
      s.seed = meta.at("seed").get<std::uint64_t>();
      s.beat_frames = meta.at("beat_frames").get<std::vector<std::size_t>>();
      out.push_back(std::move(s));
    }
  };
  try {
    read_split("train", corpus.train);
    read_split("validation", corpus.validation);
    read_split("test", corpus.test);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("corpus sample metadata: " + std::string(e.what()), 0);
  }
  return corpus;
}

}  // namespace emog
