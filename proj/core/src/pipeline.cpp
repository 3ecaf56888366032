#include "emog/pipeline.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "emog/error.hpp"
#include "emog/motion_io.hpp"
#include "emog/rng.hpp"

namespace emog {

std::vector<bool> parse_joint_mask(const SkeletonSpec& skeleton, const std::string& spec) {
  const std::size_t J = skeleton.joint_count();
  std::vector<bool> mask(J, false);
  if (spec == "none") return mask;
  std::stringstream ss(spec);
  std::string item;
  bool any = false;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    any = true;
    const auto groups = skeleton.group_names();
    if (std::find(groups.begin(), groups.end(), item) != groups.end()) {
      for (int j : skeleton.group(item)) mask[static_cast<std::size_t>(j)] = true;
      continue;
    }
    const int j = skeleton.index_of(item);
    if (j < 0) {
      std::string valid = "none";
      for (const auto& g : groups) valid += ", " + g;
      for (const auto& n : skeleton.names()) valid += ", " + n;
      throw ArgumentError("unknown joint or group '" + item + "'; valid names: " + valid);
    }
    mask[static_cast<std::size_t>(j)] = true;
  }
  if (!any) throw ArgumentError("empty joint mask specification");
  return mask;
}

Generator::Generator(const JCFormer& model, DatasetStats stats, ScheduleConfig schedule,
                     std::shared_ptr<const SkeletonSpec> skeleton, double fps)
    : model_(model),
      stats_(std::move(stats)),
      schedule_(NoiseSchedule::make(schedule)),
      variance_(schedule.variance),
      skeleton_(std::move(skeleton)),
      fps_(fps) {
  if (!skeleton_ || skeleton_->joint_count() != model_.config().joints) {
    throw DimensionError("generator: skeleton does not match the model's joint count");
  }
  if (stats_.channels() != model_.config().channels()) {
    throw DimensionError("generator: dataset stats do not match the model's channel count");
  }
  if (!(fps_ > 0.0)) throw ArgumentError("generator: fps must be > 0");
}

std::size_t Generator::frames_for(const AudioFeatureSequence& audio) const {
  if (audio.source_rate_hz() == fps_) return audio.frame_count();
  const double duration = static_cast<double>(audio.frame_count()) / audio.source_rate_hz();
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(duration * fps_)));
}

AudioFeatureSequence Generator::align(const AudioFeatureSequence& audio) const {
  if (audio.dims() != model_.config().audio_in_dim) {
    throw DimensionError("audio has " + std::to_string(audio.dims()) + " dims, model expects " +
                         std::to_string(model_.config().audio_in_dim));
  }
  const std::size_t n = frames_for(audio);
  if (n == audio.frame_count()) return audio;
  return AudioFeatureSequence(n, audio.dims(), interpolate_frames(audio.values(), audio.frame_count(), audio.dims(), n),
                              fps_);
}

Denoiser Generator::make_denoiser(const Tensor& audio, std::vector<int> speakers, std::vector<int> emotions) const {
  if (!emotions.empty() && !model_.config().use_emotion) {
    throw ArgumentError("this model has no emotion conditioning; --emotion is not available");
  }
  DenoiseInput input;
  input.audio = audio;
  input.speakers = std::move(speakers);
  input.emotion_override = std::move(emotions);
  return [this, input](const Tensor& x, std::size_t t) {
    const std::vector<std::size_t> steps(x.dim(0), t);
    DenoiseInput at = input;
    at.alpha_bar.assign(x.dim(0), schedule_.alpha_bar(t));
    return model_.forward(x, steps, at).eps;
  };
}

std::vector<GestureSequence> Generator::generate_clips(std::span<const AudioFeatureSequence> audio,
                                                       std::span<const int> speakers, std::span<const int> emotions,
                                                       Rng& rng, std::span<const GestureSequence> seeds) const {
  const std::size_t B = audio.size();
  if (B == 0) return {};
  if (speakers.size() != B || (!emotions.empty() && emotions.size() != B) || (!seeds.empty() && seeds.size() != B)) {
    throw DimensionError("generate_clips: per-item inputs must all have " + std::to_string(B) + " entries");
  }
  const std::size_t N = audio.front().frame_count(), D = audio.front().dims(), C = model_.config().channels();
  std::vector<double> a(B * N * D);
  for (std::size_t b = 0; b < B; ++b) {
    if (audio[b].frame_count() != N || audio[b].dims() != D) {
      throw DimensionError("generate_clips: all clips must share frame count and audio width");
    }
    std::copy(audio[b].values().begin(), audio[b].values().end(), a.begin() + static_cast<std::ptrdiff_t>(b * N * D));
  }
  const Denoiser denoiser = make_denoiser(Tensor({B, N, D}, std::move(a)), {speakers.begin(), speakers.end()},
                                          {emotions.begin(), emotions.end()});
  std::vector<double> ref(B * N * C, 0.0);
  std::vector<std::uint8_t> pinned(B * N * C, 0);
  for (std::size_t b = 0; b < seeds.size(); ++b) {
    const GestureSequence& s = seeds[b];
    if (s.channels() != C) throw DimensionError("seed pose has the wrong joint count");
    if (s.frame_count() > N) {
      throw ArgumentError("seed pose of " + std::to_string(s.frame_count()) + " frames is longer than the " +
                          std::to_string(N) + "-frame clip");
    }
    std::vector<double> v(s.values().begin(), s.values().end());
    normalize_values(v, stats_);
    std::copy(v.begin(), v.end(), ref.begin() + static_cast<std::ptrdiff_t>(b * N * C));
    std::fill_n(pinned.begin() + static_cast<std::ptrdiff_t>(b * N * C), v.size(), 1);
  }
  SamplerOptions opts;
  opts.variance = variance_;
  const Tensor x = pinned_sample(denoiser, Tensor({B, N, C}, std::move(ref)), pinned, schedule_, rng, opts);
  std::vector<GestureSequence> out;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> v(x.data().begin() + static_cast<std::ptrdiff_t>(b * N * C),
                          x.data().begin() + static_cast<std::ptrdiff_t>((b + 1) * N * C));
    denormalize_values(v, stats_);
    if (!seeds.empty()) {
      const auto sv = seeds[b].values();
      std::copy(sv.begin(), sv.end(), v.begin());
    }
    out.emplace_back(skeleton_, N, std::move(v), fps_);
  }
  return out;
}

GestureSequence Generator::windowed(const AudioFeatureSequence& raw_audio, int speaker, std::optional<int> emotion,
                                    std::uint64_t seed, std::size_t window, std::size_t overlap,
                                    const GestureSequence* seed_pose, const GestureSequence* reference,
                                    const std::vector<bool>* joint_mask) const {
  const AudioFeatureSequence audio = align(raw_audio);
  const std::size_t L = audio.frame_count(), C = model_.config().channels(), J = model_.config().joints;
  if (window < 1) throw ArgumentError("window must be >= 1");
  const std::size_t W = std::min({window, L, model_.config().max_frames});
  if (L > W && overlap >= W) {
    throw ArgumentError("overlap " + std::to_string(overlap) + " must be shorter than the window " +
                        std::to_string(W));
  }
  if (seed_pose) {
    if (seed_pose->channels() != C) throw DimensionError("seed pose has the wrong joint count");
    if (seed_pose->frame_count() > W) {
      throw ArgumentError("seed pose of " + std::to_string(seed_pose->frame_count()) +
                          " frames is longer than the generation window of " + std::to_string(W));
    }
  }
  if (reference) {
    if (reference->channels() != C) throw DimensionError("reference motion has the wrong joint count");
    if (reference->frame_count() != L) {
      throw ArgumentError("reference motion has " + std::to_string(reference->frame_count()) +
                          " frames but the audio covers " + std::to_string(L));
    }
    if (!joint_mask || joint_mask->size() != J) throw DimensionError("joint mask length must equal the joint count");
  }
  std::vector<double> ref_norm;
  if (reference) {
    ref_norm.assign(reference->values().begin(), reference->values().end());
    normalize_values(ref_norm, stats_);
  }

  std::vector<int> emotions;
  if (emotion) emotions.push_back(*emotion);
  const Rng base(seed);
  std::vector<GestureSequence> clips;
  std::vector<double> previous;  // normalized output of the last window
  std::size_t start = 0;
  for (std::size_t k = 0;; ++k) {
    const std::size_t len = std::min(W, L - start);
    const AudioFeatureSequence a = audio.slice(start, len);
    const Denoiser denoiser = make_denoiser(Tensor({1, len, audio.dims()}, {a.values().begin(), a.values().end()}),
                                            {speaker}, emotions);
    std::vector<double> ref(len * C, 0.0);
    std::vector<std::uint8_t> pinned(len * C, 0);
    if (reference) {
      for (std::size_t n = 0; n < len; ++n) {
        for (std::size_t j = 0; j < J; ++j) {
          if ((*joint_mask)[j]) continue;
          for (std::size_t d = 0; d < 3; ++d) {
            const std::size_t i = n * C + j * 3 + d;
            ref[i] = ref_norm[start * C + i];
            pinned[i] = 1;
          }
        }
      }
    }
    if (k == 0 && seed_pose) {
      std::vector<double> v(seed_pose->values().begin(), seed_pose->values().end());
      normalize_values(v, stats_);
      std::copy(v.begin(), v.end(), ref.begin());
      std::fill_n(pinned.begin(), v.size(), 1);
    }
    if (k > 0) {
      std::copy(previous.end() - static_cast<std::ptrdiff_t>(overlap * C), previous.end(), ref.begin());
      std::fill_n(pinned.begin(), overlap * C, 1);
    }
    Rng rng = base.split(k);
    SamplerOptions opts;
    opts.variance = variance_;
    const Tensor x = pinned_sample(denoiser, Tensor({1, len, C}, std::move(ref)), pinned, schedule_, rng, opts);
    previous.assign(x.data().begin(), x.data().end());
    std::vector<double> v = previous;
    denormalize_values(v, stats_);
    clips.emplace_back(skeleton_, len, std::move(v), fps_);
    if (start + len >= L) break;
    start += W - overlap;
  }

  GestureSequence out = clips.size() == 1 ? clips.front() : stitch(clips, overlap);
  auto values = out.values();
  if (seed_pose) {
    const auto sv = seed_pose->values();
    std::copy(sv.begin(), sv.end(), values.begin());
  }
  if (reference) {
    const auto rv = reference->values();
    for (std::size_t n = 0; n < L; ++n) {
      for (std::size_t j = 0; j < J; ++j) {
        if ((*joint_mask)[j]) continue;
        for (std::size_t d = 0; d < 3; ++d) values[n * C + j * 3 + d] = rv[n * C + j * 3 + d];
      }
    }
  }
  return out;
}

GestureSequence Generator::generate(const AudioFeatureSequence& audio, const GenerateOptions& o) const {
  return windowed(audio, o.speaker, o.emotion, o.seed, o.window, o.overlap,
                  o.seed_pose ? &*o.seed_pose : nullptr, nullptr, nullptr);
}

GestureSequence Generator::edit(const GestureSequence& reference, const std::vector<bool>& joint_mask,
                                const AudioFeatureSequence& audio, const EditOptions& o) const {
  if (joint_mask.size() != model_.config().joints) {
    throw DimensionError("joint mask has " + std::to_string(joint_mask.size()) + " entries, model has " +
                         std::to_string(model_.config().joints) + " joints");
  }
  return windowed(audio, o.speaker, o.emotion, o.seed, o.window, o.overlap, nullptr, &reference, &joint_mask);
}

// ---- evaluation --------------------------------------------------------------

std::vector<GestureSequence> feature_clips(std::span<const CorpusSample> samples, std::size_t length) {
  std::vector<GestureSequence> out;
  for (const auto& s : samples) {
    if (s.motion.frame_count() >= length) out.push_back(s.motion.slice(0, length));
  }
  return out;
}

namespace {

struct ClipScores {
  double srgr = 0.0;
  double beat_align = 0.0;
  std::size_t beat_defined = 0;
  std::size_t beat_undefined = 0;
};

void score(const MetricsConfig& config, std::span<const CorpusSample> test, std::span<const GestureSequence> gen,
           const GestureFeatureExtractor& extractor, const SampleMatrix& real_latents, MetricsReport& report) {
  ClipScores s;
  for (std::size_t i = 0; i < test.size(); ++i) {
    s.srgr += srgr(test[i].motion, gen[i], {}, config.srgr_delta);
    try {
      const BeatSet bm = kinematic_beats(gen[i], config.kinematic);
      const BeatSet ba = audio_beats(test[i].audio, gen[i].fps(), config.audio);
      s.beat_align += beat_align(bm, ba, config.beat_sigma);
      ++s.beat_defined;
    } catch (const MetricError&) {
      ++s.beat_undefined;
    }
  }
  std::vector<GestureSequence> gen_clips;
  for (const auto& g : gen) {
    if (g.frame_count() >= extractor.clip_length()) gen_clips.push_back(g.slice(0, extractor.clip_length()));
  }
  report.fgd.push_back(fgd(real_latents, extractor.encode_all(gen_clips)));
  report.srgr.push_back(s.srgr / static_cast<double>(test.size()));
  if (s.beat_defined) report.beat_align.push_back(s.beat_align / static_cast<double>(s.beat_defined));
  report.undefined_beat_align += s.beat_undefined;
}

}  // namespace

MetricsReport evaluate_model(const Generator& generator, std::span<const CorpusSample> test,
                             const GestureFeatureExtractor& extractor, const MetricsConfig& config,
                             std::size_t repetitions, const std::string& label) {
  if (test.empty()) throw ArgumentError("evaluation needs a non-empty test split");
  if (repetitions == 0) throw ArgumentError("evaluation needs at least one repetition");
  const SampleMatrix real = extractor.encode_all(feature_clips(test, extractor.clip_length()));
  constexpr std::size_t kBatch = 16;
  MetricsReport report;
  report.label = label;
  for (std::size_t r = 0; r < repetitions; ++r) {
    Rng rng = Rng(config.seed).split(r + 1);
    std::vector<GestureSequence> gen(test.size());
    std::map<std::size_t, std::vector<std::size_t>> by_length;
    std::vector<AudioFeatureSequence> aligned;
    for (const auto& s : test) aligned.push_back(generator.align(s.audio));
    for (std::size_t i = 0; i < test.size(); ++i) by_length[aligned[i].frame_count()].push_back(i);
    for (const auto& [frames, items] : by_length) {
      if (frames > generator.model().config().max_frames) {
        for (std::size_t i : items) {
          GenerateOptions o;
          o.speaker = test[i].speaker;
          o.seed = rng.next_u64();
          gen[i] = generator.generate(test[i].audio, o);
        }
        continue;
      }
      for (std::size_t at = 0; at < items.size(); at += kBatch) {
        const std::size_t n = std::min(kBatch, items.size() - at);
        std::vector<AudioFeatureSequence> audio;
        std::vector<int> speakers;
        for (std::size_t k = 0; k < n; ++k) {
          audio.push_back(aligned[items[at + k]]);
          speakers.push_back(test[items[at + k]].speaker);
        }
        auto clips = generator.generate_clips(audio, speakers, {}, rng);
        for (std::size_t k = 0; k < n; ++k) gen[items[at + k]] = std::move(clips[k]);
      }
    }
    score(config, test, gen, extractor, real, report);
  }
  return report;
}

MetricsReport evaluate_real(std::span<const CorpusSample> test, const GestureFeatureExtractor& extractor,
                            const MetricsConfig& config, const std::string& label) {
  if (test.empty()) throw ArgumentError("evaluation needs a non-empty test split");
  const SampleMatrix real = extractor.encode_all(feature_clips(test, extractor.clip_length()));
  std::vector<GestureSequence> gen;
  for (const auto& s : test) gen.push_back(s.motion);
  MetricsReport report;
  report.label = label;
  score(config, test, gen, extractor, real, report);
  return report;
}

// ---- experiment harness -------------------------------------------------------

std::vector<ExperimentSpec> mode_experiments(const RunConfig& base) {
  std::vector<ExperimentSpec> out;
  for (EmotionMode m : {EmotionMode::kAdaLN, EmotionMode::kInContextToken, EmotionMode::kInContextContent,
                        EmotionMode::kCrossAttention}) {
    ExperimentSpec s{to_string(m), base.model, base.training};
    s.model.emotion_mode = m;
    s.model.use_emotion = true;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<ExperimentSpec> ablation_experiments(const RunConfig& base) {
  std::vector<ExperimentSpec> out;
  out.push_back({"full", base.model, base.training});
  out.push_back({"no_rec", base.model, base.training});
  out.back().training.use_rec = false;
  out.push_back({"no_jcformer_spatial", base.model, base.training});
  out.back().model.use_spatial = false;
  out.push_back({"no_emotion", base.model, base.training});
  out.back().model.use_emotion = false;
  return out;
}

std::vector<ExperimentResult> run_experiments(const RunConfig& base, const Corpus& corpus,
                                              std::span<const ExperimentSpec> specs, const HarnessOptions& options,
                                              const std::function<void(const std::string&)>& progress) {
  if (corpus.train.empty() || corpus.test.empty()) throw ArgumentError("experiments need train and test splits");
  auto say = [&](const std::string& m) {
    if (progress) progress(m);
  };
  std::vector<GestureSequence> train_motion;
  for (const auto& s : corpus.train) train_motion.push_back(s.motion);
  const DatasetStats stats = DatasetStats::compute(train_motion);
  say("training feature extractor");
  ExtractorReport xr;
  const GestureFeatureExtractor extractor =
      GestureFeatureExtractor::train(feature_clips(corpus.train, base.metrics.extractor.clip_length),
                                     base.metrics.extractor, &xr);
  if (!xr.converged) {
    say("warning: extractor held-out MSE " + format_double(xr.heldout_mse) + " above target " +
        format_double(base.metrics.extractor.target_mse));
  }
  std::span<const CorpusSample> test = corpus.test;
  if (options.test_limit && options.test_limit < test.size()) test = test.first(options.test_limit);
  const std::size_t reps = options.repetitions ? options.repetitions : base.metrics.repetitions;
  const auto skeleton = corpus_skeleton(corpus.config);

  std::vector<ExperimentResult> results;
  for (const auto& spec : specs) {
    TrainConfig tc = spec.training;
    if (options.train_steps) tc.steps = options.train_steps;
    JCFormer model(spec.model);
    Trainer trainer(model, NoiseSchedule::make(base.schedule), tc, make_training_set(corpus.train, stats, tc));
    say("training " + spec.name + " for " + std::to_string(tc.steps) + " steps");
    trainer.run(tc.steps);
    const Generator gen(model, stats, base.schedule, skeleton, corpus.config.fps);
    say("evaluating " + spec.name);
    results.push_back({spec.name, trainer.log(), evaluate_model(gen, test, extractor, base.metrics, reps, spec.name)});
  }
  return results;
}

std::string experiments_report(std::span<const ExperimentResult> results) {
  std::ostringstream os;
  os << "experiment                FGD                  SRGR                 BeatAlign            final L_mse\n";
  auto cell = [](const std::vector<double>& v) {
    if (v.empty()) return std::string("n/a");
    const MetricValue m = MetricsReport::summarize(v);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f +- %.4f", m.mean, m.stddev);
    return std::string(buf);
  };
  for (const auto& r : results) {
    char line[256];
    std::snprintf(line, sizeof line, "%-25s %-20s %-20s %-20s %.4f\n", r.name.c_str(), cell(r.report.fgd).c_str(),
                  cell(r.report.srgr).c_str(), cell(r.report.beat_align).c_str(),
                  r.log.empty() ? 0.0 : r.log.back().mse);
    os << line;
  }
  return os.str();
}

std::string experiments_csv(std::span<const ExperimentResult> results) {
  std::string out = "experiment,fgd_mean,fgd_std,srgr_mean,srgr_std,beat_align_mean,beat_align_std,final_l_mse\n";
  for (const auto& r : results) {
    const MetricValue f = MetricsReport::summarize(r.report.fgd), s = MetricsReport::summarize(r.report.srgr),
                      b = MetricsReport::summarize(r.report.beat_align);
    out += r.name + "," + format_double(f.mean) + "," + format_double(f.stddev) + "," + format_double(s.mean) + "," +
           format_double(s.stddev) + "," + format_double(b.mean) + "," + format_double(b.stddev) + "," +
           format_double(r.log.empty() ? 0.0 : r.log.back().mse) + "\n";
  }
  return out;
}

// ---- export -----------------------------------------------------------------

std::vector<double> forward_kinematics(const GestureSequence& motion) {
  const SkeletonSpec& sk = motion.skeleton();
  const std::size_t N = motion.frame_count(), J = motion.joint_count();
  std::vector<double> pos(N * J * 3, 0.0);
  std::vector<Eigen::Matrix3d> global(J);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t j = 0; j < J; ++j) {
      const auto f = motion.frame(n);
      const Eigen::Vector3d r(f[j * 3], f[j * 3 + 1], f[j * 3 + 2]);
      const double angle = r.norm();
      const Eigen::Matrix3d local =
          angle > 0.0 ? Eigen::AngleAxisd(angle, r / angle).toRotationMatrix() : Eigen::Matrix3d::Identity();
      const int p = sk.parents()[j];
      Eigen::Vector3d x = Eigen::Vector3d::Zero();
      if (p < 0) {
        global[j] = local;
      } else {
        const auto pi = static_cast<std::size_t>(p);
        global[j] = global[pi] * local;
        x = Eigen::Vector3d(pos[(n * J + pi) * 3], pos[(n * J + pi) * 3 + 1], pos[(n * J + pi) * 3 + 2]) +
            global[pi] * Eigen::Vector3d::UnitY();
      }
      for (int d = 0; d < 3; ++d) pos[(n * J + j) * 3 + static_cast<std::size_t>(d)] = x(d);
    }
  }
  return pos;
}

std::vector<std::filesystem::path> export_svg_frames(const GestureSequence& motion, std::size_t keyframes,
                                                     const std::filesystem::path& dir) {
  const std::size_t N = motion.frame_count(), J = motion.joint_count();
  if (keyframes < 1 || keyframes > N) {
    throw ArgumentError("keyframe count must be in [1, " + std::to_string(N) + "], got " + std::to_string(keyframes));
  }
  const std::vector<double> pos = forward_kinematics(motion);
  double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
  for (std::size_t i = 0; i < N * J; ++i) {
    lo_x = std::min(lo_x, pos[i * 3]);
    hi_x = std::max(hi_x, pos[i * 3]);
    lo_y = std::min(lo_y, pos[i * 3 + 1]);
    hi_y = std::max(hi_y, pos[i * 3 + 1]);
  }
  const double pad = 0.5, w = hi_x - lo_x + 2 * pad, h = hi_y - lo_y + 2 * pad;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> paths;
  const auto& parents = motion.skeleton().parents();
  for (std::size_t k = 0; k < keyframes; ++k) {
    const std::size_t n = keyframes == 1 ? 0 : (k * (N - 1) + (keyframes - 1) / 2) / (keyframes - 1);
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << format_double(lo_x - pad) << " "
       << format_double(-(hi_y + pad)) << " " << format_double(w) << " " << format_double(h) << "\">\n";
    os << "<title>frame " << n << "</title>\n";
    for (std::size_t j = 0; j < J; ++j) {
      if (parents[j] < 0) continue;
      const std::size_t p = static_cast<std::size_t>(parents[j]);
      os << "<line x1=\"" << format_double(pos[(n * J + p) * 3]) << "\" y1=\""
         << format_double(-pos[(n * J + p) * 3 + 1]) << "\" x2=\"" << format_double(pos[(n * J + j) * 3])
         << "\" y2=\"" << format_double(-pos[(n * J + j) * 3 + 1])
         << "\" stroke=\"black\" stroke-width=\"0.05\" stroke-linecap=\"round\"/>\n";
    }
    os << "</svg>\n";
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu.svg", k);
    const auto path = dir / name;
    write_file(path, os.str());
    paths.push_back(path);
  }
  return paths;
}

std::string latents_csv(const GestureSequence& motion, const GestureFeatureExtractor& extractor) {
  const std::size_t L = extractor.clip_length();
  const auto offsets = window_offsets(motion.frame_count(), L, L);
  if (offsets.empty()) {
    throw ArgumentError("motion of " + std::to_string(motion.frame_count()) + " frames is shorter than the " +
                        std::to_string(L) + "-frame feature window");
  }
  std::string out = "window,start";
  for (std::size_t d = 0; d < extractor.latent_dim(); ++d) out += ",z" + std::to_string(d);
  out += "\n";
  for (std::size_t w = 0; w < offsets.size(); ++w) {
    const auto z = extractor.encode(motion.slice(offsets[w], L));
    out += std::to_string(w) + "," + std::to_string(offsets[w]);
    for (double v : z) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

}  // namespace emog
