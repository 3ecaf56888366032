// emog: command-line front end for corpus generation, training, sampling,
// editing, evaluation and export.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "emog/checkpoint.hpp"
#include "emog/config.hpp"
#include "emog/corpus.hpp"
#include "emog/error.hpp"
#include "emog/motion_io.hpp"
#include "emog/pipeline.hpp"
#include "emog/rng.hpp"
#include "emog/training.hpp"

namespace fs = std::filesystem;
using namespace emog;

namespace {

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool toy = false;
};

RunConfig resolve_config(const Common& c) {
  RunConfig rc = c.config_path.empty() ? (c.toy ? RunConfig::toy() : RunConfig::defaults())
                                       : load_run_config(c.config_path);
  if (c.seed) {
    rc.seed = *c.seed;
    rc.apply_master_seed();
  }
  rc.validate();
  return rc;
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Master seed; re-derives every section seed");
  cmd->add_flag("--toy", c.toy, "Use the toy preset when no --config is given");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

AudioFeatureSequence read_audio(const std::string& path, double csv_rate) {
  if (fs::path(path).extension() == ".csv") return import_audio_csv(path, csv_rate);
  return load_audio(path);
}

DatasetStats train_stats(const Corpus& corpus) {
  std::vector<GestureSequence> m;
  for (const auto& s : corpus.train) m.push_back(s.motion);
  return DatasetStats::compute(m);
}

void note(const std::string& msg) { std::cerr << msg << "\n"; }

// ---- commands ---------------------------------------------------------------

struct InitConfigArgs {
  Common common;
  std::string out;
};

int run_init_config(const InitConfigArgs& a) {
  save_run_config(a.out, resolve_config(a.common));
  return 0;
}

struct GenDataArgs {
  Common common;
  std::string out;
};

int run_gen_data(const GenDataArgs& a) {
  const RunConfig rc = resolve_config(a.common);
  const Corpus corpus = generate_corpus(rc.corpus, rc.corpus_samples);
  save_corpus(corpus, a.out);
  std::cout << "wrote " << corpus.size() << " samples (" << corpus.train.size() << " train, "
            << corpus.validation.size() << " validation, " << corpus.test.size() << " test) to " << a.out << "\n";
  return 0;
}

struct TrainArgs {
  Common common;
  std::string corpus;
  std::string out;
  std::string resume;
  std::optional<std::size_t> steps;
  std::optional<double> lambda_rec;
  bool no_rec = false;
  bool no_emotion = false;
  bool no_spatial = false;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  RunConfig rc = resolve_config(a.common);
  if (a.steps) rc.training.steps = *a.steps;
  if (a.lambda_rec) rc.training.lambda_rec = *a.lambda_rec;
  if (a.no_rec) rc.training.use_rec = false;
  if (a.no_emotion) rc.model.use_emotion = false;
  if (a.no_spatial) rc.model.use_spatial = false;
  rc.validate();
  const Corpus corpus = load_corpus(a.corpus);
  if (corpus.train.empty()) throw ArgumentError("corpus has an empty training split");
  ensure_dir(a.out);
  save_run_config(fs::path(a.out) / "run_config.json", rc);

  std::unique_ptr<JCFormer> model;
  DatasetStats stats;
  std::optional<LoadedCheckpoint> resumed;
  if (!a.resume.empty()) {
    resumed = load_checkpoint(a.resume, &rc.model);
    if (!(resumed->meta.schedule == rc.schedule)) throw ConfigError("checkpoint schedule differs from the config");
    model = std::move(resumed->model);
    stats = resumed->meta.stats;
  } else {
    model = std::make_unique<JCFormer>(rc.model);
    stats = train_stats(corpus);
  }
  const NoiseSchedule schedule = NoiseSchedule::make(rc.schedule);
  Trainer trainer(*model, schedule, rc.training, make_training_set(corpus.train, stats, rc.training));
  if (resumed) {
    if (resumed->adam) trainer.optimizer() = *resumed->adam;
    trainer.restore(resumed->meta.step, resumed->meta.log);
    note("resuming at step " + std::to_string(resumed->meta.step));
  }

  auto checkpoint = [&](const fs::path& path) {
    CheckpointMeta meta{rc.schedule, rc.training, stats, trainer.steps_done(), trainer.log()};
    save_checkpoint(path, *model, meta, &trainer.optimizer());
    write_file(fs::path(a.out) / "loss_log.csv", loss_log_csv(trainer.log()));
  };
  const auto t0 = std::chrono::steady_clock::now();
  trainer.run(rc.training.steps, [&](const LossRecord& r) {
    if (!a.quiet && (r.step % 50 == 0 || r.step == rc.training.steps)) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      char buf[160];
      std::snprintf(buf, sizeof buf, "step %zu  L_mse %.4f  L_rec %.4f  L_ce %.4f  total %.4f  (%.0fs)", r.step,
                    r.mse, r.rec, r.ce, r.total, s);
      note(buf);
    }
    if (rc.training.checkpoint_every && r.step % rc.training.checkpoint_every == 0) {
      char name[40];
      std::snprintf(name, sizeof name, "step_%06zu.ckpt", r.step);
      checkpoint(fs::path(a.out) / name);
    }
  });
  checkpoint(fs::path(a.out) / "final.ckpt");

  if (!corpus.validation.empty()) {
    const TrainingSet val = make_training_set(corpus.validation, stats, rc.training);
    const ValidationSnapshot snap = evaluate_validation(*model, schedule, val, rc.metrics.seed);
    std::string text = "validation clips " + std::to_string(snap.clips) + "\nL_mse " + format_double(snap.mse) +
                       "\nL_rec " + format_double(snap.rec) + "\n";
    if (snap.has_emotion) text += "emotion_accuracy " + format_double(snap.emotion_accuracy) + "\n";
    write_file(fs::path(a.out) / "validation.txt", text);
    std::cout << text;
  }
  return 0;
}

struct SampleArgs {
  std::string checkpoint;
  std::string audio;
  double audio_rate = 15.0;
  int speaker = 0;
  std::optional<int> emotion;
  std::string seed_pose;
  std::uint64_t seed = 0;
  std::size_t window = 34;
  std::string out;
};

Generator make_generator(const LoadedCheckpoint& ck) {
  const ModelConfig& m = ck.model->config();
  auto skeleton = m.joints == 47 ? std::make_shared<const SkeletonSpec>(SkeletonSpec::upper_body())
                                 : std::make_shared<const SkeletonSpec>(SkeletonSpec::chain(m.joints));
  return Generator(*ck.model, ck.meta.stats, ck.meta.schedule, skeleton, 15.0);
}

int run_sample(const SampleArgs& a) {
  const LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  const Generator gen = make_generator(ck);
  GenerateOptions o;
  o.speaker = a.speaker;
  o.emotion = a.emotion;
  o.seed = a.seed;
  o.window = a.window;
  if (!a.seed_pose.empty()) {
    GestureSequence s = load_motion(a.seed_pose);
    o.seed_pose = s.frame_count() > 4 ? s.slice(0, 4) : s;
  }
  const GestureSequence motion = gen.generate(read_audio(a.audio, a.audio_rate), o);
  save_motion(motion, a.out);
  std::cout << "wrote " << motion.frame_count() << " frames to " << a.out << "\n";
  return 0;
}

struct EditArgs {
  std::string checkpoint;
  std::string reference;
  std::string mask;
  std::string audio;
  double audio_rate = 15.0;
  int speaker = 0;
  std::optional<int> emotion;
  std::uint64_t seed = 0;
  std::string out;
};

int run_edit(const EditArgs& a) {
  const LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
  const Generator gen = make_generator(ck);
  const GestureSequence reference = load_motion(a.reference);
  const std::vector<bool> mask = parse_joint_mask(reference.skeleton(), a.mask);
  EditOptions o;
  o.speaker = a.speaker;
  o.emotion = a.emotion;
  o.seed = a.seed;
  const GestureSequence motion = gen.edit(reference, mask, read_audio(a.audio, a.audio_rate), o);
  save_motion(motion, a.out);
  std::cout << "wrote " << motion.frame_count() << " frames to " << a.out << "\n";
  return 0;
}

struct EvalArgs {
  Common common;
  std::string checkpoint;
  std::string corpus;
  std::optional<std::size_t> repetitions;
  bool real = false;
  std::string out;
};

int run_eval(const EvalArgs& a) {
  const RunConfig rc = resolve_config(a.common);
  const Corpus corpus = load_corpus(a.corpus);
  if (corpus.test.empty()) throw ArgumentError("corpus has an empty test split");
  ExtractorReport xr;
  const GestureFeatureExtractor extractor = GestureFeatureExtractor::train(
      feature_clips(corpus.train, rc.metrics.extractor.clip_length), rc.metrics.extractor, &xr);
  if (!xr.converged) {
    note("warning: feature extractor held-out MSE " + format_double(xr.heldout_mse) + " is above the target " +
         format_double(rc.metrics.extractor.target_mse));
  }
  MetricsReport report;
  if (a.real) {
    report = evaluate_real(corpus.test, extractor, rc.metrics);
  } else {
    if (a.checkpoint.empty()) throw ArgumentError("eval needs --checkpoint (or --real)");
    const LoadedCheckpoint ck = load_checkpoint(a.checkpoint);
    const Generator gen = make_generator(ck);
    report = evaluate_model(gen, corpus.test, extractor, rc.metrics, a.repetitions.value_or(rc.metrics.repetitions),
                            fs::path(a.checkpoint).stem().string());
  }
  std::cout << report.text();
  if (!a.out.empty()) {
    write_file(a.out + ".txt", report.text());
    write_file(a.out + ".csv", report.csv());
  }
  return 0;
}

struct ExportArgs {
  Common common;
  std::string motion;
  std::string format;
  std::string out;
  std::size_t keyframes = 8;
  std::string corpus;
};

int run_export(const ExportArgs& a) {
  if (a.format != "csv" && a.format != "svg-frames" && a.format != "latents") {
    throw ArgumentError("unknown export format '" + a.format + "' (expected csv, svg-frames or latents)");
  }
  const GestureSequence motion = load_motion(a.motion);
  if (a.format == "csv") {
    export_motion_csv(motion, a.out);
  } else if (a.format == "svg-frames") {
    const auto paths = export_svg_frames(motion, a.keyframes, a.out);
    std::cout << "wrote " << paths.size() << " frames to " << a.out << "\n";
  } else {
    if (a.corpus.empty()) throw ArgumentError("latents export needs --corpus to train the feature extractor");
    const RunConfig rc = resolve_config(a.common);
    const Corpus corpus = load_corpus(a.corpus);
    const GestureFeatureExtractor extractor = GestureFeatureExtractor::train(
        feature_clips(corpus.train, rc.metrics.extractor.clip_length), rc.metrics.extractor);
    write_file(a.out, latents_csv(motion, extractor));
  }
  return 0;
}

struct CompareArgs {
  Common common;
  std::string corpus;
  std::string kind;
  std::string out;
  HarnessOptions harness;
};

int run_compare(const CompareArgs& a) {
  const RunConfig rc = resolve_config(a.common);
  const Corpus corpus = load_corpus(a.corpus);
  std::vector<ExperimentSpec> specs;
  if (a.kind == "modes") {
    specs = mode_experiments(rc);
  } else if (a.kind == "ablation") {
    specs = ablation_experiments(rc);
  } else {
    throw ArgumentError("unknown comparison '" + a.kind + "' (expected modes or ablation)");
  }
  const auto results = run_experiments(rc, corpus, specs, a.harness, note);
  const std::string report = experiments_report(results);
  std::cout << report;
  if (!a.out.empty()) {
    ensure_dir(a.out);
    write_file(fs::path(a.out) / (a.kind + ".txt"), report);
    write_file(fs::path(a.out) / (a.kind + ".csv"), experiments_csv(results));
    for (const auto& r : results) write_file(fs::path(a.out) / (r.name + "_loss_log.csv"), loss_log_csv(r.log));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emog: emotion-conditioned co-speech gesture diffusion"};
  app.require_subcommand(1);

  InitConfigArgs init;
  auto* c_init = app.add_subcommand("init-config", "Write a run configuration with every default filled in");
  add_common(c_init, init.common);
  c_init->add_option("-o,--out", init.out, "Output file")->required();

  GenDataArgs gd;
  auto* c_gen = app.add_subcommand("gen-data", "Generate the synthetic corpus");
  add_common(c_gen, gd.common);
  c_gen->add_option("-o,--out", gd.out, "Output directory")->required();

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train a model on a corpus");
  add_common(c_train, tr.common);
  c_train->add_option("--corpus", tr.corpus, "Corpus directory")->required();
  c_train->add_option("-o,--out", tr.out, "Output directory")->required();
  c_train->add_option("--resume", tr.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  c_train->add_option("--steps", tr.steps, "Override training.steps");
  c_train->add_option("--lambda-rec", tr.lambda_rec, "Override training.lambda_rec");
  c_train->add_flag("--no-rec", tr.no_rec, "Drop the reconstruction loss");
  c_train->add_flag("--no-emotion", tr.no_emotion, "Drop the emotion head and conditioning");
  c_train->add_flag("--no-jcformer-spatial", tr.no_spatial, "Drop the joint transformer branch");
  c_train->add_flag("-q,--quiet", tr.quiet, "No progress output");

  SampleArgs sa;
  auto* c_sample = app.add_subcommand("sample", "Generate motion for an audio feature file");
  c_sample->add_option("--checkpoint", sa.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  c_sample->add_option("--audio", sa.audio, "Audio features (.audio container or .csv)")
      ->required()
      ->check(CLI::ExistingFile);
  c_sample->add_option("--audio-rate", sa.audio_rate, "Feature rate in Hz for CSV input");
  c_sample->add_option("--speaker", sa.speaker, "Speaker id");
  c_sample->add_option("--emotion", sa.emotion, "Emotion label overriding the predicted one");
  c_sample->add_option("--seed-pose", sa.seed_pose, "Motion whose first 4 frames are pinned")
      ->check(CLI::ExistingFile);
  c_sample->add_option("--seed", sa.seed, "Sampling seed");
  c_sample->add_option("--window", sa.window, "Frames per generation window");
  c_sample->add_option("-o,--out", sa.out, "Output motion file")->required();

  EditArgs ed;
  auto* c_edit = app.add_subcommand("edit", "Regenerate selected joints of a reference motion");
  c_edit->add_option("--checkpoint", ed.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
  c_edit->add_option("--reference", ed.reference, "Reference motion")->required()->check(CLI::ExistingFile);
  c_edit->add_option("--mask", ed.mask, "Joints to regenerate: none, all, body, left_hand, right_hand or names")
      ->required();
  c_edit->add_option("--audio", ed.audio, "Audio features")->required()->check(CLI::ExistingFile);
  c_edit->add_option("--audio-rate", ed.audio_rate, "Feature rate in Hz for CSV input");
  c_edit->add_option("--speaker", ed.speaker, "Speaker id");
  c_edit->add_option("--emotion", ed.emotion, "Emotion label override");
  c_edit->add_option("--seed", ed.seed, "Sampling seed");
  c_edit->add_option("-o,--out", ed.out, "Output motion file")->required();

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "FGD, SRGR and BeatAlign on the test split");
  add_common(c_eval, ev.common);
  c_eval->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->check(CLI::ExistingFile);
  c_eval->add_option("--corpus", ev.corpus, "Corpus directory")->required();
  c_eval->add_option("--repetitions", ev.repetitions, "Sampling repetitions (default from config)");
  c_eval->add_flag("--real", ev.real, "Score the real test motion against itself");
  c_eval->add_option("-o,--out", ev.out, "Report path prefix (.txt and .csv are written)");

  ExportArgs ex;
  auto* c_export = app.add_subcommand("export", "Export a motion as csv, svg-frames or latents");
  add_common(c_export, ex.common);
  c_export->add_option("--motion", ex.motion, "Motion file")->required()->check(CLI::ExistingFile);
  c_export->add_option("--format", ex.format, "csv, svg-frames or latents")->required();
  c_export->add_option("-o,--out", ex.out, "Output file or directory")->required();
  c_export->add_option("--keyframes", ex.keyframes, "Number of SVG frames");
  c_export->add_option("--corpus", ex.corpus, "Corpus whose training split fits the feature extractor");

  CompareArgs cmp;
  auto* c_cmp = app.add_subcommand("compare", "Train and score the conditioning modes or the ablations");
  add_common(c_cmp, cmp.common);
  c_cmp->add_option("--corpus", cmp.corpus, "Corpus directory")->required();
  c_cmp->add_option("--kind", cmp.kind, "modes or ablation")->required();
  c_cmp->add_option("-o,--out", cmp.out, "Output directory");
  c_cmp->add_option("--steps", cmp.harness.train_steps, "Training steps per experiment");
  c_cmp->add_option("--repetitions", cmp.harness.repetitions, "Sampling repetitions per experiment");
  c_cmp->add_option("--test-limit", cmp.harness.test_limit, "Score only the first N test samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kArgument);
  }

  try {
    if (c_init->parsed()) return run_init_config(init);
    if (c_gen->parsed()) return run_gen_data(gd);
    if (c_train->parsed()) return run_train(tr);
    if (c_sample->parsed()) return run_sample(sa);
    if (c_edit->parsed()) return run_edit(ed);
    if (c_eval->parsed()) return run_eval(ev);
    if (c_export->parsed()) return run_export(ex);
    if (c_cmp->parsed()) return run_compare(cmp);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kIo);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNumeric);
  }
  return 0;
}
