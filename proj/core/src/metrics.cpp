#include "emog/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "emog/error.hpp"
#include "emog/motion_io.hpp"
#include "emog/rng.hpp"

namespace emog {

void SampleMatrix::append(std::span<const double> v) {
  if (rows == 0 && dim == 0) dim = v.size();
  if (v.size() != dim) {
    throw DimensionError("sample of length " + std::to_string(v.size()) + " appended to matrix of width " +
                         std::to_string(dim));
  }
  values.insert(values.end(), v.begin(), v.end());
  ++rows;
}

// ---- feature extractor ------------------------------------------------------

Tensor GestureFeatureExtractor::input_tensor(std::span<const GestureSequence> clips) const {
  const std::size_t L = config_.clip_length, F = L * channels_;
  std::vector<double> x(clips.size() * F);
  for (std::size_t i = 0; i < clips.size(); ++i) {
    const GestureSequence& c = clips[i];
    if (c.channels() != channels_) {
      throw DimensionError("extractor expects " + std::to_string(channels_) + " channels, clip has " +
                           std::to_string(c.channels()));
    }
    if (c.frame_count() < L) {
      throw ArgumentError("extractor needs clips of at least " + std::to_string(L) + " frames, got " +
                          std::to_string(c.frame_count()));
    }
    const auto v = c.values();
    std::copy_n(v.begin(), F, x.begin() + static_cast<std::ptrdiff_t>(i * F));
    normalize_values(std::span<double>(x.data() + i * F, F), stats_);
  }
  return Tensor({clips.size(), F}, std::move(x));
}

Tensor GestureFeatureExtractor::encode_tensor(const Tensor& x) const { return enc2_(gelu(enc1_(x))); }
Tensor GestureFeatureExtractor::decode_tensor(const Tensor& z) const { return dec2_(gelu(dec1_(z))); }

GestureFeatureExtractor GestureFeatureExtractor::train(std::span<const GestureSequence> clips,
                                                       const ExtractorConfig& config, ExtractorReport* report) {
  if (clips.size() < 2) throw ArgumentError("extractor training needs at least 2 clips");
  if (config.clip_length < 1 || config.hidden < 1 || config.latent < 1 || config.batch_size < 1) {
    throw ConfigError("extractor: sizes must be >= 1");
  }
  const std::size_t held = std::max<std::size_t>(1, clips.size() / 10);
  const auto train_clips = clips.first(clips.size() - held);
  const auto held_clips = clips.last(held);

  GestureFeatureExtractor ex;
  ex.config_ = config;
  ex.channels_ = clips.front().channels();
  std::vector<GestureSequence> windows;
  for (const auto& c : train_clips) windows.push_back(c.frame_count() > config.clip_length ? c.slice(0, config.clip_length) : c);
  ex.stats_ = DatasetStats::compute(windows);

  Rng rng(config.seed);
  const std::size_t F = config.clip_length * ex.channels_;
  ex.enc1_ = Linear::create(ex.params_, "enc1", F, config.hidden, rng);
  ex.enc2_ = Linear::create(ex.params_, "enc2", config.hidden, config.latent, rng);
  ex.dec1_ = Linear::create(ex.params_, "dec1", config.latent, config.hidden, rng);
  ex.dec2_ = Linear::create(ex.params_, "dec2", config.hidden, F, rng);

  const Tensor all = ex.input_tensor(train_clips);
  Adam adam(AdamConfig{config.lr});
  Rng batch_rng = rng.split(0x6261746368ull);
  const std::size_t B = std::min(config.batch_size, train_clips.size());
  for (std::size_t step = 0; step < config.steps; ++step) {
    std::vector<double> xb(B * F);
    for (std::size_t b = 0; b < B; ++b) {
      const std::size_t i = batch_rng.below(train_clips.size());
      std::copy_n(all.data().begin() + static_cast<std::ptrdiff_t>(i * F), F,
                  xb.begin() + static_cast<std::ptrdiff_t>(b * F));
    }
    const Tensor x({B, F}, std::move(xb));
    const Tensor d = sub(ex.decode_tensor(ex.encode_tensor(x)), x);
    const Tensor loss = mean(mul(d, d));
    ex.params_.zero_grad();
    loss.backward();
    adam.step(ex.params_);
  }
  for (auto& p : ex.params_.items()) p.tensor.set_requires_grad(false);

  if (report) {
    report->train_mse = ex.reconstruction_mse(train_clips);
    report->heldout_mse = ex.reconstruction_mse(held_clips);
    report->converged = report->heldout_mse <= config.target_mse;
  }
  return ex;
}

std::vector<double> GestureFeatureExtractor::encode(const GestureSequence& clip) const {
  NoGradGuard guard;
  const Tensor z = encode_tensor(input_tensor(std::span<const GestureSequence>(&clip, 1)));
  return {z.data().begin(), z.data().end()};
}

SampleMatrix GestureFeatureExtractor::encode_all(std::span<const GestureSequence> clips) const {
  NoGradGuard guard;
  SampleMatrix m;
  m.dim = config_.latent;
  if (clips.empty()) return m;
  const Tensor z = encode_tensor(input_tensor(clips));
  m.rows = clips.size();
  m.values.assign(z.data().begin(), z.data().end());
  return m;
}

double GestureFeatureExtractor::reconstruction_mse(std::span<const GestureSequence> clips) const {
  NoGradGuard guard;
  const Tensor x = input_tensor(clips);
  const Tensor d = sub(decode_tensor(encode_tensor(x)), x);
  return mean(mul(d, d)).item();
}

// ---- Frechet distance -------------------------------------------------------

GaussianStats GaussianStats::fit(const SampleMatrix& s) {
  if (s.rows < 2) throw ArgumentError("Gaussian fit needs at least 2 samples, got " + std::to_string(s.rows));
  GaussianStats g;
  g.dim = s.dim;
  g.mean.assign(s.dim, 0.0);
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t d = 0; d < s.dim; ++d) g.mean[d] += s.values[i * s.dim + d];
  }
  for (double& m : g.mean) m /= static_cast<double>(s.rows);
  Eigen::MatrixXd centered(s.rows, s.dim);
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t d = 0; d < s.dim; ++d) centered(i, d) = s.values[i * s.dim + d] - g.mean[d];
  }
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(s.rows - 1);
  cov = 0.5 * (cov + cov.transpose());
  g.cov.assign(cov.data(), cov.data() + cov.size());
  return g;
}

namespace {

std::string eigen_report(const Eigen::VectorXd& ev) {
  std::ostringstream os;
  os << "eigenvalues [";
  for (Eigen::Index i = 0; i < ev.size(); ++i) os << (i ? ", " : "") << format_double(ev(i));
  os << "]";
  return os.str();
}

/// Symmetric PSD square root; tiny negative eigenvalues are clamped.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericError(std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd ev = es.eigenvalues();
  const double tol = 1e-8 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol) {
      throw NumericError(std::string(what) + ": matrix square root failed, negative eigenvalue; " +
                         eigen_report(es.eigenvalues()));
    }
    ev(i) = std::sqrt(std::max(ev(i), 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  if (a.dim != b.dim) {
    throw DimensionError("Frechet distance between dims " + std::to_string(a.dim) + " and " + std::to_string(b.dim));
  }
  const auto n = static_cast<Eigen::Index>(a.dim);
  const Eigen::Map<const Eigen::MatrixXd> ca(a.cov.data(), n, n), cb(b.cov.data(), n, n);
  const Eigen::MatrixXd jitter = 1e-10 * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd root_a = psd_sqrt(ca + jitter, "FGD covariance");
  Eigen::MatrixXd inner = root_a * (cb + jitter) * root_a;
  inner = 0.5 * (inner + inner.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("FGD: eigendecomposition failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double tol = 1e-8 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  double trace_root = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -tol) throw NumericError("FGD: matrix square root failed; " + eigen_report(ev));
    trace_root += std::sqrt(std::max(ev(i), 0.0));
  }
  // Plain loop: Eigen reductions over mapped std::vector memory round
  // differently with the buffer's alignment.
  double mean_dist = 0.0;
  for (std::size_t i = 0; i < a.dim; ++i) mean_dist += (a.mean[i] - b.mean[i]) * (a.mean[i] - b.mean[i]);
  const double d = mean_dist + ca.trace() + cb.trace() - 2.0 * trace_root;
  return std::max(d, 0.0);
}

double fgd(const SampleMatrix& real, const SampleMatrix& generated) {
  if (real.dim != generated.dim) {
    throw DimensionError("FGD latent dims differ: " + std::to_string(real.dim) + " vs " +
                         std::to_string(generated.dim));
  }
  return frechet_distance(GaussianStats::fit(real), GaussianStats::fit(generated));
}

// ---- SRGR -------------------------------------------------------------------

double srgr(const GestureSequence& real, const GestureSequence& generated, std::span<const double> weights,
            double delta) {
  const std::size_t N = real.frame_count(), J = real.joint_count();
  if (generated.frame_count() != N || generated.joint_count() != J) {
    throw ArgumentError("SRGR: real is " + std::to_string(N) + "x" + std::to_string(J) + ", generated is " +
                        std::to_string(generated.frame_count()) + "x" + std::to_string(generated.joint_count()));
  }
  if (!weights.empty() && weights.size() != N) {
    throw ArgumentError("SRGR: " + std::to_string(weights.size()) + " weights for " + std::to_string(N) + " frames");
  }
  if (!(delta > 0.0)) throw ArgumentError("SRGR: delta must be > 0");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("SRGR: weights must be finite and non-negative");
    wsum += w;
  }
  if (!weights.empty() && wsum <= 0.0) throw ArgumentError("SRGR: weights sum to zero");
  const double wscale = weights.empty() ? 1.0 : static_cast<double>(N) / wsum;

  const auto r = real.values(), g = generated.values();
  double acc = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    std::size_t hits = 0;
    for (std::size_t j = 0; j < J; ++j) {
      const std::size_t o = (n * J + j) * 3;
      const double dx = r[o] - g[o], dy = r[o + 1] - g[o + 1], dz = r[o + 2] - g[o + 2];
      if (std::sqrt(dx * dx + dy * dy + dz * dz) <= delta) ++hits;
    }
    const double w = weights.empty() ? 1.0 : weights[n] * wscale;
    acc += w * static_cast<double>(hits);
  }
  return acc / static_cast<double>(N * J);
}

// ---- beats ------------------------------------------------------------------

std::vector<double> joint_speed(const GestureSequence& motion) {
  const std::size_t N = motion.frame_count(), J = motion.joint_count();
  std::vector<double> s(N, 0.0);
  if (N < 2) return s;
  const auto v = motion.values();
  for (std::size_t n = 0; n < N; ++n) {
    const std::size_t lo = n == 0 ? 0 : n - 1;
    const std::size_t hi = n + 1 == N ? n : n + 1;
    const double span = static_cast<double>(hi - lo);
    double acc = 0.0;
    for (std::size_t j = 0; j < J; ++j) {
      double sq = 0.0;
      for (std::size_t a = 0; a < 3; ++a) {
        const double d = v[(hi * J + j) * 3 + a] - v[(lo * J + j) * 3 + a];
        sq += d * d;
      }
      acc += std::sqrt(sq) / span;
    }
    s[n] = acc / static_cast<double>(J);
  }
  return s;
}

std::vector<std::size_t> kinematic_beat_frames(const GestureSequence& motion, const KinematicBeatOptions& o) {
  const std::size_t N = motion.frame_count();
  if (N < 5) throw ArgumentError("kinematic beats need at least 5 frames, got " + std::to_string(N));
  const std::vector<double> s = joint_speed(motion);
  const double peak = *std::max_element(s.begin(), s.end());
  std::vector<std::size_t> beats;
  if (!(peak > o.speed_floor)) return beats;
  for (std::size_t n = 0; n < N; ++n) {
    const bool left = n == 0 || s[n] < s[n - 1];
    const bool right = n + 1 == N || s[n] <= s[n + 1];
    if (!left || !right) continue;
    if ((n == 0 || n + 1 == N) && s[n] > o.endpoint_ratio * peak) continue;
    double prominence = std::numeric_limits<double>::infinity();
    if (n > 0) {
      double m = 0.0;
      for (std::size_t k = n - std::min(n, o.window); k < n; ++k) m = std::max(m, s[k]);
      prominence = std::min(prominence, m - s[n]);
    }
    if (n + 1 < N) {
      double m = 0.0;
      for (std::size_t k = n + 1; k < std::min(N, n + 1 + o.window); ++k) m = std::max(m, s[k]);
      prominence = std::min(prominence, m - s[n]);
    }
    if (prominence >= o.min_prominence * peak && prominence > o.speed_floor) beats.push_back(n);
  }
  return beats;
}

BeatSet kinematic_beats(const GestureSequence& motion, const KinematicBeatOptions& options) {
  BeatSet b;
  b.source = BeatSource::kKinematic;
  for (std::size_t n : kinematic_beat_frames(motion, options)) b.times.push_back(static_cast<double>(n) / motion.fps());
  return b;
}

std::vector<std::size_t> audio_beat_frames(const AudioFeatureSequence& audio, const AudioBeatOptions& o) {
  const std::size_t N = audio.frame_count();
  if (N < 5) throw ArgumentError("audio beats need at least 5 frames, got " + std::to_string(N));
  if (o.channel >= audio.dims()) {
    throw ArgumentError("audio beat channel " + std::to_string(o.channel) + " out of range (" +
                        std::to_string(audio.dims()) + " dims)");
  }
  std::vector<std::size_t> beats;
  for (std::size_t n = 0; n < N; ++n) {
    const double a = audio.at(n, o.channel);
    if (a < o.threshold) continue;
    if (n > 0 && !(a > audio.at(n - 1, o.channel))) continue;
    if (n + 1 < N && !(a >= audio.at(n + 1, o.channel))) continue;
    beats.push_back(n);
  }
  return beats;
}

BeatSet audio_beats(const AudioFeatureSequence& audio, double fps, const AudioBeatOptions& options) {
  if (!(fps > 0.0)) throw ArgumentError("fps must be > 0");
  BeatSet b;
  b.source = BeatSource::kAudio;
  for (std::size_t n : audio_beat_frames(audio, options)) b.times.push_back(static_cast<double>(n) / fps);
  return b;
}

double beat_align(const BeatSet& kinematic, const BeatSet& audio, double sigma) {
  if (kinematic.times.empty()) throw MetricError("BeatAlign undefined: no kinematic beats");
  if (audio.times.empty()) throw MetricError("BeatAlign undefined: no audio beats");
  if (!(sigma > 0.0)) throw ArgumentError("BeatAlign sigma must be > 0");
  double acc = 0.0;
  for (double m : kinematic.times) {
    double best = std::numeric_limits<double>::infinity();
    for (double a : audio.times) best = std::min(best, (m - a) * (m - a));
    acc += std::exp(-best / (2.0 * sigma * sigma));
  }
  return acc / static_cast<double>(kinematic.times.size());
}

// ---- gesture emotion classifier --------------------------------------------

std::vector<double> GestureEmotionClassifier::features(const GestureSequence& motion) const {
  const std::size_t N = motion.frame_count(), C = motion.channels();
  std::vector<double> f(2 * C, 0.0);
  const auto v = motion.values();
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) f[c] += v[n * C + c];
  }
  for (std::size_t c = 0; c < C; ++c) f[c] /= static_cast<double>(N);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t c = 0; c < C; ++c) {
      const double d = v[n * C + c] - f[c];
      f[C + c] += d * d;
    }
  }
  for (std::size_t c = 0; c < C; ++c) f[C + c] = std::sqrt(f[C + c] / static_cast<double>(N));
  if (!feature_mean_.empty()) {
    if (f.size() != feature_mean_.size()) throw DimensionError("classifier: motion channel count differs");
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = (f[i] - feature_mean_[i]) / feature_std_[i];
  }
  return f;
}

GestureEmotionClassifier GestureEmotionClassifier::train(std::span<const GestureSequence> motions,
                                                         std::span<const int> labels, std::size_t classes,
                                                         const ClassifierConfig& config) {
  if (motions.empty() || motions.size() != labels.size()) {
    throw ArgumentError("classifier: need one label per motion and at least one motion");
  }
  if (classes < 2) throw ArgumentError("classifier: need at least 2 classes");
  GestureEmotionClassifier clf;
  clf.classes_ = classes;
  std::vector<std::vector<double>> raw;
  for (const auto& m : motions) raw.push_back(clf.features(m));
  const std::size_t F = raw.front().size(), M = raw.size();
  clf.feature_mean_.assign(F, 0.0);
  clf.feature_std_.assign(F, 0.0);
  for (const auto& r : raw) {
    for (std::size_t i = 0; i < F; ++i) clf.feature_mean_[i] += r[i] / static_cast<double>(M);
  }
  for (const auto& r : raw) {
    for (std::size_t i = 0; i < F; ++i) {
      const double d = r[i] - clf.feature_mean_[i];
      clf.feature_std_[i] += d * d / static_cast<double>(M);
    }
  }
  for (double& s : clf.feature_std_) s = std::max(std::sqrt(s), 1e-8);
  std::vector<double> x(M * F);
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t i = 0; i < F; ++i) x[m * F + i] = (raw[m][i] - clf.feature_mean_[i]) / clf.feature_std_[i];
  }
  const Tensor xt({M, F}, std::move(x));
  ParameterSet params;
  const Tensor wt = params.add("w", {F, classes});
  const Tensor bt = params.add("b", {classes});
  Adam adam(AdamConfig{config.lr});
  for (std::size_t s = 0; s < config.steps; ++s) {
    const Tensor loss = cross_entropy(linear(xt, wt, bt), labels);
    params.zero_grad();
    loss.backward();
    adam.step(params);
  }
  clf.weight_.assign(wt.data().begin(), wt.data().end());
  clf.bias_.assign(bt.data().begin(), bt.data().end());
  return clf;
}

int GestureEmotionClassifier::predict(const GestureSequence& motion) const {
  const std::vector<double> f = features(motion);
  const std::size_t F = f.size();
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < classes_; ++k) {
    double z = bias_[k];
    for (std::size_t i = 0; i < F; ++i) z += f[i] * weight_[i * classes_ + k];
    if (z > best_score) {
      best_score = z;
      best = static_cast<int>(k);
    }
  }
  return best;
}

double GestureEmotionClassifier::accuracy(std::span<const GestureSequence> motions, std::span<const int> labels) const {
  if (motions.size() != labels.size() || motions.empty()) throw ArgumentError("classifier: label count mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < motions.size(); ++i) hits += predict(motions[i]) == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(motions.size());
}

// ---- report -----------------------------------------------------------------

MetricValue MetricsReport::summarize(std::span<const double> values) {
  MetricValue v;
  if (values.empty()) return v;
  for (double x : values) v.mean += x;
  v.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double x : values) sq += (x - v.mean) * (x - v.mean);
    v.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return v;
}

std::string MetricsReport::text() const {
  std::ostringstream os;
  auto line = [&](const char* name, const std::vector<double>& v) {
    const MetricValue s = summarize(v);
    os << "  " << name << ": " << (v.empty() ? std::string("n/a") : format_double(s.mean) + " +- " +
                                                                       format_double(s.stddev))
       << " (" << v.size() << " runs)\n";
  };
  os << "metrics" << (label.empty() ? "" : " [" + label + "]") << "\n";
  line("FGD", fgd);
  line("SRGR", srgr);
  line("BeatAlign", beat_align);
  if (undefined_beat_align) os << "  BeatAlign undefined for " << undefined_beat_align << " clip evaluations\n";
  return os.str();
}

std::string MetricsReport::csv() const {
  std::string out = "label,run,fgd,srgr,beat_align\n";
  const std::size_t runs = std::max({fgd.size(), srgr.size(), beat_align.size()});
  auto cell = [](const std::vector<double>& v, std::size_t i) { return i < v.size() ? format_double(v[i]) : ""; };
  for (std::size_t i = 0; i < runs; ++i) {
    out += label + "," + std::to_string(i) + "," + cell(fgd, i) + "," + cell(srgr, i) + "," + cell(beat_align, i) + "\n";
  }
  const MetricValue f = summarize(fgd), s = summarize(srgr), b = summarize(beat_align);
  out += label + ",mean," + format_double(f.mean) + "," + format_double(s.mean) + "," + format_double(b.mean) + "\n";
  out += label + ",std," + format_double(f.stddev) + "," + format_double(s.stddev) + "," + format_double(b.stddev) +
         "\n";
  return out;
}

}  // namespace emog
