#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "emog/corpus.hpp"
#include "emog/diffusion.hpp"
#include "emog/jcformer.hpp"
#include "emog/metrics.hpp"
#include "emog/training.hpp"

namespace emog {

/// Everything a run needs. Serialized as JSON; unknown keys are rejected and
/// absent keys keep the defaults below.
struct RunConfig {
  static constexpr int kVersion = 1;

  std::uint64_t seed = 42;
  std::size_t corpus_samples = 400;
  CorpusConfig corpus;
  ModelConfig model;
  ScheduleConfig schedule;
  TrainConfig training;
  MetricsConfig metrics;

  /// Re-derives every section seed from `seed`.
  void apply_master_seed();
  /// Checks cross-section consistency (joint count, audio width, lengths).
  void validate() const;
  bool operator==(const RunConfig&) const = default;

  /// Full-size defaults.
  static RunConfig defaults();
  /// Small model and short schedule that train on a laptop CPU.
  static RunConfig toy();
};

std::string run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& config);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace emog
