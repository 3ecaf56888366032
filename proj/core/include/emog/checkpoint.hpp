#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "emog/diffusion.hpp"
#include "emog/jcformer.hpp"
#include "emog/motion.hpp"
#include "emog/optim.hpp"
#include "emog/training.hpp"

namespace emog {

struct CheckpointMeta {
  ScheduleConfig schedule;
  TrainConfig training;
  DatasetStats stats;
  std::size_t step = 0;
  std::vector<LossRecord> log;
};

/// Container layout:
///
///   EMOG-CHECKPOINT 1
///   header <bytes>
///   <JSON: model config, schedule, training config, step, tensor index,
///    optimizer settings, loss log>
///   data <count>
///   <count little-endian doubles: parameters in index order, dataset
///    mean and std, then Adam first and second moments if present>
std::string serialize_checkpoint(const JCFormer& model, const CheckpointMeta& meta, const Adam* adam = nullptr);
void save_checkpoint(const std::filesystem::path& path, const JCFormer& model, const CheckpointMeta& meta,
                     const Adam* adam = nullptr);

struct LoadedCheckpoint {
  std::unique_ptr<JCFormer> model;
  CheckpointMeta meta;
  std::optional<Adam> adam;
};

/// Rebuilds the model from the stored config. When `expected` is given, a
/// different stored model config is a ConfigError.
LoadedCheckpoint parse_checkpoint(const std::string& bytes, const ModelConfig* expected = nullptr);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

}  // namespace emog
