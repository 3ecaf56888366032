#pragma once

#include <filesystem>
#include <string>

#include "emog/motion.hpp"

namespace emog {

/// Motion container: a text header
///
///   EMOG-MOTION 1
///   frames <N>
///   joints <J>
///   fps <fps>
///   names <name_0> ... <name_{J-1}>
///   parents <p_0> ... <p_{J-1}>
///   data
///
/// followed by N*J*3 little-endian IEEE-754 doubles, row-major.
void save_motion(const GestureSequence& seq, const std::filesystem::path& path);
GestureSequence load_motion(const std::filesystem::path& path);

/// Same layout with the header "EMOG-AUDIO 1", keys frames/dims/rate, and
/// N*D doubles.
void save_audio(const AudioFeatureSequence& audio, const std::filesystem::path& path);
AudioFeatureSequence load_audio(const std::filesystem::path& path);

/// One row per frame, columns joint_<k>_x, joint_<k>_y, joint_<k>_z.
void export_motion_csv(const GestureSequence& seq, const std::filesystem::path& path);

/// Imports externally prepared features: one row per frame, comma-separated,
/// optional non-numeric header row. `rate_hz` is the feature rate.
AudioFeatureSequence import_audio_csv(const std::filesystem::path& path, double rate_hz);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace emog
