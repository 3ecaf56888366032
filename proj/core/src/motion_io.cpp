#include "emog/motion_io.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

#include "emog/error.hpp"

namespace emog {

static_assert(std::endian::native == std::endian::little, "binary containers assume a little-endian host");

namespace {

constexpr const char* kMotionMagic = "EMOG-MOTION";
constexpr const char* kAudioMagic = "EMOG-AUDIO";
constexpr int kVersion = 1;

// Line-oriented reader over a byte buffer that tracks offsets for errors.
class HeaderReader {
 public:
  explicit HeaderReader(const std::string& buf) : buf_(buf) {}

  std::size_t offset() const { return pos_; }

  std::vector<std::string> line() {
    const std::size_t start = pos_;
    const std::size_t end = buf_.find('\n', pos_);
    if (end == std::string::npos) throw ParseError("unterminated header line", start);
    std::istringstream in(buf_.substr(pos_, end - pos_));
    pos_ = end + 1;
    std::vector<std::string> tokens;
    for (std::string t; in >> t;) tokens.push_back(t);
    if (tokens.empty()) throw ParseError("empty header line", start);
    return tokens;
  }

  std::vector<std::string> keyed(const std::string& key) {
    const std::size_t start = pos_;
    auto tokens = line();
    if (tokens[0] != key) throw ParseError("expected '" + key + "', found '" + tokens[0] + "'", start);
    tokens.erase(tokens.begin());
    return tokens;
  }

  template <class T>
  T scalar(const std::string& key) {
    const std::size_t start = pos_;
    auto tokens = keyed(key);
    if (tokens.size() != 1) throw ParseError("'" + key + "' takes exactly one value", start);
    return parse<T>(tokens[0], start);
  }

  template <class T>
  static T parse(const std::string& s, std::size_t at) {
    T v{};
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("invalid number '" + s + "'", at);
    return v;
  }

  void magic(const char* expected) {
    const std::size_t start = pos_;
    auto tokens = line();
    if (tokens.size() != 2 || tokens[0] != expected) {
      throw ParseError(std::string("missing '") + expected + "' header", start);
    }
    const int version = parse<int>(tokens[1], start);
    if (version != kVersion) throw ParseError("unsupported version " + tokens[1], start);
  }

  std::vector<double> payload(std::size_t count) {
    const std::size_t bytes = count * sizeof(double);
    if (buf_.size() - pos_ != bytes) {
      throw ParseError("payload holds " + std::to_string(buf_.size() - pos_) + " bytes, header implies " +
                           std::to_string(bytes),
                       pos_);
    }
    std::vector<double> v(count);
    std::memcpy(v.data(), buf_.data() + pos_, bytes);
    pos_ += bytes;
    return v;
  }

 private:
  const std::string& buf_;
  std::size_t pos_ = 0;
};

void append_payload(std::string& out, std::span<const double> values) {
  const auto* bytes = reinterpret_cast<const char*>(values.data());
  out.append(bytes, values.size() * sizeof(double));
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw ArgumentError("cannot format number");
  return std::string(buf, p);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path() && !std::filesystem::exists(path.parent_path())) {
    throw IoError("directory '" + path.parent_path().string() + "' does not exist");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

void save_motion(const GestureSequence& seq, const std::filesystem::path& path) {
  std::string out;
  out += std::string(kMotionMagic) + " " + std::to_string(kVersion) + "\n";
  out += "frames " + std::to_string(seq.frame_count()) + "\n";
  out += "joints " + std::to_string(seq.joint_count()) + "\n";
  out += "fps " + format_double(seq.fps()) + "\n";
  out += "names";
  for (const auto& n : seq.skeleton().names()) out += " " + n;
  out += "\nparents";
  for (int p : seq.skeleton().parents()) out += " " + std::to_string(p);
  out += "\ndata\n";
  append_payload(out, seq.values());
  write_file(path, out);
}

GestureSequence load_motion(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  HeaderReader r(buf);
  r.magic(kMotionMagic);
  const std::size_t frames_at = r.offset();
  const auto frames = r.scalar<std::size_t>("frames");
  if (frames == 0) throw ParseError("motion must have at least one frame", frames_at);
  const std::size_t joints_at = r.offset();
  const auto joints = r.scalar<std::size_t>("joints");
  if (joints == 0) throw ParseError("motion must have at least one joint", joints_at);
  const auto fps = r.scalar<double>("fps");
  const std::size_t names_at = r.offset();
  auto names = r.keyed("names");
  if (names.size() != joints) {
    throw ParseError("header declares " + std::to_string(joints) + " joints but names " +
                         std::to_string(names.size()),
                     names_at);
  }
  const std::size_t parents_at = r.offset();
  const auto parent_tokens = r.keyed("parents");
  if (parent_tokens.size() != joints) throw ParseError("parent list length differs from joint count", parents_at);
  std::vector<int> parents;
  for (const auto& t : parent_tokens) parents.push_back(HeaderReader::parse<int>(t, parents_at));
  const std::size_t data_at = r.offset();
  if (r.line() != std::vector<std::string>{"data"}) throw ParseError("expected 'data'", data_at);
  const std::size_t payload_at = r.offset();
  auto values = r.payload(frames * joints * 3);
  try {
    auto skeleton = std::make_shared<const SkeletonSpec>(std::move(names), std::move(parents));
    return GestureSequence(std::move(skeleton), frames, std::move(values), fps);
  } catch (const ArgumentError& e) {
    throw ParseError(e.what(), payload_at);
  }
}

void save_audio(const AudioFeatureSequence& audio, const std::filesystem::path& path) {
  std::string out;
  out += std::string(kAudioMagic) + " " + std::to_string(kVersion) + "\n";
  out += "frames " + std::to_string(audio.frame_count()) + "\n";
  out += "dims " + std::to_string(audio.dims()) + "\n";
  out += "rate " + format_double(audio.source_rate_hz()) + "\n";
  out += "data\n";
  append_payload(out, audio.values());
  write_file(path, out);
}

AudioFeatureSequence load_audio(const std::filesystem::path& path) {
  const std::string buf = read_file(path);
  HeaderReader r(buf);
  r.magic(kAudioMagic);
  const std::size_t frames_at = r.offset();
  const auto frames = r.scalar<std::size_t>("frames");
  const auto dims = r.scalar<std::size_t>("dims");
  if (frames == 0 || dims == 0) throw ParseError("audio features need frames and dims", frames_at);
  const auto rate = r.scalar<double>("rate");
  const std::size_t data_at = r.offset();
  if (r.line() != std::vector<std::string>{"data"}) throw ParseError("expected 'data'", data_at);
  const std::size_t payload_at = r.offset();
  auto values = r.payload(frames * dims);
  try {
    return AudioFeatureSequence(frames, dims, std::move(values), rate);
  } catch (const ArgumentError& e) {
    throw ParseError(e.what(), payload_at);
  }
}

void export_motion_csv(const GestureSequence& seq, const std::filesystem::path& path) {
  static constexpr char kAxes[] = {'x', 'y', 'z'};
  std::string out;
  for (std::size_t j = 0; j < seq.joint_count(); ++j) {
    for (char a : kAxes) {
      if (j || a != 'x') out += ',';
      out += "joint_" + std::to_string(j) + "_" + a;
    }
  }
  out += '\n';
  for (std::size_t n = 0; n < seq.frame_count(); ++n) {
    const auto f = seq.frame(n);
    for (std::size_t c = 0; c < f.size(); ++c) {
      if (c) out += ',';
      out += format_double(f[c]);
    }
    out += '\n';
  }
  write_file(path, out);
}

AudioFeatureSequence import_audio_csv(const std::filesystem::path& path, double rate_hz) {
  const std::string buf = read_file(path);
  std::istringstream in(buf);
  std::vector<double> values;
  std::size_t dims = 0, frames = 0, offset = 0;
  bool first = true;
  for (std::string line; std::getline(in, line); offset += line.size() + 1) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    std::vector<double> row;
    bool numeric = true;
    for (const auto& c : cells) {
      double v{};
      const auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || p != c.data() + c.size()) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header row
      }
      throw ParseError("non-numeric cell in feature row " + std::to_string(frames + 1), offset);
    }
    first = false;
    if (dims == 0) dims = row.size();
    if (row.size() != dims) {
      throw ParseError("feature row " + std::to_string(frames + 1) + " has " + std::to_string(row.size()) +
                           " columns, expected " + std::to_string(dims),
                       offset);
    }
    values.insert(values.end(), row.begin(), row.end());
    ++frames;
  }
  if (frames == 0) throw ParseError("no feature rows", 0);
  return AudioFeatureSequence(frames, dims, std::move(values), rate_hz);
}

}  // namespace emog
