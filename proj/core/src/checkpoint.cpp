#include "emog/checkpoint.hpp"

#include <cstring>

#include "config_json.hpp"
#include "emog/motion_io.hpp"

namespace emog {
namespace {

constexpr const char* kMagic = "EMOG-CHECKPOINT";
constexpr int kVersion = 1;

void append_doubles(std::string& out, std::span<const double> v) {
  const std::size_t at = out.size();
  out.resize(at + v.size() * sizeof(double));
  if (!v.empty()) std::memcpy(out.data() + at, v.data(), v.size() * sizeof(double));
}

class Cursor {
 public:
  explicit Cursor(const std::string& s) : s_(s) {}

  std::string line() {
    const std::size_t end = s_.find('\n', pos_);
    if (end == std::string::npos) throw ParseError("checkpoint: unexpected end of file", pos_);
    std::string l = s_.substr(pos_, end - pos_);
    pos_ = end + 1;
    return l;
  }

  std::size_t keyed_count(const std::string& key) {
    const std::size_t at = pos_;
    const std::string l = line();
    if (l.rfind(key + " ", 0) != 0) throw ParseError("checkpoint: expected '" + key + "'", at);
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(l.substr(key.size() + 1), &used);
      if (used != l.size() - key.size() - 1) throw std::invalid_argument(l);
      return static_cast<std::size_t>(v);
    } catch (const std::logic_error&) {
      throw ParseError("checkpoint: bad count in '" + l + "'", at);
    }
  }

  std::string take(std::size_t n) {
    if (s_.size() - pos_ < n) throw ParseError("checkpoint: truncated", pos_);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  void doubles(std::span<double> out) {
    const std::size_t n = out.size() * sizeof(double);
    if (s_.size() - pos_ < n) throw ParseError("checkpoint: payload truncated", pos_);
    if (n) std::memcpy(out.data(), s_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const JCFormer& model, const CheckpointMeta& meta, const Adam* adam) {
  const auto& params = model.parameters().items();
  if (meta.stats.channels() != model.config().channels()) {
    throw DimensionError("checkpoint: dataset stats have " + std::to_string(meta.stats.channels()) +
                         " channels, model has " + std::to_string(model.config().channels()));
  }
  Json h;
  h["model"] = model.config();
  h["schedule"] = meta.schedule;
  h["training"] = meta.training;
  h["step"] = meta.step;
  Json index = Json::array();
  std::size_t count = 0;
  for (const auto& p : params) {
    index.push_back(Json{{"name", p.name}, {"shape", p.tensor.shape()}});
    count += p.tensor.numel();
  }
  h["tensors"] = index;
  h["stats_channels"] = meta.stats.channels();
  count += 2 * meta.stats.channels();
  if (adam) {
    const AdamConfig& a = adam->config();
    h["optimizer"] = Json{{"kind", "adam"}, {"steps", adam->step_count()}, {"lr", a.lr},
                          {"beta1", a.beta1}, {"beta2", a.beta2},  {"eps", a.eps},
                          {"moments", !adam->first_moments().empty()}};
    if (!adam->first_moments().empty()) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (adam->first_moments()[i].size() != params[i].tensor.numel() ||
            adam->second_moments()[i].size() != params[i].tensor.numel()) {
          throw DimensionError("checkpoint: optimizer moments do not match parameter '" + params[i].name + "'");
        }
        count += 2 * params[i].tensor.numel();
      }
    }
  } else {
    h["optimizer"] = nullptr;
  }
  Json log = Json::array();
  for (const auto& r : meta.log) log.push_back(Json::array({r.step, r.mse, r.rec, r.ce, r.total}));
  h["loss_log"] = log;

  const std::string header = h.dump();
  std::string out = std::string(kMagic) + " " + std::to_string(kVersion) + "\n";
  out += "header " + std::to_string(header.size()) + "\n" + header + "\n";
  out += "data " + std::to_string(count) + "\n";
  out.reserve(out.size() + count * sizeof(double));
  for (const auto& p : params) append_doubles(out, p.tensor.data());
  append_doubles(out, meta.stats.mean);
  append_doubles(out, meta.stats.stddev);
  if (adam && !adam->first_moments().empty()) {
    for (const auto& m : adam->first_moments()) append_doubles(out, m);
    for (const auto& v : adam->second_moments()) append_doubles(out, v);
  }
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const JCFormer& model, const CheckpointMeta& meta,
                     const Adam* adam) {
  write_file(path, serialize_checkpoint(model, meta, adam));
}

LoadedCheckpoint parse_checkpoint(const std::string& bytes, const ModelConfig* expected) {
  Cursor cur(bytes);
  const std::string magic = cur.line();
  const std::string want = std::string(kMagic) + " " + std::to_string(kVersion);
  if (magic.rfind(kMagic, 0) != 0) throw ParseError("not a checkpoint file", 0);
  if (magic != want) throw ParseError("checkpoint: unsupported version line '" + magic + "'", 0);
  const std::size_t header_size = cur.keyed_count("header");
  const std::size_t header_at = cur.pos();
  Json h;
  try {
    h = Json::parse(cur.take(header_size));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what(), header_at + e.byte);
  }
  if (cur.take(1) != "\n") throw ParseError("checkpoint: header not terminated", cur.pos() - 1);
  const std::size_t count = cur.keyed_count("data");

  LoadedCheckpoint out;
  ModelConfig model_config;
  try {
    model_config = h.at("model").get<ModelConfig>();
    out.meta.schedule = h.at("schedule").get<ScheduleConfig>();
    out.meta.training = h.at("training").get<TrainConfig>();
    out.meta.step = h.at("step").get<std::size_t>();
    for (const auto& r : h.at("loss_log")) {
      out.meta.log.push_back(LossRecord{r.at(0).get<std::size_t>(), r.at(1).get<double>(), r.at(2).get<double>(),
                                        r.at(3).get<double>(), r.at(4).get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what(), header_at);
  }
  if (expected && !(*expected == model_config)) {
    throw ConfigError("checkpoint model config does not match the requested one: stored " +
                      Json(model_config).dump() + ", requested " + Json(*expected).dump());
  }
  out.model = std::make_unique<JCFormer>(model_config);
  auto& params = out.model->parameters().items();
  const Json& index = h.at("tensors");
  if (index.size() != params.size()) {
    throw ParseError("checkpoint: " + std::to_string(index.size()) + " tensors stored, model has " +
                         std::to_string(params.size()),
                     header_at);
  }
  std::size_t expected_count = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = index[i].at("name").get<std::string>();
    const auto shape = index[i].at("shape").get<Shape>();
    if (name != params[i].name || shape != params[i].tensor.shape()) {
      throw ParseError("checkpoint: tensor " + std::to_string(i) + " is '" + name + "' " + shape_string(shape) +
                           ", model expects '" + params[i].name + "' " + shape_string(params[i].tensor.shape()),
                       header_at);
    }
    expected_count += params[i].tensor.numel();
  }
  const std::size_t channels = h.at("stats_channels").get<std::size_t>();
  if (channels != model_config.channels()) throw ParseError("checkpoint: stats channel count mismatch", header_at);
  expected_count += 2 * channels;
  const Json& opt = h.at("optimizer");
  const bool moments = !opt.is_null() && opt.at("moments").get<bool>();
  if (moments) {
    for (const auto& p : params) expected_count += 2 * p.tensor.numel();
  }
  if (count != expected_count) {
    throw ParseError("checkpoint: data count " + std::to_string(count) + ", expected " +
                         std::to_string(expected_count),
                     cur.pos());
  }

  for (auto& p : params) cur.doubles(p.tensor.mutable_data());
  out.meta.stats.mean.resize(channels);
  out.meta.stats.stddev.resize(channels);
  cur.doubles(out.meta.stats.mean);
  cur.doubles(out.meta.stats.stddev);
  if (!opt.is_null()) {
    AdamConfig ac{opt.at("lr").get<double>(), opt.at("beta1").get<double>(), opt.at("beta2").get<double>(),
                  opt.at("eps").get<double>()};
    Adam adam(ac);
    adam.set_step_count(opt.at("steps").get<std::int64_t>());
    if (moments) {
      auto& m = adam.first_moments();
      auto& v = adam.second_moments();
      m.resize(params.size());
      v.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i].resize(params[i].tensor.numel());
        cur.doubles(m[i]);
      }
      for (std::size_t i = 0; i < params.size(); ++i) {
        v[i].resize(params[i].tensor.numel());
        cur.doubles(v[i]);
      }
    }
    out.adam = std::move(adam);
  }
  if (!cur.done()) throw ParseError("checkpoint: trailing bytes after payload", cur.pos());
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig* expected) {
  const std::string bytes = read_file(path);
  try {
    return parse_checkpoint(bytes, expected);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), e.offset());
  }
}

}  // namespace emog
