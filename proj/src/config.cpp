#include "lmc/config.hpp"

#include <cctype>
#include <fstream>
#include <set>

#include "lmc/errors.hpp"
#include "lmc/evaluation.hpp"

extern char** environ;

namespace lmc {

using nlohmann::json;

data::MovingMnistOptions DataConfig::train_options() const {
  data::MovingMnistOptions o;
  o.seed = seed;
  o.count = train_count;
  o.length = length;
  o.digits = digits;
  o.canvas = canvas;
  o.glyph_size = glyph_size;
  o.speed_min = speed_min;
  o.speed_max = speed_max;
  return o;
}

data::MovingMnistOptions DataConfig::test_options() const {
  data::MovingMnistOptions o = train_options();
  o.seed = seed ^ 0x9e3779b97f4a7c15ULL;
  o.count = test_count;
  return o;
}

namespace {

// Reads the keys of one section into typed fields, rejecting unknown keys.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (!doc.contains(name_)) return;
    node_ = &doc.at(name_);
    if (!node_->is_object()) throw ConfigError(name_, "must be an object");
  }
  Section(const json& node, std::string name, bool) : node_(&node), name_(std::move(name)) {
    if (!node_->is_object()) throw ConfigError(name_, "must be an object");
  }

  template <typename V>
  Section& get(const char* key, V& out) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return *this;
    const json& v = node_->at(key);
    try {
      if constexpr (std::is_same_v<V, std::filesystem::path>) {
        out = v.get<std::string>();
      } else if constexpr (std::is_same_v<V, std::optional<int>>) {
        if (v.is_null()) {
          out.reset();
        } else {
          out = checked<int>(v);
        }
      } else if constexpr (std::is_same_v<V, QueryMode>) {
        out = parse_query_mode(v.get<std::string>());
      } else if constexpr (std::is_integral_v<V>) {
        out = checked<V>(v);
      } else {
        out = v.get<V>();
      }
    } catch (const json::exception&) {
      throw ConfigError(field(key), "has the wrong type (" + std::string(v.type_name()) + ")");
    } catch (const ConfigError& e) {
      throw ConfigError(field(key), e.reason());
    }
    return *this;
  }

  void finish() const {
    if (!node_) return;
    for (const auto& item : node_->items()) {
      if (!seen_.count(item.key())) throw ConfigError(field(item.key()), "unknown key");
    }
  }

 private:
  template <typename V>
  static V checked(const json& v) {
    if (!v.is_number_integer()) throw json::type_error::create(302, "expected integer", &v);
    return v.get<V>();
  }
  std::string field(const std::string& key) const { return name_ + "." + key; }

  const json* node_ = nullptr;
  std::string name_;
  std::set<std::string> seen_;
};

void read_architecture(Section& s, ArchitectureConfig& a) {
  s.get("frame_height", a.frame_height)
      .get("frame_width", a.frame_width)
      .get("frame_channels", a.frame_channels)
      .get("spatial_channels", a.spatial_channels)
      .get("motion_channels", a.motion_channels)
      .get("motion_min_frames", a.motion_min_frames)
      .get("embed_channels", a.embed_channels)
      .get("recurrent_layers", a.recurrent_layers)
      .get("recurrent_channels", a.recurrent_channels)
      .get("recurrent_kernel", a.recurrent_kernel)
      .get("attention_hidden", a.attention_hidden)
      .get("decoder_channels", a.decoder_channels)
      .get("leaky_slope", a.leaky_slope);
  s.finish();
}

}  // namespace

json to_json(const ArchitectureConfig& a) {
  return json{{"frame_height", a.frame_height},
              {"frame_width", a.frame_width},
              {"frame_channels", a.frame_channels},
              {"spatial_channels", a.spatial_channels},
              {"motion_channels", a.motion_channels},
              {"motion_min_frames", a.motion_min_frames},
              {"embed_channels", a.embed_channels},
              {"recurrent_layers", a.recurrent_layers},
              {"recurrent_channels", a.recurrent_channels},
              {"recurrent_kernel", a.recurrent_kernel},
              {"attention_hidden", a.attention_hidden},
              {"decoder_channels", a.decoder_channels},
              {"leaky_slope", a.leaky_slope}};
}

ArchitectureConfig architecture_from_json(const json& j) {
  ArchitectureConfig a;
  Section s(j, "architecture", true);
  read_architecture(s, a);
  return a;
}

json to_json(const RunConfig& c) {
  const auto& d = c.data;
  const auto& t = c.training;
  const auto& e = c.evaluation;
  const auto& p = c.paths;
  return json{
      {"data",
       {{"seed", d.seed},
        {"canvas", d.canvas},
        {"digits", d.digits},
        {"glyph_size", d.glyph_size},
        {"speed_min", d.speed_min},
        {"speed_max", d.speed_max},
        {"length", d.length},
        {"train_count", d.train_count},
        {"test_count", d.test_count}}},
      {"architecture", to_json(c.architecture)},
      {"training",
       {{"learning_rate", t.learning_rate},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"epsilon", t.epsilon},
        {"batch", t.batch},
        {"iterations", t.iterations},
        {"short_frames", t.short_frames},
        {"long_frames", t.long_frames},
        {"horizon", t.horizon ? json(*t.horizon) : json(nullptr)},
        {"memory_slots", t.memory_slots},
        {"clip_norm", t.clip_norm},
        {"checkpoint_every", t.checkpoint_every},
        {"query_mode", to_string(t.query_mode)},
        {"seed", t.seed}}},
      {"evaluation",
       {{"horizon", e.horizon},
        {"last", e.last},
        {"patterns", e.patterns},
        {"clips_per_pattern", e.clips_per_pattern},
        {"short_frames", e.short_frames},
        {"long_frames", e.long_frames},
        {"strip_stride", e.strip_stride}}},
      {"paths",
       {{"dataset", p.dataset.string()},
        {"test_dataset", p.test_dataset.string()},
        {"checkpoints", p.checkpoints.string()},
        {"loss_log", p.loss_log.string()},
        {"reports", p.reports.string()}}}};
}

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "document must be an object");
  static const std::set<std::string> known{"data", "architecture", "training", "evaluation",
                                           "paths"};
  for (const auto& item : j.items()) {
    if (!known.count(item.key())) throw ConfigError(item.key(), "unknown section");
  }
  RunConfig c;
  {
    Section s(j, "data");
    auto& d = c.data;
    s.get("seed", d.seed)
        .get("canvas", d.canvas)
        .get("digits", d.digits)
        .get("glyph_size", d.glyph_size)
        .get("speed_min", d.speed_min)
        .get("speed_max", d.speed_max)
        .get("length", d.length)
        .get("train_count", d.train_count)
        .get("test_count", d.test_count);
    s.finish();
  }
  {
    Section s(j, "architecture");
    read_architecture(s, c.architecture);
  }
  {
    Section s(j, "training");
    auto& t = c.training;
    s.get("learning_rate", t.learning_rate)
        .get("beta1", t.beta1)
        .get("beta2", t.beta2)
        .get("epsilon", t.epsilon)
        .get("batch", t.batch)
        .get("iterations", t.iterations)
        .get("short_frames", t.short_frames)
        .get("long_frames", t.long_frames)
        .get("horizon", t.horizon)
        .get("memory_slots", t.memory_slots)
        .get("clip_norm", t.clip_norm)
        .get("checkpoint_every", t.checkpoint_every)
        .get("query_mode", t.query_mode)
        .get("seed", t.seed);
    s.finish();
  }
  {
    Section s(j, "evaluation");
    auto& e = c.evaluation;
    s.get("horizon", e.horizon)
        .get("last", e.last)
        .get("patterns", e.patterns)
        .get("clips_per_pattern", e.clips_per_pattern)
        .get("short_frames", e.short_frames)
        .get("long_frames", e.long_frames)
        .get("strip_stride", e.strip_stride);
    s.finish();
  }
  {
    Section s(j, "paths");
    auto& p = c.paths;
    s.get("dataset", p.dataset)
        .get("test_dataset", p.test_dataset)
        .get("checkpoints", p.checkpoints)
        .get("loss_log", p.loss_log)
        .get("reports", p.reports);
    s.finish();
  }
  return c;
}

void RunConfig::validate() const {
  architecture.validate();
  training.validate();
  try {
    data::validate(data.train_options());
  } catch (const ConfigError& e) {
    throw ConfigError("data." + e.field(), e.reason());
  }
  if (data.test_count < 0) throw ConfigError("data.test_count", "must be >= 0");

  if (architecture.frame_height != data.canvas || architecture.frame_width != data.canvas) {
    throw ConfigError("architecture.frame_height",
                      "frames are " + std::to_string(architecture.frame_height) + "x" +
                          std::to_string(architecture.frame_width) + " but data.canvas is " +
                          std::to_string(data.canvas));
  }
  if (data.canvas < eval::SsimParams{}.window) {
    throw ConfigError("data.canvas", "SSIM needs frames of at least " +
                                         std::to_string(eval::SsimParams{}.window) + " pixels");
  }
  if (architecture.frame_channels != 1) {
    throw ConfigError("architecture.frame_channels", "generated data is single-channel");
  }
  const std::size_t required = data::required_pair_length(
      training.short_frames, training.long_frames, training.prediction_horizon());
  if (static_cast<std::size_t>(data.length) < required) {
    throw ConfigError("data.length", "training pairs need sequences of at least " +
                                         std::to_string(required) + " frames");
  }
  if (training.short_frames - 1 < architecture.motion_min_frames) {
    throw ConfigError("training.short_frames",
                      "gives " + std::to_string(training.short_frames - 1) +
                          " difference frames, the motion encoder needs " +
                          std::to_string(architecture.motion_min_frames));
  }

  const auto& e = evaluation;
  if (e.horizon < 1) throw ConfigError("evaluation.horizon", "must be >= 1");
  if (e.last < 0 || e.last > e.horizon) {
    throw ConfigError("evaluation.last", "must lie in [0, evaluation.horizon]");
  }
  if (training.short_frames + e.horizon > data.length) {
    throw ConfigError("evaluation.horizon", "n + horizon exceeds data.length");
  }
  if (e.patterns < 1) throw ConfigError("evaluation.patterns", "must be >= 1");
  if (e.clips_per_pattern < 1) throw ConfigError("evaluation.clips_per_pattern", "must be >= 1");
  if (e.short_frames - 1 < architecture.motion_min_frames) {
    throw ConfigError("evaluation.short_frames", "too few difference frames for the motion encoder");
  }
  if (e.long_frames - 1 < architecture.motion_min_frames) {
    throw ConfigError("evaluation.long_frames", "too few difference frames for the motion encoder");
  }
  if (e.strip_stride < 1) throw ConfigError("evaluation.strip_stride", "must be >= 1");
}

void apply_overrides(json& document, const Environment& env) {
  static const std::set<std::string> sections{"data", "architecture", "training", "evaluation",
                                              "paths"};
  for (const auto& [key, raw] : env) {
    const auto sep = key.find("__");
    if (sep == std::string::npos || sep == 0 || sep + 2 >= key.size()) continue;
    std::string section = key.substr(0, sep), field = key.substr(sep + 2);
    for (auto& ch : section) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    for (auto& ch : field) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (!sections.count(section)) continue;
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    if (!document.contains(section)) document[section] = json::object();
    document[section][field] = std::move(value);
  }
}

Environment process_environment() {
  Environment env;
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    const auto eq = entry.find('=');
    if (eq != std::string::npos) env[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return env;
}

RunConfig load_run_config(const std::filesystem::path& path, const Environment& env) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("parse error: ") + e.what());
  }
  apply_overrides(doc, env);
  RunConfig c = run_config_from_json(doc);
  const std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
  for (auto* p : {&c.paths.dataset, &c.paths.test_dataset, &c.paths.checkpoints,
                  &c.paths.loss_log, &c.paths.reports}) {
    if (p->is_relative()) *p = base / *p;
  }
  c.validate();
  return c;
}

}  // namespace lmc
