#include "lmc/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lmc/config.hpp"
#include "lmc/errors.hpp"

namespace lmc {

void TrainingConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("training.learning_rate", "must be finite and >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("training.beta1", "must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("training.beta2", "must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("training.epsilon", "must be > 0");
  if (batch < 1) throw ConfigError("training.batch", "must be >= 1");
  if (iterations < 0) throw ConfigError("training.iterations", "must be >= 0");
  if (short_frames < 2) throw ConfigError("training.short_frames", "must be >= 2");
  if (short_frames >= long_frames) {
    throw ConfigError("training.short_frames",
                      "n < N required (short_frames " + std::to_string(short_frames) +
                          " >= long_frames " + std::to_string(long_frames) + ")");
  }
  if (prediction_horizon() < 1) throw ConfigError("training.horizon", "must be >= 1");
  if (memory_slots < 1) throw ConfigError("training.memory_slots", "s >= 1 required");
  if (!(clip_norm >= 0.0)) throw ConfigError("training.clip_norm", "must be >= 0 (0 disables)");
  if (checkpoint_every < 0) throw ConfigError("training.checkpoint_every", "must be >= 0");
}

double prediction_loss(const data::VideoSequence& pred, const data::VideoSequence& target) {
  if (pred.length() != target.length()) {
    throw ContractError("prediction_loss: sequence lengths differ (" +
                        std::to_string(pred.length()) + " vs " +
                        std::to_string(target.length()) + ")");
  }
  double total = 0.0;
  for (std::size_t t = 0; t < pred.length(); ++t) {
    if (!pred[t].same_shape(target[t])) {
      throw ContractError("prediction_loss: frame " + std::to_string(t) + " shapes differ");
    }
    for (std::size_t i = 0; i < pred[t].size(); ++i) {
      const double r = static_cast<double>(pred[t].pixels[i]) - target[t].pixels[i];
      total += r * r + std::abs(r);
    }
  }
  return total;
}

template <typename T>
Var<T> frame_loss(const Var<T>& pred, const Tensor<T>& target) {
  require_shape(target, pred.shape(), "frame_loss target");
  double total = 0.0;
  const auto p = pred.value().values();
  const auto q = target.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double r = static_cast<double>(p[i]) - q[i];
    total += r * r + std::abs(r);
  }
  return make_result<T>(Tensor<T>({1}, static_cast<T>(total)), {pred},
                        [target](Node<T>& self) {
                          const T g = self.grad[0];
                          auto& in = *self.inputs[0];
                          auto& dst = in.grad_buffer();
                          for (std::size_t i = 0; i < dst.size(); ++i) {
                            const T r = in.value[i] - target[i];
                            const T sign = r > T(0) ? T(1) : (r < T(0) ? T(-1) : T(0));
                            dst[i] += g * (T(2) * r + sign);
                          }
                        });
}

template Var<float> frame_loss<float>(const Var<float>&, const Tensor<float>&);
template Var<double> frame_loss<double>(const Var<double>&, const Tensor<double>&);

void LossStats::record(double loss) {
  ++count;
  mean += (loss - mean) / static_cast<double>(count);
  last = loss;
}

void adam_step(const ParameterList<float>& params, std::map<std::string, AdamSlot>& moments,
               const TrainingConfig& config) {
  const double b1 = config.beta1, b2 = config.beta2;
  for (const auto& np : params) {
    Var<float>& v = np.param->var();
    if (!v.has_grad()) continue;
    AdamSlot& slot = moments[np.name];
    if (slot.first.empty()) {
      slot.first = Tensor<float>(v.shape());
      slot.second = Tensor<float>(v.shape());
    }
    ++slot.steps;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(slot.steps));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(slot.steps));
    const float step = static_cast<float>(config.learning_rate / c1);
    const float root_c2 = static_cast<float>(std::sqrt(c2));
    const float eps = static_cast<float>(config.epsilon);
    const float fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
    float* p = v.mutable_value().data();
    const float* g = v.grad().data();
    float* m = slot.first.data();
    float* s = slot.second.data();
    for (std::size_t i = 0; i < v.size(); ++i) {
      m[i] = fb1 * m[i] + (1.0f - fb1) * g[i];
      s[i] = fb2 * s[i] + (1.0f - fb2) * g[i] * g[i];
      p[i] -= step * m[i] / (std::sqrt(s[i]) / root_c2 + eps);
    }
  }
}

double clip_gradients(const ParameterList<float>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& np : params) {
    const Var<float>& v = np.param->var();
    if (!v.has_grad()) continue;
    for (float g : v.grad().values()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const float factor = static_cast<float>(max_norm / norm);
    for (const auto& np : params) {
      Var<float>& v = np.param->var();
      if (!v.has_grad()) continue;
      for (float& g : v.mutable_grad().values()) g *= factor;
    }
  }
  return norm;
}

namespace {

using data::TrainingPair;
using data::VideoSequence;

struct Views {
  std::vector<const VideoSequence*> short_inputs, long_inputs, targets;
};

Views views_of(const std::vector<TrainingPair>& batch, int horizon) {
  if (batch.empty()) throw ContractError("training step needs a non-empty batch");
  Views v;
  for (const auto& pair : batch) {
    if (static_cast<int>(pair.target.length()) != horizon) {
      throw ContractError("training pair target has " + std::to_string(pair.target.length()) +
                          " frames, expected horizon " + std::to_string(horizon));
    }
    v.short_inputs.push_back(&pair.short_input);
    v.long_inputs.push_back(&pair.long_input);
    v.targets.push_back(&pair.target);
  }
  return v;
}

void zero_all(Model<float>& model) {
  for (const auto& np : model.named_parameters()) np.param->var().zero_grad();
}

// Keeps the memory in the requested trainable state for one phase.
class TrainableScope {
 public:
  TrainableScope(memory::MemoryBank<float>& bank, bool flag)
      : bank_(bank), previous_(bank.trainable()) {
    bank_.set_trainable(flag);
  }
  ~TrainableScope() { bank_.set_trainable(previous_); }
  TrainableScope(const TrainableScope&) = delete;
  TrainableScope& operator=(const TrainableScope&) = delete;

 private:
  memory::MemoryBank<float>& bank_;
  bool previous_;
};

double run_phase(const std::vector<TrainingPair>& batch, Model<float>& model, TrainState& state,
                 const TrainingConfig& config, memory::MotionRole role) {
  const int horizon = config.prediction_horizon();
  const Views v = views_of(batch, horizon);
  const bool storing = role == memory::MotionRole::long_term;
  const ParameterList<float> params =
      storing ? model.storing_parameters() : model.matching_parameters();

  zero_all(model);
  const std::vector<Var<float>> inputs = stack_sequences<float>(v.short_inputs);
  Var<float> readout;
  if (model.query_mode() != QueryMode::none) {
    const Var<float> diffs = stack_differences<float>(storing ? v.long_inputs : v.short_inputs);
    readout = model.recall(model.encode_motion(diffs, role));
  }
  const std::vector<Var<float>> outputs = model.predictor().rollout(inputs, readout, horizon);

  Var<float> loss;
  for (int k = 0; k < horizon; ++k) {
    const Var<float> term =
        frame_loss(outputs[static_cast<std::size_t>(k)],
                   stack_frames<float>(v.targets, static_cast<std::size_t>(k)).value());
    loss = loss.defined() ? ops::add(loss, term) : term;
  }
  loss = ops::scale(loss, 1.0f / static_cast<float>(batch.size()));
  const double value = loss.value()[0];
  if (!std::isfinite(value)) {
    zero_all(model);
    throw NumericalError(std::string(storing ? "phase 1" : "phase 2") +
                         " loss is not finite at iteration " +
                         std::to_string(state.iteration + 1));
  }

  backward(loss);
  if (config.clip_norm > 0.0) clip_gradients(params, config.clip_norm);
  adam_step(params, state.moments, config);
  zero_all(model);
  return value;
}

}  // namespace

double phase1_step(const std::vector<TrainingPair>& batch, Model<float>& model,
                   TrainState& state, const TrainingConfig& config) {
  TrainableScope scope(model.memory(), true);
  return run_phase(batch, model, state, config, memory::MotionRole::long_term);
}

double phase2_step(const std::vector<TrainingPair>& batch, Model<float>& model,
                   TrainState& state, const TrainingConfig& config) {
  TrainableScope scope(model.memory(), false);
  return run_phase(batch, model, state, config, memory::MotionRole::matching);
}

IterationLoss train_iteration(const std::vector<VideoSequence>& dataset, Model<float>& model,
                              TrainState& state, const TrainingConfig& config) {
  if (dataset.empty()) throw ContractError("training needs a non-empty dataset");
  std::vector<TrainingPair> batch;
  batch.reserve(static_cast<std::size_t>(config.batch));
  const int last = static_cast<int>(dataset.size()) - 1;
  for (int b = 0; b < config.batch; ++b) {
    const auto& seq = dataset[static_cast<std::size_t>(uniform_int(state.rng, 0, last))];
    batch.push_back(data::sample_training_pair(seq, config.short_frames, config.long_frames,
                                               config.prediction_horizon(), state.rng));
  }
  IterationLoss out;
  out.phase1 = phase1_step(batch, model, state, config);
  out.phase2 = phase2_step(batch, model, state, config);
  out.iteration = ++state.iteration;
  state.phase1.record(out.phase1);
  state.phase2.record(out.phase2);
  return out;
}

void train(const std::vector<VideoSequence>& dataset, Model<float>& model, TrainState& state,
           const TrainingConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (config.query_mode != model.query_mode()) {
    throw ConfigError("training.query_mode", "differs from the model's query mode");
  }
  if (config.memory_slots != model.memory().slot_count()) {
    throw ConfigError("training.memory_slots", "differs from the model's memory size");
  }
  if (dataset.empty()) throw ContractError("training needs a non-empty dataset");
  const std::size_t required = data::required_pair_length(
      config.short_frames, config.long_frames, config.prediction_horizon());
  for (const auto& seq : dataset) {
    if (seq.length() < required) throw SamplingError(required, seq.length());
  }
  while (state.iteration < config.iterations) {
    const IterationLoss loss = train_iteration(dataset, model, state, config);
    if (hooks.on_iteration) hooks.on_iteration(loss);
    if (hooks.on_checkpoint && config.checkpoint_every > 0 &&
        loss.iteration % config.checkpoint_every == 0) {
      hooks.on_checkpoint(model, state);
    }
  }
}

// ---------------------------------------------------------------------------
// Checkpoint container. Little-endian scalars; strings and arrays are
// length-prefixed.

namespace {

constexpr char kMagic[4] = {'L', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <typename V>
  void put(V v) {
    static_assert(std::is_trivially_copyable_v<V>);
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(V));
  }
  void put_string(const std::string& s) {
    put<std::uint64_t>(s.size());
    buf_.append(s);
  }
  void put_floats(const Tensor<float>& t) {
    buf_.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float));
  }
  void put_shape(const Shape& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    for (int d : s) put<std::int32_t>(d);
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string bytes) : buf_(std::move(bytes)) {}

  template <typename V>
  V get() {
    V v;
    std::memcpy(&v, take(sizeof(V)), sizeof(V));
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    if (n > remaining()) throw CheckpointError("format", "truncated string");
    return std::string(take(static_cast<std::size_t>(n)), static_cast<std::size_t>(n));
  }
  Shape get_shape() {
    const auto rank = get<std::uint32_t>();
    if (rank > 8) throw CheckpointError("format", "implausible tensor rank");
    Shape s(rank);
    for (auto& d : s) {
      d = get<std::int32_t>();
      if (d < 0) throw CheckpointError("format", "negative dimension");
    }
    return s;
  }
  Tensor<float> get_floats(const Shape& shape) {
    Tensor<float> t(shape);
    const std::size_t n = t.size() * sizeof(float);
    if (n > remaining()) throw CheckpointError("format", "truncated array");
    std::memcpy(t.data(), take(n), n);
    return t;
  }
  std::size_t remaining() const { return buf_.size() - pos_; }

 private:
  const char* take(std::size_t n) {
    if (n > remaining()) throw CheckpointError("format", "file is truncated");
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

void put_stats(Writer& w, const LossStats& s) {
  w.put<std::uint64_t>(s.count);
  w.put<double>(s.mean);
  w.put<double>(s.last);
}

LossStats get_stats(Reader& r) {
  LossStats s;
  s.count = r.get<std::uint64_t>();
  s.mean = r.get<double>();
  s.last = r.get<double>();
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model<float>& model,
                     const TrainState& state) {
  Writer w;
  for (char c : kMagic) w.put<char>(c);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint64_t>(model.config().hash());
  w.put_string(to_json(model.config()).dump());
  w.put<std::int32_t>(model.memory().slot_count());
  w.put_string(to_string(model.query_mode()));
  w.put<std::int64_t>(state.iteration);
  w.put_string(rng_state(state.rng));
  put_stats(w, state.phase1);
  put_stats(w, state.phase2);

  const ParameterList<float> params = model.named_parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const auto& np : params) {
    const Tensor<float>& value = np.param->var().value();
    w.put_string(np.name);
    w.put_shape(value.shape());
    w.put_floats(value);
    const auto it = state.moments.find(np.name);
    const bool has = it != state.moments.end() && !it->second.first.empty();
    w.put<std::uint8_t>(has ? 1 : 0);
    if (has) {
      w.put<std::int64_t>(it->second.steps);
      w.put_floats(it->second.first);
      w.put_floats(it->second.second);
    }
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(read_file(path));
  for (char c : kMagic) {
    if (r.get<char>() != c) throw CheckpointError("format", "not a checkpoint file");
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw CheckpointError("version", "unsupported version " + std::to_string(version));
  }
  const auto hash = r.get<std::uint64_t>();
  ArchitectureConfig arch;
  try {
    arch = architecture_from_json(nlohmann::json::parse(r.get_string()));
    arch.validate();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("architecture", e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError("architecture", e.what());
  }
  if (arch.hash() != hash) {
    throw CheckpointError("config", "stored architecture does not match its hash");
  }
  const int slots = r.get<std::int32_t>();
  if (slots < 1) throw CheckpointError("memory", "invalid slot count");
  QueryMode mode;
  try {
    mode = parse_query_mode(r.get_string());
  } catch (const ConfigError& e) {
    throw CheckpointError("query_mode", e.what());
  }

  Checkpoint ck{Model<float>(arch, slots, mode, 0), TrainState()};
  ck.state.iteration = r.get<std::int64_t>();
  restore_rng_state(ck.state.rng, r.get_string());
  ck.state.phase1 = get_stats(r);
  ck.state.phase2 = get_stats(r);

  std::map<std::string, Parameter<float>*> by_name;
  for (const auto& np : ck.model.named_parameters()) by_name[np.name] = np.param;
  const auto count = r.get<std::uint32_t>();
  if (count != by_name.size()) {
    throw CheckpointError("parameters", "expected " + std::to_string(by_name.size()) +
                                            " arrays, found " + std::to_string(count));
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.get_string();
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError(name, "unknown parameter");
    const Shape shape = r.get_shape();
    Var<float>& v = it->second->var();
    if (shape != v.shape()) {
      throw CheckpointError(name, "shape " + shape_string(shape) + " does not match model " +
                                      shape_string(v.shape()));
    }
    v.mutable_value() = r.get_floats(shape);
    if (r.get<std::uint8_t>()) {
      AdamSlot slot;
      slot.steps = r.get<std::int64_t>();
      slot.first = r.get_floats(shape);
      slot.second = r.get_floats(shape);
      ck.state.moments[name] = std::move(slot);
    }
    by_name.erase(it);
  }
  if (r.remaining() != 0) throw CheckpointError("format", "trailing bytes");
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchitectureConfig& expected,
                           const TrainingConfig& training) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.model.config().hash() != expected.hash()) {
    throw CheckpointError("architecture",
                          "checkpoint was trained with '" + ck.model.config().canonical() +
                              "', configuration asks for '" + expected.canonical() + "'");
  }
  if (ck.model.memory().slot_count() != training.memory_slots) {
    throw CheckpointError("memory", "checkpoint has " +
                                        std::to_string(ck.model.memory().slot_count()) +
                                        " slots, configuration asks for " +
                                        std::to_string(training.memory_slots));
  }
  if (ck.model.query_mode() != training.query_mode) {
    throw CheckpointError("query_mode", "checkpoint uses '" + to_string(ck.model.query_mode()) +
                                            "', configuration asks for '" +
                                            to_string(training.query_mode) + "'");
  }
  return ck;
}

// ---------------------------------------------------------------------------

namespace {
constexpr const char* kLossHeader = "iteration,phase1_loss,phase2_loss,wall_time";
}

LossLog::LossLog(std::filesystem::path path, std::optional<std::int64_t> truncate_after)
    : path_(std::move(path)) {
  std::vector<std::string> kept;
  if (truncate_after && std::filesystem::exists(path_)) {
    std::ifstream in(path_);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (std::stoll(line.substr(0, line.find(','))) <= *truncate_after) kept.push_back(line);
    }
  }
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw IoError("cannot write loss log " + path_.string());
  out << kLossHeader << '\n';
  for (const auto& l : kept) out << l << '\n';
}

void LossLog::append(const IterationLoss& loss, double wall_time) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw IoError("cannot append to loss log " + path_.string());
  char line[160];
  std::snprintf(line, sizeof line, "%lld,%.17g,%.17g,%.3f\n",
                static_cast<long long>(loss.iteration), loss.phase1, loss.phase2, wall_time);
  out << line;
  if (!out) throw IoError("write failed for loss log " + path_.string());
}

}  // namespace lmc
