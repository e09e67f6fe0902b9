#include "lmc/model.hpp"

#include "lmc/errors.hpp"

namespace lmc {

std::string to_string(QueryMode mode) {
  switch (mode) {
    case QueryMode::local: return "local";
    case QueryMode::global: return "global";
    case QueryMode::none: return "none";
  }
  return "unknown";
}

QueryMode parse_query_mode(const std::string& text) {
  if (text == "local") return QueryMode::local;
  if (text == "global") return QueryMode::global;
  if (text == "none") return QueryMode::none;
  throw ConfigError("training.query_mode",
                    "expected one of local, global, none; got '" + text + "'");
}

namespace {

const ArchitectureConfig& validated(const ArchitectureConfig& config, int slots) {
  config.validate();
  if (slots < 1) throw ConfigError("training.memory_slots", "must be >= 1");
  return config;
}

template <typename T>
Var<T> pool_grid(const Var<T>& z) {
  const Var<T> flat = ops::reshape(z, {z.dim(0), z.dim(1), z.dim(2) * z.dim(3)});
  return ops::reshape(ops::mean(flat, 2), {z.dim(0), z.dim(1), 1, 1});
}

}  // namespace

template <typename T>
Model<T>::Model(const ArchitectureConfig& config, int memory_slots, QueryMode mode,
                std::uint64_t seed)
    : config_(validated(config, memory_slots)), mode_(mode), memory_(1, 1) {
  Rng rng(seed);
  long_term_ = MotionEncoder<T>(config_, rng);
  matching_ = MotionEncoder<T>(config_, rng);
  memory_ = memory::MemoryBank<T>::random(memory_slots, config_.motion_out_channels(), rng);
  predictor_ = Predictor<T>(config_, rng);
}

template <typename T>
Var<T> Model<T>::encode_motion(const Var<T>& diffs, memory::MotionRole role) const {
  return role == memory::MotionRole::long_term ? long_term_.forward(diffs)
                                               : matching_.forward(diffs);
}

template <typename T>
Var<T> Model<T>::recall(const Var<T>& motion) const {
  const Var<T>& slots = memory_.parameter();
  switch (mode_) {
    case QueryMode::local:
      return memory::recall(motion, slots);
    case QueryMode::global: {
      const Var<T> readout = memory::recall(pool_grid(motion), slots);
      return ops::broadcast_spatial(ops::reshape(readout, {motion.dim(0), motion.dim(1)}),
                                    motion.dim(2), motion.dim(3));
    }
    case QueryMode::none:
      break;
  }
  throw ContractError("recall: model was built without a memory path");
}

template <typename T>
Tensor<T> Model<T>::addressing(const Tensor<T>& motion) const {
  switch (mode_) {
    case QueryMode::local:
      return memory::addressing_grid(motion, memory_.slots());
    case QueryMode::global: {
      NoGradGuard guard;
      return memory::addressing_grid(pool_grid(Var<T>(motion)).value(), memory_.slots());
    }
    case QueryMode::none:
      break;
  }
  throw ContractError("addressing: model was built without a memory path");
}

template <typename T>
std::vector<Var<T>> Model<T>::predict(const std::vector<Var<T>>& inputs, const Var<T>& diffs,
                                      int horizon) const {
  if (mode_ == QueryMode::none) return predictor_.rollout(inputs, Var<T>(), horizon);
  const Var<T> z = encode_motion(diffs, memory::MotionRole::matching);
  return predictor_.rollout(inputs, recall(z), horizon);
}

template <typename T>
ParameterList<T> Model<T>::shared_parameters() {
  ParameterList<T> out;
  predictor_.collect(out, "predictor");
  return out;
}

template <typename T>
ParameterList<T> Model<T>::storing_parameters() {
  ParameterList<T> out;
  if (mode_ != QueryMode::none) {
    long_term_.collect(out, "long_term");
  }
  predictor_.collect(out, "predictor");
  if (mode_ != QueryMode::none) {
    out.push_back({"memory.slots", &memory_.slots_parameter()});
  }
  return out;
}

template <typename T>
ParameterList<T> Model<T>::matching_parameters() {
  ParameterList<T> out;
  if (mode_ != QueryMode::none) matching_.collect(out, "matching");
  predictor_.collect(out, "predictor");
  return out;
}

template <typename T>
ParameterList<T> Model<T>::named_parameters() {
  ParameterList<T> out;
  long_term_.collect(out, "long_term");
  matching_.collect(out, "matching");
  out.push_back({"memory.slots", &memory_.slots_parameter()});
  predictor_.collect(out, "predictor");
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_batch(const std::vector<const data::VideoSequence*>& batch) {
  if (batch.empty()) throw ContractError("empty batch");
  for (const auto* s : batch) {
    s->validate();
    if (!(*s)[0].same_shape((*batch.front())[0]) || s->length() != batch.front()->length()) {
      throw ContractError("batch sequences differ in length or frame shape");
    }
  }
}

// HWC frame into a CHW destination.
template <typename T>
void write_chw(const data::Frame& f, T* dst) {
  const std::size_t plane = static_cast<std::size_t>(f.height) * f.width;
  for (int y = 0; y < f.height; ++y) {
    for (int x = 0; x < f.width; ++x) {
      for (int c = 0; c < f.channels; ++c) {
        dst[c * plane + static_cast<std::size_t>(y) * f.width + x] =
            static_cast<T>(f.at(y, x, c));
      }
    }
  }
}

}  // namespace

template <typename T>
Var<T> stack_frames(const std::vector<const data::VideoSequence*>& batch, std::size_t index) {
  check_batch(batch);
  const data::Frame& first = (*batch.front())[index];
  Tensor<T> out({static_cast<int>(batch.size()), first.channels, first.height, first.width});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    write_chw((*batch[b])[index], out.data() + b * first.size());
  }
  return Var<T>(std::move(out));
}

template <typename T>
std::vector<Var<T>> stack_sequences(const std::vector<const data::VideoSequence*>& batch) {
  check_batch(batch);
  std::vector<Var<T>> out;
  for (std::size_t t = 0; t < batch.front()->length(); ++t) {
    out.push_back(stack_frames<T>(batch, t));
  }
  return out;
}

template <typename T>
Var<T> stack_differences(const std::vector<const data::VideoSequence*>& batch) {
  check_batch(batch);
  const data::Frame& first = (*batch.front())[0];
  const int steps = static_cast<int>(batch.front()->length()) - 1;
  if (steps < 1) throw ContractError("difference frames need sequences of length >= 2");
  const int C = first.channels, H = first.height, W = first.width;
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  Tensor<T> out({static_cast<int>(batch.size()), C, steps, H, W});
  std::vector<T> chw(first.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const data::VideoSequence diffs = data::difference_frames(*batch[b]);
    for (int t = 0; t < steps; ++t) {
      write_chw(diffs[static_cast<std::size_t>(t)], chw.data());
      for (int c = 0; c < C; ++c) {
        std::copy_n(chw.data() + c * plane, plane,
                    out.data() + (((b * C + c) * steps) + t) * plane);
      }
    }
  }
  return Var<T>(std::move(out));
}

template <typename T>
data::Frame to_frame(const Tensor<T>& batch, int b) {
  if (batch.rank() != 4 || b < 0 || b >= batch.dim(0)) {
    throw ContractError("to_frame: invalid batch tensor " + shape_string(batch.shape()));
  }
  const int C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  data::Frame f(H, W, C);
  const T* src = batch.data() + static_cast<std::size_t>(b) * C * plane;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        f.at(y, x, c) = static_cast<float>(src[c * plane + static_cast<std::size_t>(y) * W + x]);
      }
    }
  }
  return f;
}

#define LMC_INSTANTIATE_MODEL(T)                                                        \
  template class Model<T>;                                                              \
  template Var<T> stack_frames<T>(const std::vector<const data::VideoSequence*>&,      \
                                  std::size_t);                                         \
  template std::vector<Var<T>> stack_sequences<T>(                                      \
      const std::vector<const data::VideoSequence*>&);                                  \
  template Var<T> stack_differences<T>(const std::vector<const data::VideoSequence*>&); \
  template data::Frame to_frame<T>(const Tensor<T>&, int);

LMC_INSTANTIATE_MODEL(float)
LMC_INSTANTIATE_MODEL(double)

}  // namespace lmc
