#include "lmc/predictor.hpp"

#include "lmc/errors.hpp"

namespace lmc {

template <typename T>
ConvLstmCell<T>::ConvLstmCell(int in_channels, int hidden_channels, int kernel, Rng& rng)
    : gates_(in_channels + hidden_channels, 4 * hidden_channels, kernel, 1, kernel / 2, rng),
      hidden_(hidden_channels) {}

template <typename T>
LstmState<T> ConvLstmCell<T>::step(const Var<T>& x, const LstmState<T>& state) const {
  if (x.shape().size() != 4 || state.hidden.shape() != state.cell.shape() ||
      state.hidden.dim(1) != hidden_ || x.dim(0) != state.hidden.dim(0) ||
      x.dim(2) != state.hidden.dim(2) || x.dim(3) != state.hidden.dim(3) ||
      x.dim(1) + hidden_ != gates_.weight.var().dim(1)) {
    throw ContractError("convlstm step: input " + shape_string(x.shape()) +
                        " incompatible with state " + shape_string(state.hidden.shape()));
  }
  const Var<T> z = gates_.forward(ops::concat(x, state.hidden, 1));
  const int h = hidden_;
  const Var<T> i = ops::sigmoid(ops::slice(z, 1, 0, h));
  const Var<T> f = ops::sigmoid(ops::slice(z, 1, h, 2 * h));
  const Var<T> o = ops::sigmoid(ops::slice(z, 1, 2 * h, 3 * h));
  const Var<T> g = ops::tanh(ops::slice(z, 1, 3 * h, 4 * h));
  LstmState<T> next;
  next.cell = ops::add(ops::mul(f, state.cell), ops::mul(i, g));
  next.hidden = ops::mul(o, ops::tanh(next.cell));
  return next;
}

template <typename T>
void ConvLstmCell<T>::collect(ParameterList<T>& out, const std::string& prefix) {
  gates_.collect(out, prefix + ".gates");
}

template <typename T>
ChannelAttention<T>::ChannelAttention(const ArchitectureConfig& config, Rng& rng)
    : fc1_(config.recurrent_channels + config.embed_out_channels(), config.attention_hidden, rng),
      fc2_(config.attention_hidden, config.embed_out_channels(), rng),
      slope_(static_cast<T>(config.leaky_slope)),
      cell_channels_(config.recurrent_channels),
      memory_channels_(config.embed_out_channels()) {}

namespace {

// [B, C, H, W] -> [B, C]
template <typename T>
Var<T> global_average(const Var<T>& x) {
  return ops::mean(ops::reshape(x, {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)}), 2);
}

}  // namespace

template <typename T>
Var<T> ChannelAttention<T>::forward(const Var<T>& top_cell, const Var<T>& embedded) const {
  if (top_cell.shape().size() != 4 || embedded.shape().size() != 4 ||
      top_cell.dim(1) != cell_channels_ || embedded.dim(1) != memory_channels_ ||
      top_cell.dim(0) != embedded.dim(0)) {
    throw ContractError("channel attention: cell " + shape_string(top_cell.shape()) +
                        " and memory " + shape_string(embedded.shape()) +
                        " do not match the configured widths");
  }
  const Var<T> pooled = ops::concat(global_average(top_cell), global_average(embedded), 1);
  const Var<T> hidden = ops::leaky_relu(fc1_.forward(pooled), slope_);
  return ops::sigmoid(fc2_.forward(hidden));
}

template <typename T>
void ChannelAttention<T>::collect(ParameterList<T>& out, const std::string& prefix) {
  fc1_.collect(out, prefix + ".fc1");
  fc2_.collect(out, prefix + ".fc2");
}

template <typename T>
Var<T> refine_memory(const Var<T>& attention, const Var<T>& embedded) {
  return ops::channel_scale(embedded, attention);
}

template <typename T>
FrameDecoder<T>::FrameDecoder(const ArchitectureConfig& config, Rng& rng)
    : slope_(static_cast<T>(config.leaky_slope)) {
  int in = config.recurrent_channels + config.embed_out_channels();
  for (int out : config.decoder_channels) {
    stages_.emplace_back(in, out, 4, 2, 1, rng);
    in = out;
  }
  stages_.emplace_back(in, config.frame_channels, 4, 2, 1, rng);
}

template <typename T>
Var<T> FrameDecoder<T>::forward(const Var<T>& top_hidden, const Var<T>& memory_feature) const {
  if (top_hidden.shape().size() != 4 || memory_feature.shape().size() != 4 ||
      top_hidden.dim(0) != memory_feature.dim(0) ||
      top_hidden.dim(2) != memory_feature.dim(2) || top_hidden.dim(3) != memory_feature.dim(3)) {
    throw ContractError("frame decoder: hidden " + shape_string(top_hidden.shape()) +
                        " and memory " + shape_string(memory_feature.shape()) +
                        " differ in batch or spatial size");
  }
  Var<T> x = ops::concat(top_hidden, memory_feature, 1);
  for (std::size_t i = 0; i + 1 < stages_.size(); ++i) {
    x = ops::leaky_relu(stages_[i].forward(x), slope_);
  }
  return ops::sigmoid(stages_.back().forward(x));
}

template <typename T>
void FrameDecoder<T>::collect(ParameterList<T>& out, const std::string& prefix) {
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    stages_[i].collect(out, prefix + ".deconv" + std::to_string(i));
  }
}

template <typename T>
Predictor<T>::Predictor(const ArchitectureConfig& config, Rng& rng)
    : config_((config.validate(), config)), spatial_(config, rng) {
  int in = config.spatial_out_channels();
  for (int l = 0; l < config.recurrent_layers; ++l) {
    cells_.emplace_back(in, config.recurrent_channels, config.recurrent_kernel, rng);
    in = config.recurrent_channels;
  }
  embedder_ = MemoryEmbedder<T>(config, rng);
  attention_ = ChannelAttention<T>(config, rng);
  decoder_ = FrameDecoder<T>(config, rng);
}

template <typename T>
PredictorState<T> Predictor<T>::initial_state(int batch) const {
  const Shape shape{batch, config_.recurrent_channels, config_.spatial_height(),
                    config_.spatial_width()};
  PredictorState<T> state(cells_.size());
  for (auto& layer : state) {
    layer.hidden = Var<T>(Tensor<T>(shape));
    layer.cell = Var<T>(Tensor<T>(shape));
  }
  return state;
}

template <typename T>
PredictorState<T> Predictor<T>::advance(const Var<T>& frame,
                                        const PredictorState<T>& state) const {
  PredictorState<T> next(cells_.size());
  Var<T> x = spatial_.forward(frame);
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    next[l] = cells_[l].step(x, state[l]);
    x = next[l].hidden;
  }
  return next;
}

template <typename T>
Var<T> Predictor<T>::decode(const PredictorState<T>& state, const Var<T>& embedded) const {
  const LstmState<T>& top = state.back();
  if (!embedded.defined()) {
    const Var<T> zeros(Tensor<T>({top.hidden.dim(0), config_.embed_out_channels(),
                                  top.hidden.dim(2), top.hidden.dim(3)}));
    return decoder_.forward(top.hidden, zeros);
  }
  const Var<T> attention = attention_.forward(top.cell, embedded);
  return decoder_.forward(top.hidden, refine_memory(attention, embedded));
}

template <typename T>
std::vector<Var<T>> Predictor<T>::rollout(const std::vector<Var<T>>& inputs,
                                          const Var<T>& readout, int horizon) const {
  if (inputs.empty()) throw ContractError("rollout: needs at least one input frame");
  if (horizon < 1) throw ContractError("rollout: horizon must be >= 1");
  const int batch = inputs.front().dim(0);

  const Var<T> embedded = readout.defined() ? embedder_.forward(readout) : Var<T>();
  PredictorState<T> state = initial_state(batch);
  for (const auto& frame : inputs) state = advance(frame, state);

  // Attention only feeds the decoder, so warm-up steps need no decode.
  std::vector<Var<T>> outputs;
  outputs.reserve(static_cast<std::size_t>(horizon));
  outputs.push_back(decode(state, embedded));
  for (int k = 1; k < horizon; ++k) {
    state = advance(outputs.back(), state);
    outputs.push_back(decode(state, embedded));
  }
  return outputs;
}

template <typename T>
void Predictor<T>::collect(ParameterList<T>& out, const std::string& prefix) {
  spatial_.collect(out, prefix + ".spatial");
  for (std::size_t l = 0; l < cells_.size(); ++l) {
    cells_[l].collect(out, prefix + ".lstm" + std::to_string(l));
  }
  embedder_.collect(out, prefix + ".embedder");
  attention_.collect(out, prefix + ".attention");
  decoder_.collect(out, prefix + ".decoder");
}

template class ConvLstmCell<float>;
template class ConvLstmCell<double>;
template class ChannelAttention<float>;
template class ChannelAttention<double>;
template class FrameDecoder<float>;
template class FrameDecoder<double>;
template class Predictor<float>;
template class Predictor<double>;
template Var<float> refine_memory<float>(const Var<float>&, const Var<float>&);
template Var<double> refine_memory<double>(const Var<double>&, const Var<double>&);

}  // namespace lmc
