#pragma once

#include <vector>

#include "lmc/encoders.hpp"

namespace lmc {

template <typename T>
struct LstmState {
  Var<T> hidden;  // H, [B, c_r, h_s, w_s]
  Var<T> cell;    // C, same shape
};

// One entry per recurrent layer, bottom first.
template <typename T>
using PredictorState = std::vector<LstmState<T>>;

// Convolutional LSTM cell. A single convolution over [x; H] produces the
// input, forget, output and candidate pre-activations, in that channel order.
template <typename T>
class ConvLstmCell {
 public:
  ConvLstmCell() = default;
  ConvLstmCell(int in_channels, int hidden_channels, int kernel, Rng& rng);

  LstmState<T> step(const Var<T>& x, const LstmState<T>& state) const;
  void collect(ParameterList<T>& out, const std::string& prefix);

  int hidden_channels() const { return hidden_; }
  Conv2dLayer<T>& gates() { return gates_; }
  const Conv2dLayer<T>& gates() const { return gates_; }

 private:
  Conv2dLayer<T> gates_;
  int hidden_ = 0;
};

// Channel-wise attention over the embedded memory, computed from the top
// cell state: sigmoid(fc2(leaky(fc1([gap(C); gap(F)])))), shape [B, c_m].
template <typename T>
class ChannelAttention {
 public:
  ChannelAttention() = default;
  ChannelAttention(const ArchitectureConfig& config, Rng& rng);

  Var<T> forward(const Var<T>& top_cell, const Var<T>& embedded) const;
  void collect(ParameterList<T>& out, const std::string& prefix);

  LinearLayer<T>& hidden_layer() { return fc1_; }
  LinearLayer<T>& output_layer() { return fc2_; }

 private:
  LinearLayer<T> fc1_, fc2_;
  T slope_ = T(0.2);
  int cell_channels_ = 0;
  int memory_channels_ = 0;
};

// Per-channel broadcast multiply of the embedded memory by attention weights.
template <typename T>
Var<T> refine_memory(const Var<T>& attention, const Var<T>& embedded);

// Transposed-convolution decoder of [H_top; F_t] into a frame in [0, 1].
template <typename T>
class FrameDecoder {
 public:
  FrameDecoder() = default;
  FrameDecoder(const ArchitectureConfig& config, Rng& rng);

  Var<T> forward(const Var<T>& top_hidden, const Var<T>& memory_feature) const;
  void collect(ParameterList<T>& out, const std::string& prefix);

 private:
  std::vector<Deconv2dLayer<T>> stages_;
  T slope_ = T(0.2);
};

// The shared prediction pipeline: spatial encoder, stacked ConvLSTM,
// memory embedding, channel attention and frame decoder.
template <typename T>
class Predictor {
 public:
  Predictor() = default;
  Predictor(const ArchitectureConfig& config, Rng& rng);

  PredictorState<T> initial_state(int batch) const;

  // Advances every layer by one frame.
  PredictorState<T> advance(const Var<T>& frame, const PredictorState<T>& state) const;

  // Decodes the next frame from the state and the embedded memory (an
  // undefined Var disables the memory path).
  Var<T> decode(const PredictorState<T>& state, const Var<T>& embedded) const;

  // Warms up on `inputs` (n frames, each [B, C, H, W]) and generates K frames
  // autoregressively. The readout [B, c, h, w] is embedded exactly once; pass
  // an undefined Var to run without memory.
  std::vector<Var<T>> rollout(const std::vector<Var<T>>& inputs,
                              const Var<T>& readout, int horizon) const;

  void collect(ParameterList<T>& out, const std::string& prefix);

  const ArchitectureConfig& config() const { return config_; }
  SpatialEncoder<T>& spatial() { return spatial_; }
  MemoryEmbedder<T>& embedder() { return embedder_; }
  const MemoryEmbedder<T>& embedder() const { return embedder_; }
  std::vector<ConvLstmCell<T>>& cells() { return cells_; }
  ChannelAttention<T>& attention() { return attention_; }
  FrameDecoder<T>& decoder() { return decoder_; }

 private:
  ArchitectureConfig config_;
  SpatialEncoder<T> spatial_;
  std::vector<ConvLstmCell<T>> cells_;
  MemoryEmbedder<T> embedder_;
  ChannelAttention<T> attention_;
  FrameDecoder<T> decoder_;
};

}  // namespace lmc
