#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lmc/layers.hpp"

namespace lmc {

// Layer widths and depths for every network stage. Spatial stages are 3x3
// stride-2 convolutions; motion stages are 3x3x3 convolutions with stride 2 in
// space and 1 in time; embedder and decoder stages are 4x4 stride-2
// transposed convolutions.
struct ArchitectureConfig {
  int frame_height = 64;
  int frame_width = 64;
  int frame_channels = 1;

  std::vector<int> spatial_channels{32, 64};
  std::vector<int> motion_channels{32, 64, 128};
  int motion_min_frames = 4;
  std::vector<int> embed_channels{64};

  int recurrent_layers = 4;
  int recurrent_channels = 64;
  int recurrent_kernel = 3;

  int attention_hidden = 64;
  // Intermediate decoder widths; the last stage always emits frame_channels.
  std::vector<int> decoder_channels{32};

  double leaky_slope = 0.2;

  // Throws ConfigError unless every stage composes with the next.
  void validate() const;

  int spatial_height() const;
  int spatial_width() const;
  int spatial_out_channels() const { return spatial_channels.back(); }
  int motion_height() const;
  int motion_width() const;
  int motion_out_channels() const { return motion_channels.back(); }
  int embed_out_channels() const { return embed_channels.back(); }

  // Stable textual form; its FNV-1a hash identifies checkpoints.
  std::string canonical() const;
  std::uint64_t hash() const;

  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

std::uint64_t fnv1a64(const std::string& bytes);

// Per-frame 2D encoder: [B, C, H, W] -> [B, c_s, h_s, w_s].
template <typename T>
class SpatialEncoder {
 public:
  SpatialEncoder() = default;
  SpatialEncoder(const ArchitectureConfig& config, Rng& rng);

  Var<T> forward(const Var<T>& frame) const;
  void collect(ParameterList<T>& out, const std::string& prefix);

 private:
  std::vector<Conv2dLayer<T>> stages_;
  T slope_ = T(0.2);
  Shape expected_;  // {C, H, W}
};

// 3D-convolutional motion encoder over difference frames:
// [B, C, T, H, W] -> [B, c, h, w] after mean pooling over time.
template <typename T>
class MotionEncoder {
 public:
  MotionEncoder() = default;
  MotionEncoder(const ArchitectureConfig& config, Rng& rng);

  Var<T> forward(const Var<T>& diffs) const;
  void collect(ParameterList<T>& out, const std::string& prefix);

 private:
  std::vector<Conv3dLayer<T>> stages_;
  T slope_ = T(0.2);
  int min_frames_ = 1;
  Shape expected_;  // {C, H, W}
};

// Upsamples a memory readout [B, c, h, w] to [B, c_m, h_s, w_s].
template <typename T>
class MemoryEmbedder {
 public:
  MemoryEmbedder() = default;
  MemoryEmbedder(const ArchitectureConfig& config, Rng& rng);

  Var<T> forward(const Var<T>& readout) const;
  void collect(ParameterList<T>& out, const std::string& prefix);

  // Number of forward() calls since construction.
  std::size_t invocations() const { return invocations_; }

 private:
  std::vector<Deconv2dLayer<T>> stages_;
  T slope_ = T(0.2);
  Shape expected_;  // {c, h, w}
  mutable std::size_t invocations_ = 0;
};

}  // namespace lmc
