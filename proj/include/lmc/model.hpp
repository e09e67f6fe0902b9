#pragma once

#include <string>
#include <vector>

#include "lmc/data.hpp"
#include "lmc/memory.hpp"
#include "lmc/predictor.hpp"

namespace lmc {

// How motion features query the memory.
//   local  - every grid location is an independent query (decomposed)
//   global - the grid is mean-pooled into one query whose readout is tiled
//   none   - no memory path at all (plain encoder/ConvLSTM/decoder)
enum class QueryMode { local, global, none };

std::string to_string(QueryMode mode);
QueryMode parse_query_mode(const std::string& text);

// All networks of the predictor plus the memory, grouped into the two
// alternately trained parameter sets:
//   storing  (theta): long-term encoder, shared pipeline, memory slots
//   matching (phi):   matching encoder, shared pipeline
template <typename T>
class Model {
 public:
  Model(const ArchitectureConfig& config, int memory_slots, QueryMode mode,
        std::uint64_t seed);

  const ArchitectureConfig& config() const { return config_; }
  QueryMode query_mode() const { return mode_; }

  MotionEncoder<T>& long_term_encoder() { return long_term_; }
  MotionEncoder<T>& matching_encoder() { return matching_; }
  const MotionEncoder<T>& long_term_encoder() const { return long_term_; }
  const MotionEncoder<T>& matching_encoder() const { return matching_; }
  memory::MemoryBank<T>& memory() { return memory_; }
  const memory::MemoryBank<T>& memory() const { return memory_; }
  Predictor<T>& predictor() { return predictor_; }
  const Predictor<T>& predictor() const { return predictor_; }

  // Motion feature of difference frames [B, C, T, H, W] -> [B, c, h, w].
  Var<T> encode_motion(const Var<T>& diffs, memory::MotionRole role) const;

  // Memory readout for a motion feature, honouring the query mode.
  Var<T> recall(const Var<T>& motion) const;

  // Addressing vectors of a motion feature: [B, L, s] with L = h * w for
  // local queries and L = 1 for global ones.
  Tensor<T> addressing(const Tensor<T>& motion) const;

  // Full prediction from the matching path, as used at inference time.
  std::vector<Var<T>> predict(const std::vector<Var<T>>& inputs, const Var<T>& diffs,
                              int horizon) const;

  ParameterList<T> named_parameters();
  ParameterList<T> storing_parameters();   // theta
  ParameterList<T> matching_parameters();  // phi, never includes the memory
  ParameterList<T> shared_parameters();

 private:
  ArchitectureConfig config_;
  QueryMode mode_;
  MotionEncoder<T> long_term_;
  MotionEncoder<T> matching_;
  memory::MemoryBank<T> memory_;
  Predictor<T> predictor_;
};

// Frame `index` of every sequence, stacked as [B, C, H, W].
template <typename T>
Var<T> stack_frames(const std::vector<const data::VideoSequence*>& batch, std::size_t index);

// All frames of every sequence, as a list of [B, C, H, W] tensors.
template <typename T>
std::vector<Var<T>> stack_sequences(const std::vector<const data::VideoSequence*>& batch);

// Difference frames of every sequence, stacked as [B, C, T - 1, H, W].
template <typename T>
Var<T> stack_differences(const std::vector<const data::VideoSequence*>& batch);

// Element `b` of a [B, C, H, W] tensor as a frame (values copied as-is).
template <typename T>
data::Frame to_frame(const Tensor<T>& batch, int b);

}  // namespace lmc
