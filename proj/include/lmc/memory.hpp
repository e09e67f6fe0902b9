#pragma once

#include <span>
#include <vector>

#include "lmc/autograd.hpp"
#include "lmc/rng.hpp"

namespace lmc::memory {

// Guard on vector norms in the cosine denominator.
inline constexpr double kCosineEpsilon = 1e-8;

// Trainable s x c slot matrix. While frozen, the slots take no gradient and
// no optimizer may touch them.
template <typename T>
class MemoryBank {
 public:
  MemoryBank(int slots, int channels);

  // i.i.d. uniform in [-1/sqrt(c), 1/sqrt(c)].
  static MemoryBank random(int slots, int channels, Rng& rng);

  int slot_count() const { return slots_.var().dim(0); }
  int channels() const { return slots_.var().dim(1); }

  bool trainable() const { return trainable_; }
  void set_trainable(bool flag) {
    trainable_ = flag;
    slots_.var().set_requires_grad(flag);
  }

  const Tensor<T>& slots() const { return slots_.var().value(); }
  std::span<const T> row(int i) const {
    return slots().values().subspan(
        static_cast<std::size_t>(i) * channels(), channels());
  }

  // Graph handle used by the model and optimizer.
  Var<T>& parameter() { return slots_.var(); }
  const Var<T>& parameter() const { return slots_.var(); }
  Parameter<T>& slots_parameter() { return slots_; }

 private:
  Parameter<T> slots_;
  bool trainable_ = true;
};

template <typename T>
struct AddressingVector {
  std::vector<T> weights;
};

enum class MotionRole { long_term, matching };

// Local queries on a w x h grid, stored channel-major as [c, h, w].
template <typename T>
struct MotionContextFeature {
  Tensor<T> grid;
  MotionRole role = MotionRole::matching;
};

// Per-location recalled memory features, [c, h, w].
template <typename T>
struct MemoryReadout {
  Tensor<T> grid;
};

template <typename T>
T cosine_similarity(std::span<const T> u, std::span<const T> v);

// Softmax over cosine similarities between `query` and every slot.
template <typename T>
AddressingVector<T> address(std::span<const T> query, const MemoryBank<T>& bank);

// Convex combination of slots weighted by `addr`.
template <typename T>
std::vector<T> read(const AddressingVector<T>& addr, const MemoryBank<T>& bank);

// Independent address-and-read at every grid location.
template <typename T>
MemoryReadout<T> recall_grid(const MotionContextFeature<T>& z,
                             const MemoryBank<T>& bank);

// Addressing vectors for every location of a batched grid z[B, c, h, w];
// result is [B, h * w, s].
template <typename T>
Tensor<T> addressing_grid(const Tensor<T>& z, const Tensor<T>& slots);

// Differentiable recall of z[B, c, h, w] against slots[s, c]; returns
// [B, c, h, w]. Gradients flow to both the queries and the slots.
template <typename T>
Var<T> recall(const Var<T>& z, const Var<T>& slots);

}  // namespace lmc::memory
