#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lmc/data.hpp"
#include "lmc/model.hpp"

namespace lmc {

struct TrainingConfig {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch = 4;
  int iterations = 1000;
  int short_frames = 10;           // n
  int long_frames = 30;            // N
  std::optional<int> horizon;      // K, defaults to N
  int memory_slots = 100;          // s
  double clip_norm = 5.0;          // 0 disables clipping
  int checkpoint_every = 100;      // 0 disables periodic checkpoints
  QueryMode query_mode = QueryMode::local;
  std::uint64_t seed = 0;

  int prediction_horizon() const { return horizon.value_or(long_frames); }

  // Throws ConfigError naming the field.
  void validate() const;
};

// Sum of squared plus absolute residuals over every element.
double prediction_loss(const data::VideoSequence& pred, const data::VideoSequence& target);

// Differentiable form on one [B, ...] frame batch: sum(r^2 + |r|) as {1}.
template <typename T>
Var<T> frame_loss(const Var<T>& pred, const Tensor<T>& target);

struct AdamSlot {
  Tensor<float> first;   // m
  Tensor<float> second;  // v
  std::int64_t steps = 0;
  friend bool operator==(const AdamSlot&, const AdamSlot&) = default;
};

struct LossStats {
  std::uint64_t count = 0;
  double mean = 0.0;
  double last = 0.0;

  void record(double loss);
  friend bool operator==(const LossStats&, const LossStats&) = default;
};

struct TrainState {
  std::int64_t iteration = 0;
  std::map<std::string, AdamSlot> moments;
  Rng rng;
  LossStats phase1;
  LossStats phase2;

  explicit TrainState(std::uint64_t seed = 0) : rng(seed) {}
};

// One Adam update of every listed parameter that holds a gradient.
void adam_step(const ParameterList<float>& params, std::map<std::string, AdamSlot>& moments,
               const TrainingConfig& config);

// Scales the gradients of `params` so their joint L2 norm is at most
// max_norm; returns the norm before scaling.
double clip_gradients(const ParameterList<float>& params, double max_norm);

// Storing phase: long-term encoder on the long inputs, memory trainable,
// update of the storing set. Returns the batch-mean loss.
double phase1_step(const std::vector<data::TrainingPair>& batch, Model<float>& model,
                   TrainState& state, const TrainingConfig& config);

// Matching phase: matching encoder on the short inputs, memory frozen,
// update of the matching set. Returns the batch-mean loss.
double phase2_step(const std::vector<data::TrainingPair>& batch, Model<float>& model,
                   TrainState& state, const TrainingConfig& config);

struct IterationLoss {
  std::int64_t iteration = 0;
  double phase1 = 0.0;
  double phase2 = 0.0;
};

// Draws one batch of pairs from `dataset` with the state's random source and
// runs both phases on it.
IterationLoss train_iteration(const std::vector<data::VideoSequence>& dataset,
                              Model<float>& model, TrainState& state,
                              const TrainingConfig& config);

struct TrainHooks {
  std::function<void(const IterationLoss&)> on_iteration;
  std::function<void(Model<float>&, const TrainState&)> on_checkpoint;
};

// Runs iterations until state.iteration reaches config.iterations.
void train(const std::vector<data::VideoSequence>& dataset, Model<float>& model,
           TrainState& state, const TrainingConfig& config, const TrainHooks& hooks = {});

// ---------------------------------------------------------------------------
// Persistence

struct Checkpoint {
  Model<float> model;
  TrainState state;
};

// Atomic write (temporary file, then rename).
void save_checkpoint(const std::filesystem::path& path, Model<float>& model,
                     const TrainState& state);

// Rebuilds the model from the stored architecture.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// As above, but refuses checkpoints whose architecture, memory size or query
// mode differs from `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const ArchitectureConfig& expected, const TrainingConfig& training);

// Append-only CSV: iteration,phase1_loss,phase2_loss,wall_time.
class LossLog {
 public:
  // With `truncate_after` set, existing rows beyond that iteration are
  // dropped (resume); otherwise the file is started afresh.
  LossLog(std::filesystem::path path, std::optional<std::int64_t> truncate_after = std::nullopt);
  void append(const IterationLoss& loss, double wall_time);

 private:
  std::filesystem::path path_;
};

}  // namespace lmc
