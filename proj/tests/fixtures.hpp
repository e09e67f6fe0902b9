#pragma once

#include "lmc/config.hpp"
#include "lmc/data.hpp"
#include "lmc/encoders.hpp"
#include "lmc/training.hpp"

namespace fixture {

// 8x8 frames, 4-channel stages: 4x4 spatial grid, 2x2 motion grid.
inline lmc::ArchitectureConfig miniature() {
  lmc::ArchitectureConfig a;
  a.frame_height = a.frame_width = 8;
  a.spatial_channels = {4};
  a.motion_channels = {4, 4};
  a.motion_min_frames = 2;
  a.embed_channels = {4};
  a.recurrent_layers = 2;
  a.recurrent_channels = 4;
  a.attention_hidden = 4;
  a.decoder_channels = {};
  return a;
}

// 32x32 frames with narrow stages, used for the training-scale checks.
inline lmc::ArchitectureConfig toy() {
  lmc::ArchitectureConfig a;
  a.frame_height = a.frame_width = 32;
  a.spatial_channels = {8, 16};
  a.motion_channels = {8, 16, 16};
  a.embed_channels = {16};
  a.recurrent_layers = 2;
  a.recurrent_channels = 16;
  a.attention_hidden = 16;
  a.decoder_channels = {8};
  return a;
}

// Moving digits on an 8x8 canvas, matching miniature().
inline std::vector<lmc::data::VideoSequence> miniature_videos(int count, int length,
                                                             std::uint64_t seed) {
  lmc::data::MovingMnistOptions o;
  o.seed = seed;
  o.count = count;
  o.length = length;
  o.canvas = 8;
  o.glyph_size = 5;
  o.digits = 1;
  o.speed_min = 0.5;
  o.speed_max = 1.5;
  return lmc::data::generate_moving_mnist(o);
}

// n = 3, N = 5, K = 4 on the miniature model; pairs need 11 frames.
inline lmc::TrainingConfig miniature_training(lmc::QueryMode mode = lmc::QueryMode::local) {
  lmc::TrainingConfig t;
  t.short_frames = 3;
  t.long_frames = 5;
  t.horizon = 4;
  t.batch = 2;
  t.memory_slots = 6;
  t.learning_rate = 1e-3;
  t.iterations = 4;
  t.checkpoint_every = 0;
  t.query_mode = mode;
  return t;
}

// The miniature model on 16x16 frames, the smallest canvas SSIM accepts.
inline lmc::RunConfig miniature_run() {
  lmc::RunConfig c;
  c.data.canvas = 16;
  c.data.glyph_size = 5;
  c.data.digits = 1;
  c.data.speed_min = 0.5;
  c.data.speed_max = 1.5;
  c.data.length = 12;
  c.data.train_count = 4;
  c.data.test_count = 2;
  c.architecture = miniature();
  c.architecture.frame_height = c.architecture.frame_width = 16;
  c.training = miniature_training();
  c.training.checkpoint_every = 2;
  c.evaluation.horizon = 4;
  c.evaluation.last = 2;
  c.evaluation.patterns = 2;
  c.evaluation.clips_per_pattern = 2;
  c.evaluation.short_frames = 3;
  c.evaluation.long_frames = 5;
  return c;
}

}  // namespace fixture
