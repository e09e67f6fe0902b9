#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "lmc/rng.hpp"

namespace lmc::data {

// One video frame. Pixels are stored row-major as H x W x C (channel fastest).
// Generated and loaded frames hold intensities in [0, 1]; difference frames
// reuse the type with signed values in [-1, 1].
struct Frame {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;

  Frame() = default;
  Frame(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  float& at(int y, int x, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return pixels.size(); }
  bool same_shape(const Frame& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  friend bool operator==(const Frame&, const Frame&) = default;
};

struct VideoSequence {
  std::vector<Frame> frames;

  std::size_t length() const { return frames.size(); }
  const Frame& operator[](std::size_t i) const { return frames[i]; }
  Frame& operator[](std::size_t i) { return frames[i]; }

  // Copy of frames [begin, begin + count).
  VideoSequence slice(std::size_t begin, std::size_t count) const;

  // Throws ContractError unless non-empty with uniformly shaped frames.
  void validate() const;
  friend bool operator==(const VideoSequence&, const VideoSequence&) = default;
};

// Square grayscale digit bitmap with intensities in [0, 1].
struct Glyph {
  int size = 0;
  std::vector<float> pixels;

  float at(int y, int x) const {
    return pixels[static_cast<std::size_t>(y) * size + x];
  }
};

struct DigitMotionState {
  std::array<double, 2> position{};  // top-left corner (x, y), pixels
  std::array<double, 2> velocity{};  // pixels per frame
  Glyph glyph;
};

// Rasterizes digit 0..9 from the bundled stroke set. Slant, stroke width and
// scale are jittered from `rng`, so each draw is a distinct handwriting-like
// sample that is still reproducible from the seed.
Glyph render_digit(int digit, int size, Rng& rng);

// Uniformly random digit class rendered with render_digit.
Glyph sample_glyph(int size, Rng& rng);

using GlyphSource = std::function<Glyph(Rng&)>;

struct MovingMnistOptions {
  std::uint64_t seed = 0;
  int count = 1;
  int length = 20;
  int digits = 2;
  int canvas = 64;
  int glyph_size = 28;
  double speed_min = 2.0;
  double speed_max = 4.0;
  // When set, every digit moves along this axis (radians), in a random
  // sense. Used to build datasets with distinct motion patterns.
  std::optional<double> direction;
};

// Throws ConfigError naming the offending field.
void validate(const MovingMnistOptions& options);

std::vector<VideoSequence> generate_moving_mnist(const MovingMnistOptions& options);
std::vector<VideoSequence> generate_moving_mnist(const MovingMnistOptions& options,
                                                 const GlyphSource& glyphs);

// Advances one frame with reflecting boundaries; the glyph occupies
// [x, x + size) x [y, y + size) and must stay inside the canvas.
DigitMotionState step_digit(const DigitMotionState& state, int canvas);

// Draws the glyph at the rounded position, compositing by per-pixel max.
void composite(Frame& frame, const DigitMotionState& state);

struct TrainingPair {
  VideoSequence short_input;  // n frames ending at t
  VideoSequence long_input;   // N frames starting r frames after short_input
  VideoSequence target;       // K frames following short_input
  int offset_r = 0;
};

// Minimum source length accepted by sample_training_pair.
std::size_t required_pair_length(int n, int N, int K);

// Cuts a pair whose short input starts at `start`, with the given offset r.
TrainingPair slice_training_pair(const VideoSequence& seq, int n, int N, int K,
                                 int r, std::size_t start = 0);

// Draws r ~ U{0..n}, then a window start uniformly among positions where
// every slice fits for any r.
TrainingPair sample_training_pair(const VideoSequence& seq, int n, int N, int K,
                                  Rng& rng);

// out[i] = seq[i + 1] - seq[i], element-wise.
VideoSequence difference_frames(const VideoSequence& seq);

// Little-endian binary: "LMCD", u32 count, length, H, W, C, then f32 pixels
// in sequence-major, frame-major, row-major (H, W, C) order.
void save_dataset(const std::filesystem::path& path,
                  const std::vector<VideoSequence>& sequences);
std::vector<VideoSequence> load_dataset(const std::filesystem::path& path);

}  // namespace lmc::data
