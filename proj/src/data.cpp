#include "lmc/data.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "lmc/errors.hpp"

namespace lmc::data {

VideoSequence VideoSequence::slice(std::size_t begin, std::size_t count) const {
  if (begin + count > frames.size()) {
    throw ContractError("slice [" + std::to_string(begin) + ", " +
                        std::to_string(begin + count) +
                        ") exceeds sequence length " +
                        std::to_string(frames.size()));
  }
  VideoSequence out;
  out.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(begin),
                    frames.begin() + static_cast<std::ptrdiff_t>(begin + count));
  return out;
}

void VideoSequence::validate() const {
  if (frames.empty()) throw ContractError("video sequence is empty");
  for (const auto& f : frames) {
    if (!f.same_shape(frames.front()) ||
        f.pixels.size() != static_cast<std::size_t>(f.height) * f.width * f.channels) {
      throw ContractError("video sequence frames differ in shape");
    }
  }
}

void validate(const MovingMnistOptions& o) {
  if (o.count < 0) throw ConfigError("count", "must be >= 0");
  if (o.length < 1) throw ConfigError("length", "must be >= 1");
  if (o.digits < 1) throw ConfigError("digits", "must be >= 1");
  if (o.glyph_size < 1) throw ConfigError("glyph_size", "must be >= 1");
  if (o.canvas < o.glyph_size + 2) {
    throw ConfigError("canvas", "must be at least glyph_size + 2 = " +
                                    std::to_string(o.glyph_size + 2));
  }
  if (!(o.speed_min >= 0.0)) throw ConfigError("speed_min", "must be >= 0");
  if (!(o.speed_max >= o.speed_min)) {
    throw ConfigError("speed_max", "must be >= speed_min");
  }
}

DigitMotionState step_digit(const DigitMotionState& state, int canvas) {
  const double hi = static_cast<double>(canvas - state.glyph.size);
  if (hi < 1.0) {
    throw ContractError("step_digit: glyph of size " +
                        std::to_string(state.glyph.size) +
                        " leaves no room to move on canvas " +
                        std::to_string(canvas));
  }
  DigitMotionState next = state;
  for (int axis = 0; axis < 2; ++axis) {
    double p = state.position[axis] + state.velocity[axis];
    double v = state.velocity[axis];
    while (p < 0.0 || p > hi) {
      p = p > hi ? 2.0 * hi - p : -p;
      v = -v;
    }
    next.position[axis] = p;
    next.velocity[axis] = v;
  }
  return next;
}

void composite(Frame& frame, const DigitMotionState& state) {
  const int size = state.glyph.size;
  const int x0 = std::clamp(static_cast<int>(std::lround(state.position[0])), 0,
                            frame.width - size);
  const int y0 = std::clamp(static_cast<int>(std::lround(state.position[1])), 0,
                            frame.height - size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const float v = state.glyph.at(y, x);
      for (int c = 0; c < frame.channels; ++c) {
        float& dst = frame.at(y0 + y, x0 + x, c);
        dst = std::max(dst, v);
      }
    }
  }
}

std::vector<VideoSequence> generate_moving_mnist(const MovingMnistOptions& options) {
  const int size = options.glyph_size;
  return generate_moving_mnist(options,
                               [size](Rng& rng) { return sample_glyph(size, rng); });
}

std::vector<VideoSequence> generate_moving_mnist(const MovingMnistOptions& o,
                                                 const GlyphSource& glyphs) {
  validate(o);
  Rng rng(o.seed);
  std::vector<VideoSequence> out;
  out.reserve(static_cast<std::size_t>(o.count));
  for (int s = 0; s < o.count; ++s) {
    std::vector<DigitMotionState> digits;
    for (int d = 0; d < o.digits; ++d) {
      DigitMotionState st;
      st.glyph = glyphs(rng);
      if (st.glyph.size + 2 > o.canvas) {
        throw ContractError("glyph of size " + std::to_string(st.glyph.size) +
                            " does not fit canvas " + std::to_string(o.canvas));
      }
      const double hi = o.canvas - st.glyph.size;
      st.position = {uniform_real(rng, 0.0, hi), uniform_real(rng, 0.0, hi)};
      double theta = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
      if (o.direction) {
        theta = *o.direction + (uniform_int(rng, 0, 1) ? std::numbers::pi : 0.0);
      }
      const double speed = uniform_real(rng, o.speed_min, o.speed_max);
      st.velocity = {speed * std::cos(theta), speed * std::sin(theta)};
      digits.push_back(std::move(st));
    }
    VideoSequence seq;
    seq.frames.reserve(static_cast<std::size_t>(o.length));
    for (int t = 0; t < o.length; ++t) {
      Frame frame(o.canvas, o.canvas, 1);
      for (auto& st : digits) {
        composite(frame, st);
        st = step_digit(st, o.canvas);
      }
      seq.frames.push_back(std::move(frame));
    }
    out.push_back(std::move(seq));
  }
  return out;
}

std::size_t required_pair_length(int n, int N, int K) {
  return static_cast<std::size_t>(n + n + std::max(N - n, K));
}

TrainingPair slice_training_pair(const VideoSequence& seq, int n, int N, int K,
                                 int r, std::size_t start) {
  if (n < 1 || N < 1 || K < 1) {
    throw ContractError("training pair lengths must be positive");
  }
  if (r < 0 || r > n) {
    throw ContractError("offset r must lie in [0, n], got " + std::to_string(r));
  }
  TrainingPair pair;
  pair.offset_r = r;
  pair.short_input = seq.slice(start, static_cast<std::size_t>(n));
  pair.long_input = seq.slice(start + static_cast<std::size_t>(r),
                              static_cast<std::size_t>(N));
  pair.target = seq.slice(start + static_cast<std::size_t>(n),
                          static_cast<std::size_t>(K));
  return pair;
}

TrainingPair sample_training_pair(const VideoSequence& seq, int n, int N, int K,
                                  Rng& rng) {
  const std::size_t required = required_pair_length(n, N, K);
  if (seq.length() < required) throw SamplingError(required, seq.length());
  const int r = uniform_int(rng, 0, n);
  const std::size_t span = static_cast<std::size_t>(n + std::max(N, K));
  const int last_start = static_cast<int>(seq.length() - span);
  const int start = uniform_int(rng, 0, last_start);
  return slice_training_pair(seq, n, N, K, r, static_cast<std::size_t>(start));
}

VideoSequence difference_frames(const VideoSequence& seq) {
  if (seq.length() < 2) {
    throw ContractError("difference_frames needs at least 2 frames, got " +
                        std::to_string(seq.length()));
  }
  seq.validate();
  VideoSequence out;
  out.frames.reserve(seq.length() - 1);
  for (std::size_t i = 0; i + 1 < seq.length(); ++i) {
    Frame d = seq[i + 1];
    const auto& prev = seq[i].pixels;
    for (std::size_t p = 0; p < d.pixels.size(); ++p) d.pixels[p] -= prev[p];
    out.frames.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset files

namespace {

constexpr char kMagic[4] = {'L', 'M', 'C', 'D'};
constexpr std::size_t kHeaderBytes = 24;

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save_dataset(const std::filesystem::path& path,
                  const std::vector<VideoSequence>& sequences) {
  std::uint32_t length = 0, h = 0, w = 0, c = 0;
  if (!sequences.empty()) {
    const auto& first = sequences.front();
    first.validate();
    length = static_cast<std::uint32_t>(first.length());
    h = static_cast<std::uint32_t>(first[0].height);
    w = static_cast<std::uint32_t>(first[0].width);
    c = static_cast<std::uint32_t>(first[0].channels);
    for (const auto& s : sequences) {
      s.validate();
      if (s.length() != length || !s[0].same_shape(first[0])) {
        throw ContractError("save_dataset: all sequences must share length and frame shape");
      }
    }
  }

  std::vector<unsigned char> buf;
  const std::size_t per_frame = static_cast<std::size_t>(h) * w * c;
  buf.reserve(kHeaderBytes + sequences.size() * length * per_frame * 4);
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32(buf, static_cast<std::uint32_t>(sequences.size()));
  put_u32(buf, length);
  put_u32(buf, h);
  put_u32(buf, w);
  put_u32(buf, c);
  for (const auto& s : sequences) {
    for (const auto& f : s.frames) {
      for (float v : f.pixels) put_u32(buf, std::bit_cast<std::uint32_t>(v));
    }
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<VideoSequence> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < kHeaderBytes) {
    throw FormatError(buf.size(), "truncated dataset header");
  }
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw FormatError(0, "bad dataset magic");
  }
  const std::uint32_t count = get_u32(buf.data() + 4);
  const std::uint32_t length = get_u32(buf.data() + 8);
  const std::uint32_t h = get_u32(buf.data() + 12);
  const std::uint32_t w = get_u32(buf.data() + 16);
  const std::uint32_t c = get_u32(buf.data() + 20);
  if (count > 0) {
    const std::uint32_t fields[4] = {length, h, w, c};
    for (int i = 0; i < 4; ++i) {
      if (fields[i] == 0) {
        throw FormatError(8 + 4 * static_cast<std::uint64_t>(i),
                          "zero dimension in dataset header");
      }
    }
  }
  const std::uint64_t per_frame = static_cast<std::uint64_t>(h) * w * c;
  const std::uint64_t expected =
      kHeaderBytes + static_cast<std::uint64_t>(count) * length * per_frame * 4;
  if (buf.size() < expected) {
    throw FormatError(buf.size(), "truncated dataset payload: expected " +
                                      std::to_string(expected) + " bytes");
  }
  if (buf.size() > expected) {
    throw FormatError(expected, "trailing bytes after dataset payload");
  }

  std::vector<VideoSequence> out(count);
  const unsigned char* p = buf.data() + kHeaderBytes;
  for (auto& seq : out) {
    seq.frames.reserve(length);
    for (std::uint32_t t = 0; t < length; ++t) {
      Frame f(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
      for (auto& v : f.pixels) {
        v = std::bit_cast<float>(get_u32(p));
        p += 4;
      }
      seq.frames.push_back(std::move(f));
    }
  }
  return out;
}

}  // namespace lmc::data
