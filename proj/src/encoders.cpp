#include "lmc/encoders.hpp"

#include <sstream>

#include "lmc/errors.hpp"

namespace lmc {

namespace {

constexpr int kSpatialKernel = 3;
constexpr int kUpKernel = 4;

int halve(int v, int times) {
  for (int i = 0; i < times; ++i) v = ops::conv_out_size(v, kSpatialKernel, 2, 1);
  return v;
}

void require_positive(const std::vector<int>& widths, const char* field) {
  if (widths.empty()) throw ConfigError(field, "needs at least one stage");
  for (int w : widths) {
    if (w < 1) throw ConfigError(field, "channel widths must be positive");
  }
}

std::string join(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

int ArchitectureConfig::spatial_height() const {
  return halve(frame_height, static_cast<int>(spatial_channels.size()));
}
int ArchitectureConfig::spatial_width() const {
  return halve(frame_width, static_cast<int>(spatial_channels.size()));
}
int ArchitectureConfig::motion_height() const {
  return halve(frame_height, static_cast<int>(motion_channels.size()));
}
int ArchitectureConfig::motion_width() const {
  return halve(frame_width, static_cast<int>(motion_channels.size()));
}

void ArchitectureConfig::validate() const {
  if (frame_height < 1 || frame_width < 1 || frame_channels < 1) {
    throw ConfigError("architecture.frame", "frame dimensions must be positive");
  }
  require_positive(spatial_channels, "architecture.spatial_channels");
  require_positive(motion_channels, "architecture.motion_channels");
  require_positive(embed_channels, "architecture.embed_channels");
  for (int w : decoder_channels) {
    if (w < 1) throw ConfigError("architecture.decoder_channels", "channel widths must be positive");
  }
  if (motion_min_frames < 1) {
    throw ConfigError("architecture.motion_min_frames", "must be >= 1");
  }
  if (recurrent_layers < 1) throw ConfigError("architecture.recurrent_layers", "must be >= 1");
  if (recurrent_channels < 1) throw ConfigError("architecture.recurrent_channels", "must be >= 1");
  if (recurrent_kernel < 1 || recurrent_kernel % 2 == 0) {
    throw ConfigError("architecture.recurrent_kernel", "must be a positive odd number");
  }
  if (attention_hidden < 1) throw ConfigError("architecture.attention_hidden", "must be >= 1");
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) {
    throw ConfigError("architecture.leaky_slope", "must lie in [0, 1)");
  }

  const int up = 1 << embed_channels.size();
  if (motion_height() * up != spatial_height() || motion_width() * up != spatial_width()) {
    throw ConfigError("architecture.embed_channels",
                      "embedder output " + std::to_string(motion_height() * up) + "x" +
                          std::to_string(motion_width() * up) +
                          " does not match spatial feature " +
                          std::to_string(spatial_height()) + "x" +
                          std::to_string(spatial_width()));
  }
  const int dec = 1 << (decoder_channels.size() + 1);
  if (spatial_height() * dec != frame_height || spatial_width() * dec != frame_width) {
    throw ConfigError("architecture.decoder_channels",
                      "decoder output " + std::to_string(spatial_height() * dec) + "x" +
                          std::to_string(spatial_width() * dec) +
                          " does not match frame " + std::to_string(frame_height) +
                          "x" + std::to_string(frame_width));
  }
}

std::string ArchitectureConfig::canonical() const {
  std::ostringstream os;
  os << "frame=" << frame_height << "x" << frame_width << "x" << frame_channels
     << ";spatial=" << join(spatial_channels) << ";motion=" << join(motion_channels)
     << ";motion_min_frames=" << motion_min_frames << ";embed=" << join(embed_channels)
     << ";recurrent=" << recurrent_layers << "x" << recurrent_channels << "k"
     << recurrent_kernel << ";attention=" << attention_hidden
     << ";decoder=" << join(decoder_channels) << ";slope=" << leaky_slope;
  return os.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t ArchitectureConfig::hash() const { return fnv1a64(canonical()); }

// ---------------------------------------------------------------------------

template <typename T>
SpatialEncoder<T>::SpatialEncoder(const ArchitectureConfig& config, Rng& rng)
    : slope_(static_cast<T>(config.leaky_slope)),
      expected_{config.frame_channels, config.frame_height, config.frame_width} {
  int in = config.frame_channels;
  for (int out : config.spatial_channels) {
    stages_.emplace_back(in, out, kSpatialKernel, 2, 1, rng);
    in = out;
  }
}

template <typename T>
Var<T> SpatialEncoder<T>::forward(const Var<T>& frame) const {
  if (frame.shape().size() != 4 ||
      Shape(frame.shape().begin() + 1, frame.shape().end()) != expected_) {
    throw ContractError("spatial encoder: frame shape " + shape_string(frame.shape()) +
                        " does not match configured [B, " +
                        shape_string(expected_).substr(1));
  }
  Var<T> x = frame;
  for (const auto& s : stages_) x = ops::leaky_relu(s.forward(x), slope_);
  return x;
}

template <typename T>
void SpatialEncoder<T>::collect(ParameterList<T>& out, const std::string& prefix) {
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    stages_[i].collect(out, prefix + ".conv" + std::to_string(i));
  }
}

template <typename T>
MotionEncoder<T>::MotionEncoder(const ArchitectureConfig& config, Rng& rng)
    : slope_(static_cast<T>(config.leaky_slope)),
      min_frames_(config.motion_min_frames),
      expected_{config.frame_channels, config.frame_height, config.frame_width} {
  ops::Conv3dGeometry g;
  g.kt = g.kh = g.kw = 3;
  g.st = 1;
  g.sh = g.sw = 2;
  g.pt = g.ph = g.pw = 1;
  int in = config.frame_channels;
  for (int out : config.motion_channels) {
    stages_.emplace_back(in, out, g, rng);
    in = out;
  }
}

template <typename T>
Var<T> MotionEncoder<T>::forward(const Var<T>& diffs) const {
  const Shape& s = diffs.shape();
  if (s.size() != 5 || s[1] != expected_[0] || s[3] != expected_[1] ||
      s[4] != expected_[2]) {
    throw ContractError("motion encoder: input " + shape_string(s) +
                        " does not match configured [B, C, T, H, W] with C,H,W = " +
                        shape_string(expected_));
  }
  if (s[2] < min_frames_) {
    throw ContractError("motion encoder: needs at least " + std::to_string(min_frames_) +
                        " difference frames, got " + std::to_string(s[2]));
  }
  Var<T> x = diffs;
  for (const auto& st : stages_) x = ops::leaky_relu(st.forward(x), slope_);
  return ops::mean(x, 2);
}

template <typename T>
void MotionEncoder<T>::collect(ParameterList<T>& out, const std::string& prefix) {
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    stages_[i].collect(out, prefix + ".conv" + std::to_string(i));
  }
}

template <typename T>
MemoryEmbedder<T>::MemoryEmbedder(const ArchitectureConfig& config, Rng& rng)
    : slope_(static_cast<T>(config.leaky_slope)),
      expected_{config.motion_out_channels(), config.motion_height(),
                config.motion_width()} {
  int in = config.motion_out_channels();
  for (int out : config.embed_channels) {
    stages_.emplace_back(in, out, kUpKernel, 2, 1, rng);
    in = out;
  }
}

template <typename T>
Var<T> MemoryEmbedder<T>::forward(const Var<T>& readout) const {
  if (readout.shape().size() != 4 ||
      Shape(readout.shape().begin() + 1, readout.shape().end()) != expected_) {
    throw ContractError("memory embedder: readout " + shape_string(readout.shape()) +
                        " does not match configured [B, " +
                        shape_string(expected_).substr(1));
  }
  ++invocations_;
  Var<T> x = readout;
  for (const auto& s : stages_) x = ops::leaky_relu(s.forward(x), slope_);
  return x;
}

template <typename T>
void MemoryEmbedder<T>::collect(ParameterList<T>& out, const std::string& prefix) {
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    stages_[i].collect(out, prefix + ".deconv" + std::to_string(i));
  }
}

template class SpatialEncoder<float>;
template class SpatialEncoder<double>;
template class MotionEncoder<float>;
template class MotionEncoder<double>;
template class MemoryEmbedder<float>;
template class MemoryEmbedder<double>;

}  // namespace lmc
