#include "lmc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "lmc/errors.hpp"
#include "lmc/memory.hpp"

namespace lmc::eval {

using data::Frame;
using data::VideoSequence;

namespace {

void require_same(const Frame& a, const Frame& b, const char* what) {
  if (!a.same_shape(b) || a.pixels.size() != b.pixels.size()) {
    throw ContractError(std::string(what) + ": frame shapes differ (" +
                        std::to_string(a.height) + "x" + std::to_string(a.width) + "x" +
                        std::to_string(a.channels) + " vs " + std::to_string(b.height) + "x" +
                        std::to_string(b.width) + "x" + std::to_string(b.channels) + ")");
  }
}

std::vector<double> gaussian_kernel(int size, double sigma) {
  std::vector<double> k(static_cast<std::size_t>(size));
  const double centre = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - centre;
    k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += k[static_cast<std::size_t>(i)];
  }
  for (auto& v : k) v /= total;
  return k;
}

// Valid-region separable filtering of an H x W plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[static_cast<std::size_t>(i)] * plane[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) acc += k[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double frame_squared_error(const Frame& pred, const Frame& truth) {
  require_same(pred, truth, "mse");
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.pixels[i]) - truth.pixels[i];
    total += d * d;
  }
  return total;
}

double frame_mse(const Frame& pred, const Frame& truth) {
  const double total = frame_squared_error(pred, truth);
  return pred.size() ? total / static_cast<double>(pred.size()) : 0.0;
}

std::vector<double> mse(const VideoSequence& pred, const VideoSequence& truth) {
  if (pred.length() != truth.length()) {
    throw ContractError("mse: sequence lengths differ (" + std::to_string(pred.length()) +
                        " vs " + std::to_string(truth.length()) + ")");
  }
  std::vector<double> out;
  out.reserve(pred.length());
  for (std::size_t t = 0; t < pred.length(); ++t) out.push_back(frame_mse(pred[t], truth[t]));
  return out;
}

double psnr_from_mse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double psnr(const Frame& pred, const Frame& truth) { return psnr_from_mse(frame_mse(pred, truth)); }

double ssim(const Frame& pred, const Frame& truth, const SsimParams& p) {
  require_same(pred, truth, "ssim");
  if (pred.height < p.window || pred.width < p.window) {
    throw ContractError("ssim: frame " + std::to_string(pred.height) + "x" +
                        std::to_string(pred.width) + " is smaller than the " +
                        std::to_string(p.window) + "x" + std::to_string(p.window) + " window");
  }
  const auto k = gaussian_kernel(p.window, p.sigma);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
  const int h = pred.height, w = pred.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;

  double total = 0.0;
  for (int c = 0; c < pred.channels; ++c) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = pred.pixels[i * pred.channels + c];
      y[i] = truth.pixels[i * truth.channels + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, k), my = filter_valid(y, h, w, k);
    const auto sxx = filter_valid(xx, h, w, k), syy = filter_valid(yy, h, w, k);
    const auto sxy = filter_valid(xy, h, w, k);
    double acc = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      acc += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += acc / static_cast<double>(mx.size());
  }
  return total / pred.channels;
}

// ---------------------------------------------------------------------------

namespace {

Aggregate mean_of(const MetricReport& r, std::size_t begin) {
  Aggregate a;
  const std::size_t n = r.mse.size() - begin;
  if (n == 0) return a;
  for (std::size_t k = begin; k < r.mse.size(); ++k) {
    a.mse += r.mse[k];
    a.squared_error += r.squared_error[k];
    a.psnr += r.psnr[k];
    a.ssim += r.ssim[k];
  }
  a.mse /= n;
  a.squared_error /= n;
  a.psnr /= n;
  a.ssim /= n;
  return a;
}

}  // namespace

MetricReport score(const std::vector<VideoSequence>& predictions,
                   const std::vector<VideoSequence>& truths, int last) {
  if (predictions.size() != truths.size()) {
    throw ContractError("score: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(truths.size()) + " sequences");
  }
  if (predictions.empty()) throw ContractError("score: nothing to evaluate");
  const std::size_t horizon = predictions.front().length();
  if (last < 0 || static_cast<std::size_t>(last) > horizon) {
    throw ContractError("score: tail length " + std::to_string(last) + " outside [0, " +
                        std::to_string(horizon) + "]");
  }
  MetricReport r;
  r.horizon = static_cast<int>(horizon);
  r.count = predictions.size();
  r.mse.assign(horizon, 0.0);
  r.squared_error.assign(horizon, 0.0);
  r.psnr.assign(horizon, 0.0);
  r.ssim.assign(horizon, 0.0);
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    const auto& p = predictions[s];
    const auto& t = truths[s];
    if (p.length() != horizon || t.length() != horizon) {
      throw ContractError("score: sequence " + std::to_string(s) + " does not have " +
                          std::to_string(horizon) + " frames");
    }
    for (std::size_t k = 0; k < horizon; ++k) {
      const double se = frame_squared_error(p[k], t[k]);
      const double m = se / static_cast<double>(p[k].size());
      r.squared_error[k] += se;
      r.mse[k] += m;
      r.psnr[k] += psnr_from_mse(m);
      r.ssim[k] += ssim(p[k], t[k]);
    }
  }
  const double n = static_cast<double>(r.count);
  for (std::size_t k = 0; k < horizon; ++k) {
    r.mse[k] /= n;
    r.squared_error[k] /= n;
    r.psnr[k] /= n;
    r.ssim[k] /= n;
  }
  r.mean = mean_of(r, 0);
  r.last = last;
  if (last > 0) r.last_mean = mean_of(r, horizon - static_cast<std::size_t>(last));
  return r;
}

data::VideoSequence predict_sequence(const Model<float>& model, const VideoSequence& seq,
                                     int inputs, int horizon) {
  if (inputs < 2 || static_cast<std::size_t>(inputs) > seq.length()) {
    throw ContractError("predict: need between 2 and " + std::to_string(seq.length()) +
                        " observed frames, got " + std::to_string(inputs));
  }
  NoGradGuard guard;
  const VideoSequence observed = seq.slice(0, static_cast<std::size_t>(inputs));
  const std::vector<const VideoSequence*> batch{&observed};
  const auto outputs = model.predict(stack_sequences<float>(batch),
                                     model.query_mode() == QueryMode::none
                                         ? Var<float>()
                                         : stack_differences<float>(batch),
                                     horizon);
  VideoSequence out;
  for (const auto& o : outputs) out.frames.push_back(to_frame(o.value(), 0));
  return out;
}

MetricReport evaluate(const Model<float>& model, const std::vector<VideoSequence>& dataset,
                      int inputs, int horizon, int last) {
  std::vector<VideoSequence> predictions, truths;
  for (const auto& seq : dataset) {
    if (seq.length() < static_cast<std::size_t>(inputs + horizon)) {
      throw ContractError("evaluate: sequences need " + std::to_string(inputs + horizon) +
                          " frames, got " + std::to_string(seq.length()));
    }
    predictions.push_back(predict_sequence(model, seq, inputs, horizon));
    truths.push_back(seq.slice(static_cast<std::size_t>(inputs), static_cast<std::size_t>(horizon)));
  }
  return score(predictions, truths, last);
}

nlohmann::json to_json(const MetricReport& r) {
  auto agg = [](const Aggregate& a) {
    return nlohmann::json{{"mse", a.mse},
                          {"squared_error", a.squared_error},
                          {"psnr", a.psnr},
                          {"ssim", a.ssim}};
  };
  nlohmann::json j{{"horizon", r.horizon},
                   {"count", r.count},
                   {"mse", r.mse},
                   {"squared_error", r.squared_error},
                   {"psnr", r.psnr},
                   {"ssim", r.ssim},
                   {"mean", agg(r.mean)}};
  if (r.last > 0) j["last"] = {{"frames", r.last}, {"mean", agg(r.last_mean)}};
  return j;
}

// ---------------------------------------------------------------------------

namespace {

// Location-averaged addressing vector of one clip.
std::vector<double> mean_addressing(const Model<float>& model, const VideoSequence& clip,
                                    memory::MotionRole role) {
  NoGradGuard guard;
  const std::vector<const VideoSequence*> batch{&clip};
  const Var<float> z = model.encode_motion(stack_differences<float>(batch), role);
  const Tensor<float> a = model.addressing(z.value());  // [1, L, s]
  const int locations = a.dim(1), slots = a.dim(2);
  std::vector<double> mean(static_cast<std::size_t>(slots), 0.0);
  for (int l = 0; l < locations; ++l) {
    for (int s = 0; s < slots; ++s) {
      mean[static_cast<std::size_t>(s)] += a[static_cast<std::size_t>(l) * slots + s];
    }
  }
  for (auto& v : mean) v /= locations;
  return mean;
}

double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  return memory::cosine_similarity<double>(u, v);
}

}  // namespace

double addressing_similarity(const Model<float>& model, const VideoSequence& long_clip,
                             const VideoSequence& short_clip) {
  return cosine(mean_addressing(model, long_clip, memory::MotionRole::long_term),
                mean_addressing(model, short_clip, memory::MotionRole::matching));
}

std::vector<PatternClip> motion_pattern_clips(const data::MovingMnistOptions& base, int patterns,
                                              int per_pattern) {
  if (patterns < 1 || per_pattern < 1) {
    throw ContractError("motion patterns need at least one pattern and one clip each");
  }
  std::vector<PatternClip> out;
  for (int p = 0; p < patterns; ++p) {
    data::MovingMnistOptions o = base;
    o.count = per_pattern;
    o.direction = std::acos(-1.0) * p / patterns;
    o.seed = base.seed + static_cast<std::uint64_t>(p) * 0x100000001b3ULL;
    for (auto& seq : data::generate_moving_mnist(o)) out.push_back({p, std::move(seq)});
  }
  return out;
}

std::vector<std::string> motion_pattern_labels(int patterns) {
  std::vector<std::string> labels;
  for (int p = 0; p < patterns; ++p) {
    labels.push_back("axis" + std::to_string(static_cast<int>(std::lround(180.0 * p / patterns))));
  }
  return labels;
}

AlignmentReport analyze_alignment(const Model<float>& model,
                                  const std::vector<PatternClip>& long_clips,
                                  const std::vector<PatternClip>& short_clips,
                                  std::vector<std::string> labels) {
  const int patterns = static_cast<int>(labels.size());
  auto check = [&](const std::vector<PatternClip>& clips) {
    for (const auto& c : clips) {
      if (c.pattern < 0 || c.pattern >= patterns) {
        throw ContractError("alignment: clip pattern " + std::to_string(c.pattern) +
                            " has no label");
      }
    }
  };
  check(long_clips);
  check(short_clips);
  if (long_clips.empty() || short_clips.empty()) {
    throw ContractError("alignment: needs at least one long and one short clip");
  }

  std::vector<std::vector<double>> long_vecs, short_vecs;
  for (const auto& c : long_clips) {
    long_vecs.push_back(mean_addressing(model, c.clip, memory::MotionRole::long_term));
  }
  for (const auto& c : short_clips) {
    short_vecs.push_back(mean_addressing(model, c.clip, memory::MotionRole::matching));
  }

  AlignmentReport r;
  r.labels = std::move(labels);
  const auto np = static_cast<std::size_t>(patterns);
  r.similarity.assign(np, std::vector<double>(np, 0.0));
  r.pairs.assign(np, std::vector<std::size_t>(np, 0));
  double same = 0.0, cross = 0.0;
  for (std::size_t i = 0; i < long_clips.size(); ++i) {
    for (std::size_t j = 0; j < short_clips.size(); ++j) {
      const double s = cosine(long_vecs[i], short_vecs[j]);
      const auto pi = static_cast<std::size_t>(long_clips[i].pattern);
      const auto pj = static_cast<std::size_t>(short_clips[j].pattern);
      r.similarity[pi][pj] += s;
      ++r.pairs[pi][pj];
      if (pi == pj) {
        same += s;
        ++r.same_pairs;
      } else {
        cross += s;
        ++r.cross_pairs;
      }
    }
  }
  for (std::size_t i = 0; i < np; ++i) {
    for (std::size_t j = 0; j < np; ++j) {
      if (r.pairs[i][j]) r.similarity[i][j] /= static_cast<double>(r.pairs[i][j]);
    }
  }
  if (r.same_pairs) r.same_pattern = same / static_cast<double>(r.same_pairs);
  if (r.cross_pairs) r.cross_pattern = cross / static_cast<double>(r.cross_pairs);
  return r;
}

nlohmann::json to_json(const AlignmentReport& r) {
  return nlohmann::json{{"labels", r.labels},
                        {"similarity", r.similarity},
                        {"pairs", r.pairs},
                        {"same_pattern", r.same_pattern},
                        {"cross_pattern", r.cross_pattern},
                        {"same_pairs", r.same_pairs},
                        {"cross_pairs", r.cross_pairs}};
}

// ---------------------------------------------------------------------------

void render_strip(const std::vector<VideoSequence>& rows, int stride,
                  const std::filesystem::path& path) {
  if (rows.empty()) throw ContractError("render_strip: no rows");
  if (stride < 1) throw ContractError("render_strip: stride must be >= 1");
  const Frame* shape = nullptr;
  std::size_t cols = 0;
  for (const auto& row : rows) {
    for (const auto& f : row.frames) {
      if (!shape) shape = &f;
      if (!f.same_shape(*shape)) throw ContractError("render_strip: frame sizes differ");
    }
    cols = std::max(cols, (row.length() + static_cast<std::size_t>(stride) - 1) /
                              static_cast<std::size_t>(stride));
  }
  if (!shape) throw ContractError("render_strip: rows hold no frames");

  const int th = shape->height, tw = shape->width, ch = shape->channels;
  const std::size_t width = cols * static_cast<std::size_t>(tw) + (cols - 1);
  const std::size_t height = rows.size() * static_cast<std::size_t>(th) + (rows.size() - 1);
  std::vector<unsigned char> image(width * height, 255);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t t = c * static_cast<std::size_t>(stride);
      const std::size_t oy = r * static_cast<std::size_t>(th + 1);
      const std::size_t ox = c * static_cast<std::size_t>(tw + 1);
      for (int y = 0; y < th; ++y) {
        for (int x = 0; x < tw; ++x) {
          double v = 0.0;
          if (t < rows[r].length()) {
            for (int k = 0; k < ch; ++k) v += rows[r][t].at(y, x, k);
            v /= ch;
          }
          image[(oy + static_cast<std::size_t>(y)) * width + ox + static_cast<std::size_t>(x)] =
              static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }
      }
    }
  }

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.data()), static_cast<std::streamsize>(image.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace lmc::eval
