#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lmc/data.hpp"
#include "lmc/model.hpp"

namespace lmc::eval {

// Reported in place of +inf for a perfect frame.
inline constexpr double kPsnrCap = 100.0;

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

double frame_mse(const data::Frame& pred, const data::Frame& truth);
double frame_squared_error(const data::Frame& pred, const data::Frame& truth);

// Per-frame mean squared pixel error.
std::vector<double> mse(const data::VideoSequence& pred, const data::VideoSequence& truth);

double psnr_from_mse(double mse);
double psnr(const data::Frame& pred, const data::Frame& truth);

// Mean local SSIM over every valid window position, averaged over channels.
double ssim(const data::Frame& pred, const data::Frame& truth, const SsimParams& params = {});

struct Aggregate {
  double mse = 0.0;
  double squared_error = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricReport {
  int horizon = 0;
  std::size_t count = 0;
  // Per predicted frame, averaged over sequences.
  std::vector<double> mse;            // per-pixel mean
  std::vector<double> squared_error;  // per-frame sum
  std::vector<double> psnr;
  std::vector<double> ssim;
  Aggregate mean;  // over all horizons
  int last = 0;    // 0 when no tail aggregate was requested
  Aggregate last_mean;
};

// Scores precomputed predictions against the matching truth sequences.
MetricReport score(const std::vector<data::VideoSequence>& predictions,
                   const std::vector<data::VideoSequence>& truths, int last = 0);

// Rolls the model out on the first `inputs` frames of every sequence and
// scores the next `horizon` frames.
MetricReport evaluate(const Model<float>& model, const std::vector<data::VideoSequence>& dataset,
                      int inputs, int horizon, int last = 0);

// Observed frames [0, inputs) of `seq` in, `horizon` predicted frames out.
data::VideoSequence predict_sequence(const Model<float>& model, const data::VideoSequence& seq,
                                     int inputs, int horizon);

nlohmann::json to_json(const MetricReport& report);

// Cosine similarity of the location-averaged addressing vectors of the
// long-term path on `long_clip` and the matching path on `short_clip`.
double addressing_similarity(const Model<float>& model, const data::VideoSequence& long_clip,
                             const data::VideoSequence& short_clip);

struct PatternClip {
  int pattern = 0;
  data::VideoSequence clip;
};

// `per_pattern` clips for each of `patterns` motion axes p * pi / patterns,
// generated from `base` with a per-pattern seed. Labels are "axis<deg>".
std::vector<PatternClip> motion_pattern_clips(const data::MovingMnistOptions& base, int patterns,
                                              int per_pattern);
std::vector<std::string> motion_pattern_labels(int patterns);

struct AlignmentReport {
  std::vector<std::string> labels;
  // similarity[i][j]: mean over pairs with a long clip of pattern i and a
  // short clip of pattern j.
  std::vector<std::vector<double>> similarity;
  std::vector<std::vector<std::size_t>> pairs;
  double same_pattern = 0.0;
  double cross_pattern = 0.0;
  std::size_t same_pairs = 0;
  std::size_t cross_pairs = 0;
};

// Every long clip against every short clip.
AlignmentReport analyze_alignment(const Model<float>& model,
                                  const std::vector<PatternClip>& long_clips,
                                  const std::vector<PatternClip>& short_clips,
                                  std::vector<std::string> labels);

nlohmann::json to_json(const AlignmentReport& report);

// Grayscale grid image (binary PGM), one row per sequence, every stride-th
// frame, 1-pixel white separators. Multi-channel frames are averaged.
void render_strip(const std::vector<data::VideoSequence>& rows, int stride,
                  const std::filesystem::path& path);

}  // namespace lmc::eval
