#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "lmc/data.hpp"
#include "lmc/errors.hpp"

namespace data = lmc::data;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "lmc-unit";
  std::filesystem::create_directories(dir);
  return dir / name;
}

data::Glyph solid(int size) {
  data::Glyph g;
  g.size = size;
  g.pixels.assign(static_cast<std::size_t>(size) * size, 1.0f);
  return g;
}

}  // namespace

TEST_CASE("generated frames stay in range and keep every digit on the canvas") {
  data::MovingMnistOptions o;
  o.seed = 3;
  o.count = 8;
  o.length = 40;
  o.canvas = 40;
  o.glyph_size = 12;
  o.speed_min = 3;
  o.speed_max = 5;
  // Solid glyphs make the lit area equal the union of digit boxes.
  const auto sequences = data::generate_moving_mnist(o, [](lmc::Rng&) { return solid(12); });
  REQUIRE(sequences.size() == 8);
  for (const auto& seq : sequences) {
    REQUIRE(seq.length() == 40);
    for (const auto& f : seq.frames) {
      CHECK(f.height == 40);
      CHECK(f.channels == 1);
      int lit = 0;
      for (float v : f.pixels) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
        lit += v > 0.5f;
      }
      // Two 12x12 boxes, possibly overlapping, none clipped by the border.
      CHECK(lit >= 144);
      CHECK(lit <= 288);
    }
  }
}

TEST_CASE("reflection keeps speed and position bounds") {
  lmc::Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    data::DigitMotionState st;
    st.glyph = solid(10);
    const double hi = 32 - 10;
    st.position = {lmc::uniform_real(rng, 0, hi), lmc::uniform_real(rng, 0, hi)};
    const double theta = lmc::uniform_real(rng, 0, 6.283185307179586);
    const double speed = lmc::uniform_real(rng, 0.5, 9.0);
    st.velocity = {speed * std::cos(theta), speed * std::sin(theta)};
    for (int t = 0; t < 50; ++t) {
      st = data::step_digit(st, 32);
      CHECK(st.position[0] >= 0.0);
      CHECK(st.position[0] <= hi);
      CHECK(st.position[1] >= 0.0);
      CHECK(st.position[1] <= hi);
      CHECK(std::hypot(st.velocity[0], st.velocity[1]) == doctest::Approx(speed).epsilon(1e-12));
    }
  }
}

TEST_CASE("a digit heading into a wall comes back with mirrored velocity") {
  data::DigitMotionState st;
  st.glyph = solid(4);
  st.position = {14.0, 5.0};
  st.velocity = {3.0, -1.0};
  st = data::step_digit(st, 20);  // x: 14 + 3 = 17 > 16, reflected to 15
  CHECK(st.position[0] == doctest::Approx(15.0));
  CHECK(st.velocity[0] == doctest::Approx(-3.0));
  CHECK(st.position[1] == doctest::Approx(4.0));
  CHECK(st.velocity[1] == doctest::Approx(-1.0));
}

TEST_CASE("generator is deterministic in its seed") {
  data::MovingMnistOptions o;
  o.seed = 11;
  o.count = 3;
  o.length = 6;
  o.canvas = 32;
  o.glyph_size = 14;
  CHECK(data::generate_moving_mnist(o) == data::generate_moving_mnist(o));
  auto other = o;
  other.seed = 12;
  CHECK_FALSE(data::generate_moving_mnist(o) == data::generate_moving_mnist(other));
}

TEST_CASE("generator options are validated by field") {
  data::MovingMnistOptions o;
  o.canvas = 20;
  o.glyph_size = 28;
  try {
    data::validate(o);
    FAIL("expected a ConfigError");
  } catch (const lmc::ConfigError& e) {
    CHECK(e.field() == "canvas");
  }
  o = {};
  o.speed_max = 1.0;
  CHECK_THROWS_AS(data::validate(o), lmc::ConfigError);
}

TEST_CASE("offset r is uniform over 0..n") {
  data::VideoSequence seq;
  seq.frames.assign(50, data::Frame(2, 2, 1));
  lmc::Rng rng(17);
  const int n = 10, draws = 10000;
  std::vector<int> hist(n + 1, 0);
  for (int i = 0; i < draws; ++i) ++hist[data::sample_training_pair(seq, n, 30, 30, rng).offset_r];
  for (int k = 0; k <= n; ++k) {
    CAPTURE(k);
    CHECK(std::abs(hist[k] / static_cast<double>(draws) - 1.0 / (n + 1)) <= 0.02);
  }
}

TEST_CASE("training pair slices line up") {
  data::VideoSequence seq;
  for (int t = 0; t < 40; ++t) seq.frames.emplace_back(1, 1, 1, static_cast<float>(t));
  const auto pair = data::slice_training_pair(seq, 10, 30, 20, 4, 3);
  CHECK(pair.short_input.length() == 10);
  CHECK(pair.short_input[0].pixels[0] == 3.0f);
  CHECK(pair.short_input[9].pixels[0] == 12.0f);
  CHECK(pair.long_input.length() == 30);
  CHECK(pair.long_input[0].pixels[0] == 7.0f);
  CHECK(pair.target.length() == 20);
  CHECK(pair.target[0].pixels[0] == 13.0f);
  CHECK_THROWS_AS(data::slice_training_pair(seq, 10, 30, 20, 11), lmc::ContractError);

  data::VideoSequence shorter;
  shorter.frames.assign(data::required_pair_length(10, 30, 20) - 1, data::Frame(1, 1, 1));
  lmc::Rng rng(1);
  CHECK_THROWS_AS(data::sample_training_pair(shorter, 10, 30, 20, rng), lmc::SamplingError);
  shorter.frames.emplace_back(1, 1, 1);
  for (int i = 0; i < 200; ++i) {
    const auto p = data::sample_training_pair(shorter, 10, 30, 20, rng);
    CHECK(p.long_input.length() == 30);
    CHECK(p.target.length() == 20);
  }
}

TEST_CASE("difference frames reconstruct the sequence") {
  data::MovingMnistOptions o;
  o.seed = 2;
  o.length = 8;
  o.canvas = 32;
  o.glyph_size = 14;
  const auto seq = data::generate_moving_mnist(o).front();
  const auto diffs = data::difference_frames(seq);
  REQUIRE(diffs.length() == 7);
  data::Frame acc = seq[0];
  for (std::size_t t = 0; t < diffs.length(); ++t) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc.pixels[i] += diffs[t].pixels[i];
    for (std::size_t i = 0; i < acc.size(); ++i) {
      CHECK(acc.pixels[i] == doctest::Approx(seq[t + 1].pixels[i]).epsilon(1e-6));
    }
  }
  data::VideoSequence one;
  one.frames.push_back(seq[0]);
  CHECK_THROWS_AS(data::difference_frames(one), lmc::ContractError);
}

TEST_CASE("dataset files round-trip and reject damage") {
  data::MovingMnistOptions o;
  o.seed = 4;
  o.count = 3;
  o.length = 5;
  o.canvas = 32;
  o.glyph_size = 14;
  const auto sequences = data::generate_moving_mnist(o);
  const auto path = scratch("roundtrip.lmcd");
  data::save_dataset(path, sequences);
  CHECK(data::load_dataset(path) == sequences);

  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 3);
  CHECK_THROWS_AS(data::load_dataset(path), lmc::FormatError);

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "JUNKJUNKJUNKJUNKJUNKJUNK";
  }
  CHECK_THROWS_AS(data::load_dataset(path), lmc::FormatError);
  CHECK_THROWS_AS(data::load_dataset(scratch("missing.lmcd")), lmc::IoError);
}
