#include <doctest.h>

#include "fixtures.hpp"
#include "lmc/model.hpp"
#include "lmc/training.hpp"
#include "oracles.hpp"

using lmc::Tensor;
using lmc::Var;
namespace ops = lmc::ops;

namespace {

Var<double> leaf(lmc::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  return Var<double>(oracle::random_tensor(std::move(shape), rng, lo, hi), true);
}

std::vector<Var<double>> parameter_leaves(lmc::ParameterList<double> params) {
  std::vector<Var<double>> out;
  for (const auto& np : params) out.push_back(np.param->var());
  return out;
}

}  // namespace

TEST_CASE("recall gradients match finite differences") {
  std::mt19937_64 rng(21);
  auto z = leaf({2, 4, 2, 3}, rng);
  auto slots = leaf({5, 4}, rng);
  auto target = oracle::random_tensor({2, 4, 2, 3}, rng);
  auto loss = [&]() { return lmc::frame_loss(lmc::memory::recall(z, slots), target); };
  const auto r = oracle::check_gradients(loss, {z, slots});
  CHECK(r.nonzero > 0);
  CHECK(r.max_relative < 1e-4);
}

TEST_CASE("convlstm step gradients match finite differences") {
  std::mt19937_64 rng(22);
  lmc::Rng init(3);
  lmc::ConvLstmCell<double> cell(3, 4, 3, init);
  auto x = leaf({2, 3, 4, 4}, rng);
  auto h = leaf({2, 4, 4, 4}, rng);
  auto c = leaf({2, 4, 4, 4}, rng);
  auto target = oracle::random_tensor({2, 4, 4, 4}, rng, 0.0, 1.0);
  auto loss = [&]() {
    const auto next = cell.step(x, {h, c});
    return ops::add(lmc::frame_loss(next.hidden, target), lmc::frame_loss(next.cell, target));
  };
  std::vector<Var<double>> leaves{x, h, c};
  lmc::ParameterList<double> params;
  cell.collect(params, "cell");
  for (auto& v : parameter_leaves(params)) leaves.push_back(v);
  const auto r = oracle::check_gradients(loss, leaves);
  CHECK(r.nonzero > 0);
  CHECK(r.max_relative < 1e-4);
}

TEST_CASE("full single-step rollout loss gradients match finite differences") {
  for (auto mode : {lmc::QueryMode::local, lmc::QueryMode::global, lmc::QueryMode::none}) {
    CAPTURE(lmc::to_string(mode));
    lmc::Model<double> model(fixture::miniature(), 5, mode, 9);
    std::mt19937_64 rng(23);
    std::vector<Var<double>> inputs;
    for (int t = 0; t < 3; ++t) inputs.push_back(Var<double>(oracle::random_tensor({2, 1, 8, 8}, rng, 0, 1)));
    Var<double> diffs(oracle::random_tensor({2, 1, 3, 8, 8}, rng));
    auto predict = [&]() {
      Var<double> readout;
      if (mode != lmc::QueryMode::none) {
        readout = model.recall(model.encode_motion(diffs, lmc::memory::MotionRole::long_term));
      }
      return model.predictor().rollout(inputs, readout, 1)[0];
    };
    // Residuals of 0.02..0.05 keep the loss, and with it the roundoff in the
    // differences, small while every pixel still carries an L1 gradient.
    Tensor<double> target;
    {
      lmc::NoGradGuard guard;
      target = predict().value();
      std::uniform_real_distribution<double> mag(0.02, 0.05);
      for (auto& v : target.values()) v += (rng() & 1) ? mag(rng) : -mag(rng);
    }
    auto loss = [&]() { return lmc::frame_loss(predict(), target); };
    const auto r = oracle::check_gradients(loss, parameter_leaves(model.storing_parameters()));
    CHECK(r.nonzero > 0);
    // Some recurrent weights have gradients near 1e-7, where single entries
    // are dominated by roundoff; compare each parameter tensor as a whole.
    CHECK(r.max_leaf_relative < 1e-4);
  }
}

TEST_CASE("encoder and predictor shapes follow the configuration") {
  std::mt19937_64 pick(61);
  auto one_of = [&](std::vector<int> xs) { return xs[pick() % xs.size()]; };
  int tried = 0;
  while (tried < 12) {
    lmc::ArchitectureConfig a;
    a.frame_height = a.frame_width = one_of({8, 16});
    a.spatial_channels.assign(one_of({1, 2}), one_of({2, 3}));
    a.motion_channels.assign(one_of({1, 2, 3}), one_of({2, 4}));
    a.motion_min_frames = 2;
    a.embed_channels = {one_of({2, 3})};
    a.recurrent_layers = one_of({1, 2});
    a.recurrent_channels = one_of({2, 4});
    a.attention_hidden = one_of({2, 5});
    a.decoder_channels.assign(one_of({0, 1}), 3);
    try {
      a.validate();
    } catch (const lmc::ConfigError&) {
      continue;
    }
    ++tried;
    CAPTURE(a.canonical());
    lmc::Model<double> model(a, 4, lmc::QueryMode::local, pick());
    std::mt19937_64 rng(pick());
    const int b = 2, hw = a.frame_height;
    Var<double> frame(oracle::random_tensor({b, 1, hw, hw}, rng, 0, 1));
    Var<double> diffs(oracle::random_tensor({b, 1, 3, hw, hw}, rng));

    const auto s = model.predictor().spatial().forward(frame).value();
    CHECK(s.shape() == lmc::Shape{b, a.spatial_out_channels(), a.spatial_height(), a.spatial_width()});
    const auto z = model.encode_motion(diffs, lmc::memory::MotionRole::matching);
    CHECK(z.value().shape() ==
          lmc::Shape{b, a.motion_out_channels(), a.motion_height(), a.motion_width()});
    const auto readout = model.recall(z);
    CHECK(readout.value().shape() == z.value().shape());
    const auto embedded = model.predictor().embedder().forward(readout).value();
    CHECK(embedded.shape() ==
          lmc::Shape{b, a.embed_out_channels(), a.spatial_height(), a.spatial_width()});

    const auto out = model.predict({frame, frame, frame}, diffs, 3);
    REQUIRE(out.size() == 3);
    for (const auto& f : out) CHECK(f.value().shape() == lmc::Shape{b, 1, hw, hw});
  }
}

TEST_CASE("channel attention lies in (0, 1) and is one half with zero weights") {
  lmc::Model<double> model(fixture::miniature(), 5, lmc::QueryMode::local, 4);
  auto& attention = model.predictor().attention();
  std::mt19937_64 rng(62);
  const auto cell = Var<double>(oracle::random_tensor({3, 4, 4, 4}, rng, -3, 3));
  const auto embedded = Var<double>(oracle::random_tensor({3, 4, 4, 4}, rng, -3, 3));
  const auto w = attention.forward(cell, embedded).value();
  CHECK(w.shape() == lmc::Shape{3, 4});
  for (double v : w.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  attention.output_layer().weight.var().mutable_value().fill(0.0);
  attention.output_layer().bias.var().mutable_value().fill(0.0);
  const auto half = attention.forward(cell, embedded).value();
  for (double v : half.values()) CHECK(v == 0.5);

  const auto refined = lmc::refine_memory(attention.forward(cell, embedded), embedded).value();
  for (std::size_t i = 0; i < refined.size(); ++i) CHECK(refined[i] == 0.5 * embedded.value()[i]);
}

TEST_CASE("decoded frames stay in [0, 1] for extreme features") {
  lmc::Model<double> model(fixture::miniature(), 5, lmc::QueryMode::local, 6);
  std::mt19937_64 rng(63);
  const auto h = Var<double>(oracle::random_tensor({2, 4, 4, 4}, rng, -50, 50));
  const auto f = Var<double>(oracle::random_tensor({2, 4, 4, 4}, rng, -50, 50));
  const auto frame = model.predictor().decoder().forward(h, f).value();
  CHECK(frame.shape() == lmc::Shape{2, 1, 8, 8});
  for (double v : frame.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("memory is embedded once per rollout, not once per frame") {
  lmc::Model<double> model(fixture::miniature(), 5, lmc::QueryMode::local, 7);
  std::mt19937_64 rng(64);
  std::vector<Var<double>> inputs;
  for (int t = 0; t < 3; ++t) inputs.push_back(Var<double>(oracle::random_tensor({1, 1, 8, 8}, rng, 0, 1)));
  Var<double> diffs(oracle::random_tensor({1, 1, 3, 8, 8}, rng));
  const auto before = model.predictor().embedder().invocations();
  const auto out = model.predict(inputs, diffs, 6);
  CHECK(out.size() == 6);
  CHECK(model.predictor().embedder().invocations() == before + 1);
  const auto readout = model.recall(model.encode_motion(diffs, lmc::memory::MotionRole::matching));
  model.predictor().rollout(inputs, readout, 2);
  CHECK(model.predictor().embedder().invocations() == before + 2);
  // Without memory the embedder is never reached.
  model.predictor().rollout(inputs, Var<double>(), 4);
  CHECK(model.predictor().embedder().invocations() == before + 2);
}
