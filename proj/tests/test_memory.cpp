#include <doctest.h>

#include <cmath>

#include "lmc/errors.hpp"
#include "lmc/memory.hpp"
#include "lmc/training.hpp"
#include "oracles.hpp"

using lmc::Tensor;
using lmc::Var;
namespace memory = lmc::memory;

namespace {

memory::MemoryBank<double> bank_from(const std::vector<std::vector<double>>& rows) {
  memory::MemoryBank<double> bank(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  auto& v = bank.parameter().mutable_value();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) v[i * rows[i].size() + c] = rows[i][c];
  }
  return bank;
}

std::vector<std::vector<double>> random_rows(int s, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> rows(s, std::vector<double>(c));
  for (auto& r : rows)
    for (auto& x : r) x = u(rng);
  return rows;
}

}  // namespace

TEST_CASE("address and read agree with the loop oracle") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto rows = random_rows(5, 4, rng);
    const auto bank = bank_from(rows);
    std::vector<double> q(4);
    for (auto& x : q) x = u(rng);

    const auto addr = memory::address<double>(q, bank);
    const auto ref = oracle::address(q, rows);
    REQUIRE(addr.weights.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(std::abs(addr.weights[i] - ref[i]) < 1e-12);

    const auto out = memory::read(addr, bank);
    const auto ref_out = oracle::read(ref, rows);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(out[c] - ref_out[c]) < 1e-12);
  }
}

TEST_CASE("addressing is a probability vector and the readout a convex combination") {
  std::mt19937_64 rng(32);
  const auto rows = random_rows(7, 3, rng);
  const auto bank = bank_from(rows);
  const std::vector<double> q{0.3, -2.0, 0.5};
  const auto addr = memory::address<double>(q, bank);
  double total = 0.0;
  for (double w : addr.weights) {
    CHECK(w > 0.0);
    total += w;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  const auto out = memory::read(addr, bank);
  for (int c = 0; c < 3; ++c) {
    double lo = 1e9, hi = -1e9;
    for (const auto& r : rows) {
      lo = std::min(lo, r[c]);
      hi = std::max(hi, r[c]);
    }
    CHECK(out[c] >= lo);
    CHECK(out[c] <= hi);
  }
}

TEST_CASE("identical slots give uniform addressing; a zero query is safe") {
  const auto bank = bank_from({{1, 2}, {1, 2}, {1, 2}, {1, 2}});
  const auto addr = memory::address<double>(std::vector<double>{0.4, -0.1}, bank);
  for (double w : addr.weights) CHECK(w == doctest::Approx(0.25));
  const auto zero = memory::address<double>(std::vector<double>{0.0, 0.0}, bank);
  for (double w : zero.weights) CHECK(std::isfinite(w));
}

TEST_CASE("grid recall decomposes into independent location queries") {
  std::mt19937_64 rng(33);
  const int s = 5, c = 4, h = 3, w = 2;
  const auto rows = random_rows(s, c, rng);
  const auto bank = bank_from(rows);
  memory::MotionContextFeature<double> z{oracle::random_tensor({c, h, w}, rng)};
  const auto grid = memory::recall_grid(z, bank).grid;
  REQUIRE(grid.shape() == lmc::Shape{c, h, w});

  Var<double> batched(z.grid.reshaped({1, c, h, w}));
  const auto diff = memory::recall(batched, bank.parameter()).value();
  const auto weights = memory::addressing_grid(batched.value(), bank.slots());
  REQUIRE(weights.shape() == lmc::Shape{1, h * w, s});

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::vector<double> q(c);
      for (int k = 0; k < c; ++k) q[k] = z.grid[(k * h + y) * w + x];
      const auto a = oracle::address(q, rows);
      const auto r = oracle::read(a, rows);
      for (int k = 0; k < c; ++k) {
        CHECK(std::abs(grid[(k * h + y) * w + x] - r[k]) < 1e-12);
        CHECK(std::abs(diff[(k * h + y) * w + x] - r[k]) < 1e-12);
      }
      for (int i = 0; i < s; ++i) CHECK(std::abs(weights[(y * w + x) * s + i] - a[i]) < 1e-12);
    }
  }
}

TEST_CASE("recall rejects mismatched channels") {
  Var<double> z(Tensor<double>({1, 3, 2, 2}));
  Var<double> slots(Tensor<double>({5, 4}));
  CHECK_THROWS_AS(memory::recall(z, slots), lmc::ContractError);
}

TEST_CASE("random banks are seeded and bounded") {
  lmc::Rng a(8), b(8);
  const auto x = memory::MemoryBank<float>::random(10, 16, a);
  const auto y = memory::MemoryBank<float>::random(10, 16, b);
  CHECK(x.slots() == y.slots());
  for (float v : x.slots().values()) CHECK(std::abs(v) <= 0.25f);
}

TEST_CASE("a frozen bank receives no gradient") {
  std::mt19937_64 rng(34);
  memory::MemoryBank<double> bank = bank_from(random_rows(4, 3, rng));
  Var<double> z(oracle::random_tensor({1, 3, 2, 2}, rng), true);
  const auto target = oracle::random_tensor({1, 3, 2, 2}, rng);
  bank.set_trainable(false);
  const auto before = bank.slots();
  {
    const Var<double> y = memory::recall(z, bank.parameter());
    lmc::backward(lmc::frame_loss(y, target));
  }
  CHECK_FALSE(bank.parameter().has_grad());
  CHECK(z.has_grad());
  CHECK(bank.slots() == before);
}
