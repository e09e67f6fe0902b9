// Bundled digit strokes. Each digit is a set of polylines in a unit box
// (x right, y down); arcs are flattened at construction.

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lmc/data.hpp"
#include "lmc/errors.hpp"

namespace lmc::data {

namespace {

struct Point {
  double x, y;
};
using Polyline = std::vector<Point>;

// Elliptical arc from angle a0 to a1 (degrees, counter-clockwise on screen).
Polyline arc(double cx, double cy, double rx, double ry, double a0, double a1) {
  constexpr int kSteps = 24;
  Polyline pts;
  for (int i = 0; i <= kSteps; ++i) {
    const double a = (a0 + (a1 - a0) * i / kSteps) * std::numbers::pi / 180.0;
    pts.push_back({cx + rx * std::cos(a), cy - ry * std::sin(a)});
  }
  return pts;
}

Polyline line(Point a, Point b) { return {a, b}; }

std::vector<Polyline> strokes(int digit) {
  switch (digit) {
    case 0:
      return {arc(0.5, 0.5, 0.24, 0.38, 0, 360)};
    case 1:
      return {line({0.52, 0.12}, {0.52, 0.9}), line({0.36, 0.26}, {0.52, 0.12})};
    case 2: {
      Polyline top = arc(0.5, 0.32, 0.22, 0.2, 160, -40);
      top.push_back({0.27, 0.88});
      top.push_back({0.76, 0.88});
      return {top};
    }
    case 3:
      return {arc(0.5, 0.3, 0.2, 0.18, 150, -90),
              arc(0.5, 0.68, 0.23, 0.2, 90, -150)};
    case 4:
      return {line({0.64, 0.9}, {0.64, 0.1}),
              Polyline{{0.64, 0.1}, {0.24, 0.64}, {0.8, 0.64}}};
    case 5: {
      Polyline p{{0.74, 0.12}, {0.34, 0.12}, {0.31, 0.46}};
      Polyline bowl = arc(0.5, 0.66, 0.24, 0.22, 140, -150);
      return {p, bowl};
    }
    case 6:
      return {arc(0.5, 0.68, 0.22, 0.21, 0, 360),
              Polyline{{0.7, 0.12}, {0.45, 0.3}, {0.29, 0.64}}};
    case 7:
      return {Polyline{{0.24, 0.12}, {0.76, 0.12}, {0.42, 0.9}}};
    case 8:
      return {arc(0.5, 0.3, 0.18, 0.18, 0, 360), arc(0.5, 0.69, 0.22, 0.21, 0, 360)};
    case 9:
      return {arc(0.5, 0.32, 0.21, 0.2, 0, 360), line({0.71, 0.34}, {0.6, 0.9})};
    default:
      throw ContractError("render_digit: digit must be in 0..9, got " +
                          std::to_string(digit));
  }
}

double segment_distance(Point p, Point a, Point b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

Glyph render_digit(int digit, int size, Rng& rng) {
  if (size < 1) throw ContractError("render_digit: size must be positive");
  auto lines = strokes(digit);

  const double slant = uniform_real(rng, -0.18, 0.18);
  const double half_width = uniform_real(rng, 0.045, 0.07);
  const double scale = uniform_real(rng, 0.78, 0.95);
  for (auto& pl : lines) {
    for (auto& p : pl) {
      const double x = 0.5 + (p.x - 0.5) * scale - slant * (p.y - 0.5);
      const double y = 0.5 + (p.y - 0.5) * scale;
      p = {x, y};
    }
  }

  Glyph g{size, std::vector<float>(static_cast<std::size_t>(size) * size, 0.0f)};
  const double aa = 1.0 / size;  // one-pixel antialiasing ramp
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Point p{(x + 0.5) / size, (y + 0.5) / size};
      double d = 1e9;
      for (const auto& pl : lines) {
        for (std::size_t i = 1; i < pl.size(); ++i) {
          d = std::min(d, segment_distance(p, pl[i - 1], pl[i]));
        }
      }
      const double v = std::clamp(1.0 - (d - half_width) / aa, 0.0, 1.0);
      g.pixels[static_cast<std::size_t>(y) * size + x] = static_cast<float>(v);
    }
  }
  return g;
}

Glyph sample_glyph(int size, Rng& rng) {
  return render_digit(uniform_int(rng, 0, 9), size, rng);
}

}  // namespace lmc::data
