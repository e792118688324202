#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "p2n/image.hpp"
#include "p2n/rng.hpp"

namespace p2n {

/// Procedural piecewise-smooth test scene: a shaded background, overlapping
/// ellipses and rectangles with their own gradients, an occasional stripe
/// texture, then a light 3x3 blur. Values stay inside [0.05, 0.95].
inline Image synthetic_scene(int height, int width, int channels, RngStream rng) {
  Image img(height, width, channels);
  const double pi = std::numbers::pi;
  auto tint = [&](double base) {
    std::array<double, 3> t{};
    for (int c = 0; c < 3; ++c) t[c] = channels == 3 ? std::clamp(base + rng.uniform(-0.15, 0.15), 0.0, 1.0) : base;
    return t;
  };

  const double bg0 = rng.uniform(0.25, 0.75);
  const double bg_slope = rng.uniform(-0.3, 0.3);
  const double bg_angle = rng.uniform(0.0, 2 * pi);
  const auto bg_tint = tint(bg0);
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double u = (std::cos(bg_angle) * x / width + std::sin(bg_angle) * y / height) - 0.5;
        img.at(c, y, x) = bg_tint[c] + bg_slope * u;
      }

  const int shapes = static_cast<int>(rng.uniform_int(6, 12));
  for (int s = 0; s < shapes; ++s) {
    const bool ellipse = rng.uniform() < 0.5;
    const double cx = rng.uniform(0, width), cy = rng.uniform(0, height);
    const double rx = rng.uniform(0.05, 0.3) * width, ry = rng.uniform(0.05, 0.3) * height;
    const double rot = rng.uniform(0.0, pi);
    const auto level = tint(rng.uniform(0.1, 0.9));
    const double shade = rng.uniform(-0.2, 0.2);
    const bool striped = rng.uniform() < 0.2;
    const double freq = rng.uniform(0.15, 0.5), amp = rng.uniform(0.05, 0.15);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = (std::cos(rot) * dx + std::sin(rot) * dy) / rx;
        const double v = (-std::sin(rot) * dx + std::cos(rot) * dy) / ry;
        const bool inside = ellipse ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
        if (!inside) continue;
        double val = shade * u;
        if (striped) val += amp * std::sin(freq * (std::cos(rot) * dx + std::sin(rot) * dy));
        for (int c = 0; c < channels; ++c) img.at(c, y, x) = level[c] + val;
      }
  }

  Image out(img.shape());
  for (int c = 0; c < channels; ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        double sum = 0.0, wsum = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = std::clamp(y + dy, 0, height - 1), xx = std::clamp(x + dx, 0, width - 1);
            const double w = (dx == 0 ? 2.0 : 1.0) * (dy == 0 ? 2.0 : 1.0);
            sum += w * img.at(c, yy, xx);
            wsum += w;
          }
        out.at(c, y, x) = std::clamp(sum / wsum, 0.05, 0.95);
      }
  return out;
}

}  // namespace p2n
