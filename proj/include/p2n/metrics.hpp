#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "p2n/errors.hpp"
#include "p2n/image.hpp"

namespace p2n {

inline constexpr double kPsnrCap = 99.0;

/// 10 log10(peak^2 / MSE), capped at 99 dB (which also covers MSE == 0).
inline double psnr(const Image& a, const Image& b, double peak = 1.0) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  if (!(peak > 0.0)) throw ParameterError("psnr peak must be > 0");
  const double m = mse(a, b);
  if (m < peak * peak * std::pow(10.0, -kPsnrCap / 10.0)) return kPsnrCap;
  return 10.0 * std::log10(peak * peak / m);
}

namespace detail {

inline std::vector<double> gaussian_window_1d(int size, double sigma) {
  std::vector<double> w(size);
  const int r = size / 2;
  double s = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    s += w[i];
  }
  for (auto& v : w) v /= s;
  return w;
}

// Separable "valid" filtering of one plane.
inline std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1, ow = w - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * src[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace detail

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// K1 = 0.01, K2 = 0.03 and dynamic range 1. Local statistics are computed
/// over every fully contained window and averaged; colour images average
/// the per-channel maps.
inline double ssim(const Image& a, const Image& b) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  constexpr int kWin = 11;
  if (a.height() < kWin || a.width() < kWin) throw ShapeError("ssim needs images of at least 11x11");
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto k = detail::gaussian_window_1d(kWin, 1.5);
  const int h = a.height(), w = a.width();
  const std::size_t plane = a.shape().plane();
  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> x(a.data().begin() + c * plane, a.data().begin() + (c + 1) * plane);
    std::vector<double> y(b.data().begin() + c * plane, b.data().begin() + (c + 1) * plane);
    std::vector<double> xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = detail::filter_valid(x, h, w, k);
    const auto my = detail::filter_valid(y, h, w, k);
    const auto sxx = detail::filter_valid(xx, h, w, k);
    const auto syy = detail::filter_valid(yy, h, w, k);
    const auto sxy = detail::filter_valid(xy, h, w, k);
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
               ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace p2n
