#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "p2n/errors.hpp"
#include "p2n/image.hpp"
#include "p2n/rng.hpp"

namespace p2n {

enum class NoiseKind { gaussian, poisson_gaussian };

/// Synthetic noise model. For Poisson-Gaussian the per-pixel variance is
/// `pg_a * clean + pg_b`: a scaled Poisson count plus Gaussian read noise.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::gaussian;
  double gaussian_sigma = 0.0;
  double pg_a = 0.0;
  double pg_b = 0.0;

  static NoiseSpec gaussian(double sigma) { return {NoiseKind::gaussian, sigma, 0.0, 0.0}; }
  static NoiseSpec poisson_gaussian(double a, double b) { return {NoiseKind::poisson_gaussian, 0.0, a, b}; }

  void validate() const {
    auto ok = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!ok(gaussian_sigma) || !ok(pg_a) || !ok(pg_b))
      throw ParameterError("noise parameters must be finite and non-negative");
  }
};

inline Image add_noise(const Image& clean, const NoiseSpec& spec, RngStream& rng) {
  spec.validate();
  Image out = clean;
  auto v = out.data();
  if (spec.kind == NoiseKind::gaussian) {
    if (spec.gaussian_sigma == 0.0) return out;
    for (double& x : v) x += rng.normal(0.0, spec.gaussian_sigma);
    return out;
  }
  for (double& x : v) {
    const double signal = std::max(x, 0.0);
    double shot = 0.0;
    if (spec.pg_a > 0.0) shot = spec.pg_a * static_cast<double>(rng.poisson(signal / spec.pg_a)) - signal;
    const double read = spec.pg_b > 0.0 ? rng.normal(0.0, std::sqrt(spec.pg_b)) : 0.0;
    x += shot + read;
  }
  return out;
}

struct HistogramBin {
  double center = 0.0;
  std::size_t frequency = 0;
};

struct ResidualStats {
  double mean = 0.0;
  double stddev = 0.0;
  double skewness = 0.0;
  std::vector<HistogramBin> histogram;
  std::size_t sample_count = 0;
};

inline constexpr int kHistogramBins = 65;

/// Moments and a 65-bin histogram over [-max|r|, +max|r|] of pooled
/// residuals. The centre bin straddles zero so mirrored bins pair up as
/// (b, bins-1-b). Skewness is 0 when the spread is 0.
inline ResidualStats residual_stats(std::span<const double> residuals) {
  if (residuals.empty()) throw ParameterError("residual_stats needs at least one sample");
  ResidualStats s;
  s.sample_count = residuals.size();
  const double n = static_cast<double>(residuals.size());
  double sum = 0.0, peak = 0.0;
  for (double r : residuals) {
    sum += r;
    peak = std::max(peak, std::abs(r));
  }
  s.mean = sum / n;
  double m2 = 0.0, m3 = 0.0;
  for (double r : residuals) {
    const double d = r - s.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  s.stddev = std::sqrt(m2);
  s.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;

  s.histogram.resize(kHistogramBins);
  const double width = peak > 0.0 ? 2.0 * peak / kHistogramBins : 1.0 / kHistogramBins;
  const double lo = peak > 0.0 ? -peak : -0.5;
  for (int b = 0; b < kHistogramBins; ++b) s.histogram[b].center = lo + (b + 0.5) * width;
  for (double r : residuals) {
    int b = static_cast<int>(std::floor((r - lo) / width));
    b = std::clamp(b, 0, kHistogramBins - 1);
    ++s.histogram[b].frequency;
  }
  return s;
}

/// Largest |f(b) - f(mirror b)| over the histogram, as a fraction of the
/// sample count.
inline double histogram_asymmetry(const ResidualStats& s) {
  if (s.sample_count == 0) return 0.0;
  std::size_t worst = 0;
  const std::size_t n = s.histogram.size();
  for (std::size_t b = 0; b < n / 2; ++b) {
    const auto f = s.histogram[b].frequency, g = s.histogram[n - 1 - b].frequency;
    worst = std::max(worst, f > g ? f - g : g - f);
  }
  return static_cast<double>(worst) / static_cast<double>(s.sample_count);
}

/// Pools `noisy[k] - clean` over every k and element.
inline ResidualStats residual_stats(std::span<const Image> noisy, const Image& clean) {
  if (noisy.empty()) throw ParameterError("residual_stats needs at least one noisy image");
  std::vector<double> pooled;
  pooled.reserve(noisy.size() * clean.size());
  for (const auto& y : noisy) {
    const auto r = y - clean;
    pooled.insert(pooled.end(), r.data().begin(), r.data().end());
  }
  return residual_stats(pooled);
}

/// Pools residuals over independent (noisy, clean) pairs of possibly
/// different shapes.
inline ResidualStats residual_stats(std::span<const std::pair<Image, Image>> pairs) {
  if (pairs.empty()) throw ParameterError("residual_stats needs at least one pair");
  std::vector<double> pooled;
  for (const auto& [y, x] : pairs) {
    const auto r = y - x;
    pooled.insert(pooled.end(), r.data().begin(), r.data().end());
  }
  return residual_stats(pooled);
}

/// The mirrored observation 2*clean - noisy, i.e. the same noise with its
/// sign flipped.
inline Image opposite_noisy(const Image& noisy, const Image& clean) {
  require_same_shape(noisy.shape(), clean.shape(), "opposite_noisy");
  return clean - (noisy - clean);
}

}  // namespace p2n
