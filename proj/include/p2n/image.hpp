#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "p2n/errors.hpp"

namespace p2n {

struct Shape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
           static_cast<std::size_t>(channels);
  }
  std::size_t plane() const noexcept {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  friend bool operator==(const Shape&, const Shape&) = default;

  std::string str() const {
    return std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels);
  }
};

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

struct ImageTag {};
struct ResidualTag {};

/// Real-valued raster stored channel-planar (c, y, x). Values are never
/// clamped by arithmetic; see `clamped()` for the explicit export step.
template <class Tag>
class Raster {
public:
  Raster() = default;

  explicit Raster(Shape shape, double fill = 0.0) : shape_(shape) {
    if (shape.height < 1 || shape.width < 1)
      throw ShapeError("raster dimensions must be positive, got " + shape.str());
    if (shape.channels != 1 && shape.channels != 3)
      throw ShapeError("channel count must be 1 or 3, got " + std::to_string(shape.channels));
    data_.assign(shape.size(), fill);
  }

  Raster(int height, int width, int channels, double fill = 0.0)
      : Raster(Shape{height, width, channels}, fill) {}

  Raster(Shape shape, std::vector<double> data) : Raster(shape) {
    if (data.size() != shape.size())
      throw ShapeError("data length " + std::to_string(data.size()) + " does not match " + shape.str());
    data_ = std::move(data);
    validate();
  }

  const Shape& shape() const noexcept { return shape_; }
  int height() const noexcept { return shape_.height; }
  int width() const noexcept { return shape_.width; }
  int channels() const noexcept { return shape_.channels; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double& at(int c, int y, int x) noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }
  double at(int c, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_.height + y) * shape_.width + x];
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  void validate() const {
    if (!all_finite()) throw FormatError("raster contains non-finite values");
  }

  double mean() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v;
    return data_.empty() ? 0.0 : s / static_cast<double>(data_.size());
  }

  /// Population standard deviation over all elements.
  double stddev() const noexcept {
    if (data_.empty()) return 0.0;
    const double m = mean();
    double s = 0.0;
    for (double v : data_) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(data_.size()));
  }

  double l2_norm() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  Raster clamped(double lo = 0.0, double hi = 1.0) const {
    Raster out = *this;
    for (double& v : out.data_) v = std::clamp(v, lo, hi);
    return out;
  }

  Raster& operator+=(double s) noexcept {
    for (double& v : data_) v += s;
    return *this;
  }
  Raster& operator*=(double s) noexcept {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Raster&, const Raster&) = default;

private:
  Shape shape_{};
  std::vector<double> data_;
};

/// Intensities in nominal [0, 1]: clean, noisy, denoised and renoised images.
using Image = Raster<ImageTag>;
/// Signed difference between two images of one shape.
using NoiseResidual = Raster<ResidualTag>;

namespace detail {
template <class Out, class A, class B, class Op>
Out zip(const A& a, const B& b, Op op, const char* what) {
  require_same_shape(a.shape(), b.shape(), what);
  Out out(a.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = op(x[i], y[i]);
  return out;
}
}  // namespace detail

inline NoiseResidual operator-(const Image& a, const Image& b) {
  return detail::zip<NoiseResidual>(a, b, std::minus<>{}, "image difference");
}
inline Image operator+(const Image& a, const NoiseResidual& n) {
  return detail::zip<Image>(a, n, std::plus<>{}, "image + residual");
}
inline Image operator-(const Image& a, const NoiseResidual& n) {
  return detail::zip<Image>(a, n, std::minus<>{}, "image - residual");
}
inline NoiseResidual operator+(const NoiseResidual& a, const NoiseResidual& b) {
  return detail::zip<NoiseResidual>(a, b, std::plus<>{}, "residual sum");
}
inline NoiseResidual operator-(const NoiseResidual& a, const NoiseResidual& b) {
  return detail::zip<NoiseResidual>(a, b, std::minus<>{}, "residual difference");
}
inline NoiseResidual operator*(double s, NoiseResidual n) {
  n *= s;
  return n;
}
inline NoiseResidual operator*(NoiseResidual n, double s) {
  n *= s;
  return n;
}

/// Reinterprets the bytes of one raster kind as the other, e.g. to feed a
/// residual direction through an image-to-image map.
template <class To, class From>
To raster_cast(const From& from) {
  std::vector<double> v(from.data().begin(), from.data().end());
  return To(from.shape(), std::move(v));
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("max_abs_diff: length mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double mse(const Image& a, const Image& b) {
  require_same_shape(a.shape(), b.shape(), "mse");
  auto x = a.data();
  auto y = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return s / static_cast<double>(x.size());
}

/// Copies a rectangular window (all channels).
template <class Tag>
Raster<Tag> crop(const Raster<Tag>& src, int top, int left, int height, int width) {
  if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > src.height() ||
      left + width > src.width())
    throw ShapeError("crop window out of bounds");
  Raster<Tag> out(height, width, src.channels());
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out.at(c, y, x) = src.at(c, top + y, left + x);
  return out;
}

}  // namespace p2n
