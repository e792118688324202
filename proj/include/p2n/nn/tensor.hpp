#pragma once

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "p2n/errors.hpp"

namespace p2n::nn {

/// Storage for anything that reaches Eigen. Eigen peels vectorised loops
/// according to address alignment, so a fixed alignment is what keeps
/// float results identical from run to run.
template <class S>
using Buffer = std::vector<S, Eigen::aligned_allocator<S>>;

/// Dense NCHW activation tensor.
template <class S>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  Buffer<S> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_), data(count(), S(0)) {}

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(n) * c * h * w;
  }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const noexcept { return static_cast<std::size_t>(c) * plane(); }

  S* sample(int i) noexcept { return data.data() + i * sample_size(); }
  const S* sample(int i) const noexcept { return data.data() + i * sample_size(); }

  S& at(int i, int ch, int y, int x) noexcept {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }
  S at(int i, int ch, int y, int x) const noexcept {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }

  bool same_shape(const Tensor& o) const noexcept { return n == o.n && c == o.c && h == o.h && w == o.w; }
};

template <class S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using MatMap = Eigen::Map<RowMat<S>>;
template <class S>
using ConstMatMap = Eigen::Map<const RowMat<S>>;
template <class S>
using VecMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>;

namespace detail {

template <class S>
Buffer<S>& scratch(std::size_t n) {
  thread_local Buffer<S> buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

/// 3x3 patches with zero padding 1: rows are (ci, ky, kx), columns pixels.
template <class S>
void im2col3x3(const S* src, int channels, int h, int w, S* cols) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < channels; ++ci) {
    const S* plane = src + ci * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        S* row = cols + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1, dx = kx - 1;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          S* out = row + static_cast<std::size_t>(y) * w;
          const int sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::fill(out, out + w, S(0));
            continue;
          }
          const S* in = plane + static_cast<std::size_t>(sy) * w;
          for (int x = 0; x < x0; ++x) out[x] = S(0);
          std::memcpy(out + x0, in + x0 + dx, sizeof(S) * static_cast<std::size_t>(x1 - x0));
          for (int x = x1; x < w; ++x) out[x] = S(0);
        }
      }
    }
  }
}

/// Adjoint of im2col3x3: scatters column gradients back onto the image.
template <class S>
void col2im3x3(const S* cols, int channels, int h, int w, S* dst) {
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  for (int ci = 0; ci < channels; ++ci) {
    S* plane = dst + ci * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const S* row = cols + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1, dx = kx - 1;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const S* in = row + static_cast<std::size_t>(y) * w;
          S* out = plane + static_cast<std::size_t>(sy) * w;
          for (int x = x0; x < x1; ++x) out[x + dx] += in[x];
        }
      }
    }
  }
}

}  // namespace detail

/// 3x3 convolution, stride 1, zero padding 1. Weights are laid out
/// (out, in*9) so a forward pass is one GEMM per sample.
template <class S>
struct Conv3x3 {
  int in = 0, out = 0;
  Buffer<S> weight, bias;
  Buffer<S> weight_grad, bias_grad;

  Conv3x3() = default;
  Conv3x3(int in_, int out_)
      : in(in_), out(out_), weight(static_cast<std::size_t>(out_) * in_ * 9), bias(out_),
        weight_grad(weight.size()), bias_grad(bias.size()) {}

  Tensor<S> forward(const Tensor<S>& x) const {
    if (x.c != in) throw ShapeError("conv: expected " + std::to_string(in) + " channels, got " + std::to_string(x.c));
    Tensor<S> y(x.n, out, x.h, x.w);
    const auto hw = static_cast<Eigen::Index>(x.plane());
    auto& cols = detail::scratch<S>(static_cast<std::size_t>(in) * 9 * hw);
    ConstMatMap<S> wm(weight.data(), out, in * 9);
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>> b(bias.data(), out);
    for (int i = 0; i < x.n; ++i) {
      detail::im2col3x3(x.sample(i), in, x.h, x.w, cols.data());
      ConstMatMap<S> cm(cols.data(), in * 9, hw);
      MatMap<S> ym(y.sample(i), out, hw);
      ym.noalias() = wm * cm;
      ym.colwise() += b;
    }
    return y;
  }

  /// Accumulates parameter gradients; writes the input gradient when `dx`
  /// is non-null.
  void backward(const Tensor<S>& x, const Tensor<S>& dy, Tensor<S>* dx) {
    const auto hw = static_cast<Eigen::Index>(x.plane());
    auto& cols = detail::scratch<S>(static_cast<std::size_t>(in) * 9 * hw);
    ConstMatMap<S> wm(weight.data(), out, in * 9);
    MatMap<S> gw(weight_grad.data(), out, in * 9);
    VecMap<S> gb(bias_grad.data(), out);
    if (dx) *dx = Tensor<S>(x.n, in, x.h, x.w);
    for (int i = 0; i < x.n; ++i) {
      ConstMatMap<S> dym(dy.sample(i), out, hw);
      detail::im2col3x3(x.sample(i), in, x.h, x.w, cols.data());
      ConstMatMap<S> cm(cols.data(), in * 9, hw);
      gw.noalias() += dym * cm.transpose();
      gb += dym.rowwise().sum();
      if (dx) {
        MatMap<S> dcols(cols.data(), in * 9, hw);
        dcols.noalias() = wm.transpose() * dym;
        detail::col2im3x3(cols.data(), in, x.h, x.w, dx->sample(i));
      }
    }
  }
};

template <class S>
void leaky_relu_inplace(Tensor<S>& t, S slope) {
  for (auto& v : t.data) v = v > S(0) ? v : slope * v;
}

/// Backward through a leaky ReLU given its output (the sign is preserved).
template <class S>
void leaky_relu_backward(const Tensor<S>& out, Tensor<S>& grad, S slope) {
  for (std::size_t i = 0; i < grad.data.size(); ++i)
    if (!(out.data[i] > S(0))) grad.data[i] *= slope;
}

template <class S>
Tensor<S> max_pool2(const Tensor<S>& x, std::vector<unsigned char>* argmax) {
  Tensor<S> y(x.n, x.c, x.h / 2, x.w / 2);
  if (argmax) argmax->assign(y.count(), 0);
  std::size_t k = 0;
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c)
      for (int yy = 0; yy < y.h; ++yy)
        for (int xx = 0; xx < y.w; ++xx, ++k) {
          unsigned char best = 0;
          S v = x.at(i, c, 2 * yy, 2 * xx);
          for (unsigned char q = 1; q < 4; ++q) {
            const S u = x.at(i, c, 2 * yy + (q >> 1), 2 * xx + (q & 1));
            if (u > v) {
              v = u;
              best = q;
            }
          }
          y.data[k] = v;
          if (argmax) (*argmax)[k] = best;
        }
  return y;
}

template <class S>
void max_pool2_backward(const Tensor<S>& dy, const std::vector<unsigned char>& argmax, Tensor<S>& dx) {
  std::size_t k = 0;
  for (int i = 0; i < dy.n; ++i)
    for (int c = 0; c < dy.c; ++c)
      for (int yy = 0; yy < dy.h; ++yy)
        for (int xx = 0; xx < dy.w; ++xx, ++k) {
          const unsigned char q = argmax[k];
          dx.at(i, c, 2 * yy + (q >> 1), 2 * xx + (q & 1)) += dy.data[k];
        }
}

template <class S>
Tensor<S> upsample2(const Tensor<S>& x) {
  Tensor<S> y(x.n, x.c, x.h * 2, x.w * 2);
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c)
      for (int yy = 0; yy < y.h; ++yy)
        for (int xx = 0; xx < y.w; ++xx) y.at(i, c, yy, xx) = x.at(i, c, yy / 2, xx / 2);
  return y;
}

template <class S>
Tensor<S> upsample2_backward(const Tensor<S>& dy) {
  Tensor<S> dx(dy.n, dy.c, dy.h / 2, dy.w / 2);
  for (int i = 0; i < dy.n; ++i)
    for (int c = 0; c < dy.c; ++c)
      for (int yy = 0; yy < dy.h; ++yy)
        for (int xx = 0; xx < dy.w; ++xx) dx.at(i, c, yy / 2, xx / 2) += dy.at(i, c, yy, xx);
  return dx;
}

/// Channel concatenation [a, b].
template <class S>
Tensor<S> concat(const Tensor<S>& a, const Tensor<S>& b) {
  Tensor<S> y(a.n, a.c + b.c, a.h, a.w);
  for (int i = 0; i < a.n; ++i) {
    std::copy_n(a.sample(i), a.sample_size(), y.sample(i));
    std::copy_n(b.sample(i), b.sample_size(), y.sample(i) + a.sample_size());
  }
  return y;
}

/// Splits a concat gradient; adds the tail part into `db`.
template <class S>
Tensor<S> split_head(const Tensor<S>& dy, int head_channels, Tensor<S>& db) {
  Tensor<S> da(dy.n, head_channels, dy.h, dy.w);
  for (int i = 0; i < dy.n; ++i) {
    std::copy_n(dy.sample(i), da.sample_size(), da.sample(i));
    const S* tail = dy.sample(i) + da.sample_size();
    S* out = db.sample(i);
    for (std::size_t k = 0; k < db.sample_size(); ++k) out[k] += tail[k];
  }
  return da;
}

}  // namespace p2n::nn
