#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "p2n/errors.hpp"
#include "p2n/image.hpp"
#include "p2n/nn/tensor.hpp"
#include "p2n/rng.hpp"

namespace p2n::nn {

struct ArchitectureConfig {
  int channels = 1;
  int base_width = 24;
  int depth = 3;
  /// Output is input plus the predicted correction.
  bool residual = true;
  double leaky_slope = 0.1;

  void validate() const {
    if (channels != 1 && channels != 3) throw ParameterError("architecture channels must be 1 or 3");
    if (base_width < 1) throw ParameterError("architecture base_width must be >= 1");
    if (depth < 0 || depth > 8) throw ParameterError("architecture depth must be in [0, 8]");
    if (!(leaky_slope > 0.0 && leaky_slope < 1.0)) throw ParameterError("leaky_slope must be in (0, 1)");
  }
  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

enum class Mode { train, eval };

/// Named view of one trainable array.
template <class S>
struct ParamView {
  std::string name;
  std::vector<int> shape;
  std::span<S> value;
  std::span<S> grad;
};

/// Index into a dimension of size n under mirror reflection (no edge
/// repeat); degenerates to 0 for n == 1.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

/// Encoder-decoder with skip connections:
///
///   in -> conv(C->W) -> [pool -> conv(W->W)] x depth
///      -> [upsample -> concat skip -> conv(2W->W) -> conv(W->W)] x depth
///      -> conv(W->C) (+ input when residual)
///
/// All hidden convolutions are followed by a leaky ReLU. Inputs whose sides
/// are not multiples of 2^depth are mirror-padded and the output cropped.
template <class S = float>
class UNet {
public:
  struct Cache {
    int crop_h = 0, crop_w = 0;
    Tensor<S> input;
    std::vector<Tensor<S>> enc;      // post-activation, level 0..depth
    std::vector<Tensor<S>> pooled;   // pool(enc[l-1]) for l = 1..depth (index l-1)
    std::vector<std::vector<unsigned char>> argmax;
    std::vector<Tensor<S>> cat;      // decoder inputs, index l-1
    std::vector<Tensor<S>> dec_mid;  // post-activation after the first decoder conv
    std::vector<Tensor<S>> dec_out;  // post-activation decoder output at level l-1
  };

  UNet() : UNet(ArchitectureConfig{}) {}

  explicit UNet(const ArchitectureConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int C = cfg_.channels, W = cfg_.base_width;
    convs_.emplace_back(C, W);
    names_.emplace_back("in");
    for (int l = 1; l <= cfg_.depth; ++l) {
      convs_.emplace_back(W, W);
      names_.push_back("enc" + std::to_string(l));
    }
    for (int l = 1; l <= cfg_.depth; ++l) {
      convs_.emplace_back(2 * W, W);
      names_.push_back("dec" + std::to_string(l) + "a");
      convs_.emplace_back(W, W);
      names_.push_back("dec" + std::to_string(l) + "b");
    }
    convs_.emplace_back(W, C);
    names_.emplace_back("out");
  }

  /// He-normal weights, zero biases; the output layer is scaled down so a
  /// residual network starts close to the identity.
  void initialize(RngStream rng) {
    const double gain = std::sqrt(2.0 / (1.0 + cfg_.leaky_slope * cfg_.leaky_slope));
    for (std::size_t k = 0; k < convs_.size(); ++k) {
      auto& conv = convs_[k];
      double sd = gain / std::sqrt(conv.in * 9.0);
      if (k + 1 == convs_.size()) sd *= 0.1;
      for (auto& w : conv.weight) w = static_cast<S>(rng.normal(0.0, sd));
      std::fill(conv.bias.begin(), conv.bias.end(), S(0));
    }
    zero_grad();
  }

  const ArchitectureConfig& config() const noexcept { return cfg_; }
  Mode mode() const noexcept { return mode_; }
  void set_mode(Mode m) noexcept { mode_ = m; }
  int multiple() const noexcept { return 1 << cfg_.depth; }

  std::vector<ParamView<S>> parameters() {
    std::vector<ParamView<S>> out;
    for (std::size_t k = 0; k < convs_.size(); ++k) {
      auto& c = convs_[k];
      out.push_back({names_[k] + ".weight", {c.out, c.in, 3, 3}, c.weight, c.weight_grad});
      out.push_back({names_[k] + ".bias", {c.out}, c.bias, c.bias_grad});
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& c : convs_) n += c.weight.size() + c.bias.size();
    return n;
  }

  void zero_grad() {
    for (auto& c : convs_) {
      std::fill(c.weight_grad.begin(), c.weight_grad.end(), S(0));
      std::fill(c.bias_grad.begin(), c.bias_grad.end(), S(0));
    }
  }

  bool parameters_finite() const {
    for (const auto& c : convs_) {
      for (S v : c.weight)
        if (!std::isfinite(v)) return false;
      for (S v : c.bias)
        if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <class T>
  UNet<T> cast() const {
    UNet<T> other(cfg_);
    auto dst = other.parameters();
    auto src = const_cast<UNet*>(this)->parameters();
    for (std::size_t k = 0; k < src.size(); ++k)
      for (std::size_t i = 0; i < src[k].value.size(); ++i) dst[k].value[i] = static_cast<T>(src[k].value[i]);
    other.set_mode(mode_);
    return other;
  }

  friend bool operator==(const UNet& a, const UNet& b) {
    if (!(a.cfg_ == b.cfg_)) return false;
    for (std::size_t k = 0; k < a.convs_.size(); ++k)
      if (a.convs_[k].weight != b.convs_[k].weight || a.convs_[k].bias != b.convs_[k].bias) return false;
    return true;
  }

  /// x_hat = F(y). Deterministic; does not touch gradients.
  Image forward(const Image& image) const {
    check_channels(image);
    auto out = run(to_tensor({&image, 1}), nullptr, image.height(), image.width());
    return from_tensor(out, 0);
  }

  /// Batched forward that keeps the activations needed by `backward`.
  /// Returns outputs cropped back to the input size.
  Tensor<S> forward_train(std::span<const Image> images, Cache& cache) const {
    for (const auto& im : images) {
      check_channels(im);
      require_same_shape(im.shape(), images[0].shape(), "batch");
    }
    return run(to_tensor(images), &cache, images[0].height(), images[0].width());
  }

  /// Accumulates parameter gradients for d(loss)/d(output) given on the
  /// cropped output grid. When `grad_input` is non-null it receives
  /// d(loss)/d(input) on the original (unpadded) grid.
  void backward(const Cache& cache, const Tensor<S>& grad_out, Tensor<S>* grad_input = nullptr) {
    const S slope = static_cast<S>(cfg_.leaky_slope);
    const int D = cfg_.depth, W = cfg_.base_width;
    // Uncrop: gradient outside the original window is zero.
    const Tensor<S>& x0 = cache.input;
    Tensor<S> g(x0.n, cfg_.channels, x0.h, x0.w);
    for (int i = 0; i < g.n; ++i)
      for (int c = 0; c < g.c; ++c)
        for (int y = 0; y < cache.crop_h; ++y)
          for (int x = 0; x < cache.crop_w; ++x) g.at(i, c, y, x) = grad_out.at(i, c, y, x);

    std::vector<Tensor<S>> denc(D + 1);
    for (int l = 0; l <= D; ++l) denc[l] = Tensor<S>(x0.n, W, x0.h >> l, x0.w >> l);

    const Tensor<S>& top = D > 0 ? cache.dec_out[0] : cache.enc[0];
    Tensor<S> dd;
    out_conv().backward(top, g, &dd);
    if (D == 0) {
      for (std::size_t k = 0; k < dd.data.size(); ++k) denc[0].data[k] += dd.data[k];
    }
    for (int l = 1; l <= D; ++l) {
      leaky_relu_backward(cache.dec_out[l - 1], dd, slope);
      Tensor<S> dmid;
      dec_b(l).backward(cache.dec_mid[l - 1], dd, &dmid);
      leaky_relu_backward(cache.dec_mid[l - 1], dmid, slope);
      Tensor<S> dcat;
      dec_a(l).backward(cache.cat[l - 1], dmid, &dcat);
      Tensor<S> du = split_head(dcat, W, denc[l - 1]);
      Tensor<S> below = upsample2_backward(du);
      if (l == D) {
        for (std::size_t k = 0; k < below.data.size(); ++k) denc[D].data[k] += below.data[k];
      } else {
        dd = std::move(below);
      }
    }
    for (int l = D; l >= 1; --l) {
      leaky_relu_backward(cache.enc[l], denc[l], slope);
      Tensor<S> dp;
      enc(l).backward(cache.pooled[l - 1], denc[l], &dp);
      max_pool2_backward(dp, cache.argmax[l - 1], denc[l - 1]);
    }
    leaky_relu_backward(cache.enc[0], denc[0], slope);
    if (!grad_input) {
      in_conv().backward(cache.input, denc[0], nullptr);
      return;
    }
    Tensor<S> dx;
    in_conv().backward(cache.input, denc[0], &dx);
    if (cfg_.residual)
      for (std::size_t k = 0; k < dx.data.size(); ++k) dx.data[k] += g.data[k];
    // Fold the mirror padding back onto the source pixels.
    *grad_input = Tensor<S>(dx.n, dx.c, cache.crop_h, cache.crop_w);
    for (int i = 0; i < dx.n; ++i)
      for (int c = 0; c < dx.c; ++c)
        for (int y = 0; y < dx.h; ++y) {
          const int sy = reflect_index(y, cache.crop_h);
          for (int x = 0; x < dx.w; ++x) grad_input->at(i, c, sy, reflect_index(x, cache.crop_w)) += dx.at(i, c, y, x);
        }
  }

  Tensor<S> to_tensor(std::span<const Image> images) const {
    const int h = images[0].height(), w = images[0].width(), C = images[0].channels();
    const int m = multiple();
    const int ph = (h + m - 1) / m * m, pw = (w + m - 1) / m * m;
    Tensor<S> t(static_cast<int>(images.size()), C, ph, pw);
    for (int i = 0; i < t.n; ++i)
      for (int c = 0; c < C; ++c)
        for (int y = 0; y < ph; ++y) {
          const int sy = reflect_index(y, h);
          for (int x = 0; x < pw; ++x)
            t.at(i, c, y, x) = static_cast<S>(images[i].at(c, sy, reflect_index(x, w)));
        }
    return t;
  }

  /// Sample `i` of a cropped output tensor as an image.
  static Image from_tensor(const Tensor<S>& t, int i) {
    Image img(t.h, t.w, t.c);
    for (int c = 0; c < t.c; ++c)
      for (int y = 0; y < t.h; ++y)
        for (int x = 0; x < t.w; ++x) img.at(c, y, x) = static_cast<double>(t.at(i, c, y, x));
    return img;
  }

private:
  Conv3x3<S>& in_conv() { return convs_[0]; }
  Conv3x3<S>& enc(int l) { return convs_[l]; }
  Conv3x3<S>& dec_a(int l) { return convs_[cfg_.depth + 2 * (l - 1) + 1]; }
  Conv3x3<S>& dec_b(int l) { return convs_[cfg_.depth + 2 * (l - 1) + 2]; }
  Conv3x3<S>& out_conv() { return convs_.back(); }
  const Conv3x3<S>& in_conv() const { return convs_[0]; }
  const Conv3x3<S>& enc(int l) const { return convs_[l]; }
  const Conv3x3<S>& dec_a(int l) const { return convs_[cfg_.depth + 2 * (l - 1) + 1]; }
  const Conv3x3<S>& dec_b(int l) const { return convs_[cfg_.depth + 2 * (l - 1) + 2]; }
  const Conv3x3<S>& out_conv() const { return convs_.back(); }

  void check_channels(const Image& im) const {
    if (im.channels() != cfg_.channels)
      throw ShapeError("model expects " + std::to_string(cfg_.channels) + " channels, image has " +
                       std::to_string(im.channels()));
  }

  Tensor<S> run(Tensor<S> x0, Cache* cache, int crop_h, int crop_w) const {
    const S slope = static_cast<S>(cfg_.leaky_slope);
    const int D = cfg_.depth;
    std::vector<Tensor<S>> enc_out(D + 1);
    std::vector<Tensor<S>> pooled(D);
    std::vector<std::vector<unsigned char>> argmax(D);

    enc_out[0] = in_conv().forward(x0);
    leaky_relu_inplace(enc_out[0], slope);
    for (int l = 1; l <= D; ++l) {
      pooled[l - 1] = max_pool2(enc_out[l - 1], cache ? &argmax[l - 1] : nullptr);
      enc_out[l] = enc(l).forward(pooled[l - 1]);
      leaky_relu_inplace(enc_out[l], slope);
    }
    std::vector<Tensor<S>> cats(D), mids(D), outs(D);
    Tensor<S> d = D > 0 ? enc_out[D] : Tensor<S>{};
    for (int l = D; l >= 1; --l) {
      Tensor<S> cat = concat(upsample2(d), enc_out[l - 1]);
      Tensor<S> mid = dec_a(l).forward(cat);
      leaky_relu_inplace(mid, slope);
      d = dec_b(l).forward(mid);
      leaky_relu_inplace(d, slope);
      if (cache) {
        cats[l - 1] = std::move(cat);
        mids[l - 1] = std::move(mid);
        outs[l - 1] = d;
      }
    }
    Tensor<S> out = out_conv().forward(D > 0 ? d : enc_out[0]);
    if (cfg_.residual)
      for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += x0.data[k];

    Tensor<S> cropped(out.n, out.c, crop_h, crop_w);
    for (int i = 0; i < out.n; ++i)
      for (int c = 0; c < out.c; ++c)
        for (int y = 0; y < crop_h; ++y)
          for (int x = 0; x < crop_w; ++x) cropped.at(i, c, y, x) = out.at(i, c, y, x);

    if (cache) {
      cache->crop_h = crop_h;
      cache->crop_w = crop_w;
      cache->input = std::move(x0);
      cache->enc = std::move(enc_out);
      cache->pooled = std::move(pooled);
      cache->argmax = std::move(argmax);
      cache->cat = std::move(cats);
      cache->dec_mid = std::move(mids);
      cache->dec_out = std::move(outs);
    }
    return cropped;
  }

  ArchitectureConfig cfg_;
  Mode mode_ = Mode::eval;
  std::vector<Conv3x3<S>> convs_;
  std::vector<std::string> names_;
};

}  // namespace p2n::nn
