#pragma once

#include <algorithm>
#include <concepts>
#include <span>
#include <utility>
#include <vector>

#include "p2n/errors.hpp"
#include "p2n/image.hpp"
#include "p2n/nn/adamw.hpp"
#include "p2n/nn/unet.hpp"
#include "p2n/noise.hpp"
#include "p2n/rng.hpp"

namespace p2n {

using nn::ArchitectureConfig;
using nn::Mode;

/// The trainable denoiser F_theta used throughout the library.
using DenoiserModel = nn::UNet<float>;

/// Anything that maps an image to an image of the same shape. Analysis code
/// (RDC, Taylor check, collapse detection) accepts stubs through this.
template <class M>
concept ImageModel = requires(const M& m, const Image& x) {
  { m.forward(x) } -> std::convertible_to<Image>;
};

/// Fresh, initialised model.
inline DenoiserModel make_denoiser(const ArchitectureConfig& arch, std::uint64_t seed) {
  DenoiserModel m(arch);
  m.initialize(RngStream(seed, "init"));
  return m;
}

template <ImageModel M>
Image forward(const M& model, const Image& image) {
  return model.forward(image);
}

struct PretrainConfig {
  double sigma_lo = 5.0 / 255.0;
  double sigma_hi = 50.0 / 255.0;
  long iterations = 2000;
  double learning_rate = 1e-3;
  int batch_size = 4;
  int crop_size = 64;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(sigma_lo >= 0.0 && sigma_lo <= sigma_hi)) throw ConfigError("pretrain.sigma_range", "need 0 <= lo <= hi");
    if (iterations < 0) throw ConfigError("pretrain.iterations", "must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("pretrain.learning_rate", "must be > 0");
    if (batch_size < 1) throw ConfigError("pretrain.batch_size", "must be >= 1");
    if (crop_size < 1) throw ConfigError("pretrain.crop_size", "must be >= 1");
  }
};

struct PretrainResult {
  DenoiserModel model;
  std::vector<double> loss_history;
};

/// Supervised regression from (clean + N(0, s^2)) crops to clean crops with
/// s ~ U[sigma_lo, sigma_hi] per crop. Crops are square, side
/// min(crop_size, smallest corpus side).
inline PretrainResult pretrain_gaussian(DenoiserModel model, const PretrainConfig& cfg,
                                        std::span<const Image> corpus) {
  cfg.validate();
  if (corpus.empty()) throw ConfigError("pretrain.corpus", "clean corpus is empty");
  int side = cfg.crop_size;
  for (const auto& im : corpus) {
    if (im.channels() != model.config().channels)
      throw ShapeError("corpus image channel count does not match the model");
    side = std::min({side, im.height(), im.width()});
  }

  PretrainResult result{std::move(model), {}};
  auto& net = result.model;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.iterations));
  RngStream rng(cfg.seed, "pretrain");
  nn::AdamW<float> opt(net, {.learning_rate = cfg.learning_rate});
  net.set_mode(Mode::train);

  std::vector<Image> noisy(cfg.batch_size), clean(cfg.batch_size);
  for (long it = 0; it < cfg.iterations; ++it) {
    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto& src = corpus[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(corpus.size()) - 1))];
      const int top = static_cast<int>(rng.uniform_int(0, src.height() - side));
      const int left = static_cast<int>(rng.uniform_int(0, src.width() - side));
      clean[b] = crop(src, top, left, side, side);
      const double sigma = rng.uniform(cfg.sigma_lo, cfg.sigma_hi);
      noisy[b] = add_noise(clean[b], NoiseSpec::gaussian(sigma), rng);
    }
    DenoiserModel::Cache cache;
    auto out = net.forward_train(noisy, cache);
    nn::Tensor<float> grad(out.n, out.c, out.h, out.w);
    double loss = 0.0;
    const double scale = 2.0 / static_cast<double>(out.count());
    std::size_t k = 0;
    for (int b = 0; b < out.n; ++b)
      for (double x : clean[b].data()) {
        const double d = static_cast<double>(out.data[k]) - x;
        loss += d * d;
        grad.data[k] = static_cast<float>(scale * d);
        ++k;
      }
    loss /= static_cast<double>(out.count());
    if (!std::isfinite(loss)) throw DivergenceError(it);
    result.loss_history.push_back(loss);
    net.zero_grad();
    net.backward(cache, grad);
    opt.step();
  }
  net.zero_grad();
  net.set_mode(Mode::eval);
  return result;
}

/// Central difference (F(p + h d) - F(p - h d)) / 2h, approximating the
/// Jacobian-vector product dF/dy|_p . d.
template <ImageModel M>
NoiseResidual jvp_fd(const M& model, const Image& point, const NoiseResidual& direction, double step) {
  if (!(step > 0.0)) throw ParameterError("jvp_fd step must be > 0");
  require_same_shape(point.shape(), direction.shape(), "jvp_fd");
  if constexpr (requires { model.mode(); }) {
    if (model.mode() != Mode::eval) throw ParameterError("jvp_fd requires a model in eval mode");
  }
  const NoiseResidual h = step * direction;
  const Image plus = model.forward(point + h);
  const Image minus = model.forward(point - h);
  NoiseResidual out = plus - minus;
  out *= 1.0 / (2.0 * step);
  return out;
}

}  // namespace p2n
