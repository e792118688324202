#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "p2n/denoiser.hpp"
#include "p2n/errors.hpp"
#include "p2n/image.hpp"
#include "p2n/metrics.hpp"
#include "p2n/nn/adamw.hpp"
#include "p2n/rng.hpp"

namespace p2n {

/// Two renoised observations of the same predicted clean image:
///   y_p = x_hat + sigma_n * n_hat,   y_n = x_hat - sigma_p * n_hat
/// (the positive copy is scaled by sigma_n, the negative by sigma_p).
struct RenoisedPair {
  Image y_p;
  Image y_n;
  double sigma_p = 1.0;
  double sigma_n = 1.0;
  Image x_hat;
  NoiseResidual n_hat;
};

/// Builds the pair from an existing prediction.
inline RenoisedPair renoise(const Image& y, const Image& x_hat, double sigma_p, double sigma_n) {
  RenoisedPair pair;
  pair.n_hat = y - x_hat;
  pair.x_hat = x_hat;
  pair.sigma_p = sigma_p;
  pair.sigma_n = sigma_n;
  pair.y_p = x_hat + sigma_n * pair.n_hat;
  pair.y_n = x_hat - sigma_p * pair.n_hat;
  return pair;
}

/// Scale draws for one pair: sigma_n then sigma_p, each ~ N(1, sigma).
/// Negative draws are kept.
struct ScaleDraw {
  double sigma_p;
  double sigma_n;
};
inline ScaleDraw draw_scales(double sigma, RngStream& rng) {
  if (!(sigma >= 0.0)) throw ParameterError("scale sampling width sigma must be >= 0");
  if (sigma == 0.0) return {1.0, 1.0};
  const double sn = rng.normal(1.0, sigma);
  const double sp = rng.normal(1.0, sigma);
  return {sp, sn};
}

/// Renoised data construction: x_hat = F(y), n_hat = y - x_hat, fresh
/// scalar scales per call.
template <ImageModel M>
RenoisedPair rdc_construct(const M& model, const Image& y, double sigma, RngStream& rng) {
  const auto s = draw_scales(sigma, rng);
  return renoise(y, model.forward(y), s.sigma_p, s.sigma_n);
}

inline double gamma_schedule(long iteration, long total, double gamma_start, double gamma_end) {
  if (total < 1) throw ParameterError("gamma_schedule: total must be >= 1");
  if (iteration < 0 || iteration > total)
    throw ParameterError("gamma_schedule: iteration " + std::to_string(iteration) + " outside [0, " +
                         std::to_string(total) + "]");
  return gamma_start + (gamma_end - gamma_start) * static_cast<double>(iteration) / static_cast<double>(total);
}

namespace detail {
/// Mean of (|a_i - b_i| + eps)^gamma and, when `grad` is given, its
/// derivative with respect to a (the derivative w.r.t. b is the negation).
inline double consistency_norm(std::span<const double> a, std::span<const double> b, double gamma, double eps,
                               std::vector<double>* grad) {
  const double n = static_cast<double>(a.size());
  if (grad) grad->resize(a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    const double m = std::abs(d) + eps;
    sum += std::pow(m, gamma);
    if (grad) {
      const double sign = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
      (*grad)[i] = gamma * std::pow(m, gamma - 1.0) * sign / n;
    }
  }
  return sum / n;
}
}  // namespace detail

/// Denoised consistency loss: mean over elements of (|d_p - d_n| + eps)^gamma.
inline double dcs_loss(const Image& d_p, const Image& d_n, double gamma, double epsilon) {
  require_same_shape(d_p.shape(), d_n.shape(), "dcs_loss");
  if (!(gamma > 0.0)) throw ParameterError("dcs_loss: gamma must be > 0");
  if (!(epsilon > 0.0)) throw ParameterError("dcs_loss: epsilon must be > 0");
  return detail::consistency_norm(d_p.data(), d_n.data(), gamma, epsilon, nullptr);
}

enum class NormMode { varying, fixed_2, fixed_1_5 };

/// Which parts of the paradigm are active. `noisy_target` supervises
/// F(y_p) against the noisy y_n instead of F(y_n); `independent_noise`
/// renoises y with fresh white Gaussian noise of the residual's spread
/// instead of the predicted residual.
enum class Variant { full, noisy_target, independent_noise };

struct CollapseThresholds {
  double zero_map_std = 1e-3;
  double identity_mean_abs = 1e-4;
  double noisy_input_std = 5e-3;
};

struct TrainConfig {
  double sigma = 0.75;
  double learning_rate = 1e-4;
  long iterations = 300;
  double gamma_start = 2.0;
  double gamma_end = 1.5;
  double epsilon = 1e-8;
  NormMode norm_mode = NormMode::varying;
  std::uint64_t seed = 0;
  int pairs_per_iteration = 1;
  double weight_decay = 0.01;
  Variant variant = Variant::full;
  /// Treat x_hat (and hence n_hat) as constant data when building pairs.
  bool detach_prediction = false;
  CollapseThresholds collapse{};

  void validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("train.sigma", "must be finite and >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate", "must be > 0");
    if (iterations < 0) throw ConfigError("train.iterations", "must be >= 0");
    if (!(gamma_end > 0.0) || gamma_start < gamma_end)
      throw ConfigError("train.gamma", "need gamma_start >= gamma_end > 0");
    if (!(epsilon > 0.0)) throw ConfigError("train.epsilon", "must be > 0");
    if (pairs_per_iteration < 1) throw ConfigError("train.pairs_per_iteration", "must be >= 1");
    if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay", "must be >= 0");
  }

  double gamma_at(long iteration) const {
    switch (norm_mode) {
      case NormMode::fixed_2: return 2.0;
      case NormMode::fixed_1_5: return 1.5;
      case NormMode::varying: break;
    }
    return gamma_schedule(iteration, std::max(iterations, 1L), gamma_start, gamma_end);
  }
};

enum class CollapseStatus { ok, zero_map, identity_map };

inline const char* to_string(CollapseStatus s) {
  switch (s) {
    case CollapseStatus::ok: return "ok";
    case CollapseStatus::zero_map: return "zero-map";
    case CollapseStatus::identity_map: return "identity-map";
  }
  return "?";
}

/// Noise level of a single image from the median absolute finest-scale
/// diagonal Haar coefficient (MAD / 0.6745).
inline double estimate_noise_std(const Image& y) {
  std::vector<double> hh;
  for (int c = 0; c < y.channels(); ++c)
    for (int r = 0; r + 1 < y.height(); r += 2)
      for (int x = 0; x + 1 < y.width(); x += 2) {
        const double v = (y.at(c, r, x) - y.at(c, r, x + 1) - y.at(c, r + 1, x) + y.at(c, r + 1, x + 1)) / 2.0;
        hh.push_back(std::abs(v));
      }
  if (hh.empty()) return 0.0;
  auto mid = hh.begin() + static_cast<std::ptrdiff_t>(hh.size() / 2);
  std::nth_element(hh.begin(), mid, hh.end());
  return *mid / 0.6745;
}

/// Detects the degenerate optima of a consistency-only objective: a
/// (near-)constant output, or an output equal to a visibly noisy input.
template <ImageModel M>
CollapseStatus collapse_check(const M& model, const Image& y, const CollapseThresholds& t = {}) {
  const Image out = model.forward(y);
  if (y.stddev() > 0.0 && out.stddev() < t.zero_map_std) return CollapseStatus::zero_map;
  const auto diff = out - y;
  double mad = 0.0;
  for (double v : diff.data()) mad += std::abs(v);
  mad /= static_cast<double>(diff.size());
  if (mad < t.identity_mean_abs && estimate_noise_std(y) > t.noisy_input_std) return CollapseStatus::identity_map;
  return CollapseStatus::ok;
}

struct TrainReport {
  std::vector<double> loss_history;
  std::optional<std::vector<double>> psnr_history;
  Image final_denoised;
  CollapseStatus collapse = CollapseStatus::ok;
  bool collapse_flag = false;
  double wall_time = 0.0;
};

/// Self-supervised training of `model` on the single noisy image `y`.
///
/// Each iteration predicts x_hat = F(y) with the current weights, builds
/// `pairs_per_iteration` renoised pairs from it, evaluates the consistency
/// loss between F(y_p) and F(y_n) and takes one AdamW step. The gradient
/// also flows back through x_hat into the prediction pass unless
/// `detach_prediction` is set. When `clean` is given the
/// PSNR of each iteration's x_hat is recorded. Random draws come from
/// (config.seed, stream_id).
inline TrainReport train_single_image(DenoiserModel& model, const Image& y, const TrainConfig& config,
                                      const std::optional<Image>& clean = std::nullopt,
                                      const std::string& stream_id = "train") {
  config.validate();
  y.validate();
  if (clean) require_same_shape(clean->shape(), y.shape(), "train_single_image clean reference");
  const auto t0 = std::chrono::steady_clock::now();

  TrainReport report;
  report.loss_history.reserve(static_cast<std::size_t>(config.iterations));
  if (clean) report.psnr_history.emplace();
  RngStream rng(config.seed, stream_id);
  nn::AdamW<float> opt(model, {.learning_rate = config.learning_rate, .weight_decay = config.weight_decay});
  const int pairs = config.pairs_per_iteration;

  const bool through_prediction = !config.detach_prediction && config.variant != Variant::independent_noise;
  const bool noisy_target = config.variant == Variant::noisy_target;
  std::vector<Image> batch;
  std::vector<ScaleDraw> scales;
  std::vector<double> grad;
  for (long it = 0; it < config.iterations; ++it) {
    model.set_mode(Mode::train);
    DenoiserModel::Cache pred_cache;
    Image x_hat;
    if (through_prediction) {
      x_hat = DenoiserModel::from_tensor(model.forward_train({&y, 1}, pred_cache), 0);
    } else {
      x_hat = model.forward(y);
    }
    if (clean) report.psnr_history->push_back(psnr(x_hat, *clean));
    const double gamma = config.gamma_at(it);

    batch.clear();
    scales.clear();
    for (int k = 0; k < pairs; ++k) {
      const auto s = draw_scales(config.sigma, rng);
      scales.push_back(s);
      if (config.variant == Variant::independent_noise) {
        const double spread = (y - x_hat).stddev();
        NoiseResidual g(y.shape());
        for (double& v : g.data()) v = rng.normal(0.0, spread);
        batch.push_back(y + s.sigma_n * g);
        batch.push_back(y - s.sigma_p * g);
      } else {
        auto pair = renoise(y, x_hat, s.sigma_p, s.sigma_n);
        batch.push_back(std::move(pair.y_p));
        batch.push_back(std::move(pair.y_n));
      }
    }

    // Network inputs: both members of each pair, or only y_p when the
    // negative image is used directly as the target.
    std::vector<Image> inputs;
    for (int k = 0; k < pairs; ++k) {
      inputs.push_back(batch[2 * k]);
      if (!noisy_target) inputs.push_back(batch[2 * k + 1]);
    }
    const int stride = noisy_target ? 1 : 2;
    DenoiserModel::Cache cache;
    const auto out = model.forward_train(inputs, cache);
    nn::Tensor<float> dout(out.n, out.c, out.h, out.w);
    const std::size_t per = out.sample_size();
    std::vector<double> a(per), b(per);
    std::vector<std::vector<double>> target_grad(pairs);
    double loss = 0.0;
    for (int k = 0; k < pairs; ++k) {
      const int ip = stride * k;
      std::copy_n(out.sample(ip), per, a.begin());
      if (noisy_target)
        std::copy(batch[2 * k + 1].data().begin(), batch[2 * k + 1].data().end(), b.begin());
      else
        std::copy_n(out.sample(ip + 1), per, b.begin());
      loss += detail::consistency_norm(a, b, gamma, config.epsilon, &grad) / pairs;
      float* gp = dout.sample(ip);
      for (std::size_t i = 0; i < per; ++i) gp[i] = static_cast<float>(grad[i] / pairs);
      if (noisy_target) {
        target_grad[k].resize(per);
        for (std::size_t i = 0; i < per; ++i) target_grad[k][i] = -grad[i] / pairs;
      } else {
        float* gn = dout.sample(ip + 1);
        for (std::size_t i = 0; i < per; ++i) gn[i] = static_cast<float>(-grad[i] / pairs);
      }
    }
    if (!std::isfinite(loss)) {
      model.set_mode(Mode::eval);
      throw DivergenceError(it);
    }
    report.loss_history.push_back(loss);
    model.zero_grad();
    if (!through_prediction) {
      model.backward(cache, dout);
    } else {
      // y_p = (1 - sigma_n) x_hat + sigma_n y and y_n = (1 + sigma_p) x_hat - sigma_p y.
      nn::Tensor<float> din;
      model.backward(cache, dout, &din);
      nn::Tensor<float> dxhat(1, y.channels(), y.height(), y.width());
      for (int k = 0; k < pairs; ++k) {
        const float wp = static_cast<float>(1.0 - scales[k].sigma_n);
        const float wn = static_cast<float>(1.0 + scales[k].sigma_p);
        const float* gp = din.sample(stride * k);
        for (std::size_t i = 0; i < per; ++i) dxhat.data[i] += wp * gp[i];
        if (noisy_target) {
          for (std::size_t i = 0; i < per; ++i) dxhat.data[i] += wn * static_cast<float>(target_grad[k][i]);
        } else {
          const float* gn = din.sample(stride * k + 1);
          for (std::size_t i = 0; i < per; ++i) dxhat.data[i] += wn * gn[i];
        }
      }
      model.backward(pred_cache, dxhat);
    }
    opt.step();
    if (!model.parameters_finite()) {
      model.set_mode(Mode::eval);
      throw DivergenceError(it);
    }
  }
  model.zero_grad();
  model.set_mode(Mode::eval);
  report.final_denoised = model.forward(y);
  report.collapse = collapse_check(model, y, config.collapse);
  report.collapse_flag = report.collapse != CollapseStatus::ok;
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

struct TaylorCheck {
  double relative_error = 0.0;
  /// ||lhs - rhs||
  double discrepancy = 0.0;
  double rhs_norm = 0.0;
  double sigma_p = 1.0;
  double sigma_n = 1.0;
};

/// Compares F(y_p) - F(y_n) with its first-order prediction
/// (sigma_p + sigma_n) * dF/dy|_{x_hat} . (shrink * n_hat), where the pair
/// is built from shrink * n_hat with scales drawn at sigma = `sigma`. The
/// Jacobian-vector product uses central differences whose perturbation is
/// 1e-3 * n_hat regardless of `shrink`.
template <ImageModel M>
TaylorCheck taylor_consistency_detail(const M& model, const Image& y, double shrink, RngStream& rng,
                                      double sigma = 0.75) {
  if (!(shrink > 0.0 && shrink <= 1.0)) throw ParameterError("shrink must be in (0, 1]");
  if constexpr (requires { model.mode(); }) {
    if (model.mode() != Mode::eval) throw ParameterError("taylor check requires a model in eval mode");
  }
  const Image x_hat = model.forward(y);
  const NoiseResidual direction = shrink * (y - x_hat);
  const auto s = draw_scales(sigma, rng);
  const Image y_p = x_hat + s.sigma_n * direction;
  const Image y_n = x_hat - s.sigma_p * direction;
  const NoiseResidual lhs = model.forward(y_p) - model.forward(y_n);

  TaylorCheck out;
  out.sigma_p = s.sigma_p;
  out.sigma_n = s.sigma_n;
  const double dir_norm = direction.l2_norm();
  if (dir_norm < 1e-300) throw IndeterminateError("taylor check: predicted noise is zero");
  const NoiseResidual rhs = (s.sigma_p + s.sigma_n) * jvp_fd(model, x_hat, direction, 1e-3 / shrink);
  out.rhs_norm = rhs.l2_norm();
  if (out.rhs_norm < 1e-12) throw IndeterminateError("taylor check: first-order term vanishes (||rhs|| < 1e-12)");
  out.discrepancy = (lhs - rhs).l2_norm();
  out.relative_error = out.discrepancy / out.rhs_norm;
  return out;
}

template <ImageModel M>
double taylor_consistency_check(const M& model, const Image& y, double shrink, RngStream& rng) {
  return taylor_consistency_detail(model, y, shrink, rng).relative_error;
}

}  // namespace p2n
