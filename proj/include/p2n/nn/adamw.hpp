#pragma once

#include <cmath>
#include <vector>

#include "p2n/nn/unet.hpp"

namespace p2n::nn {

struct AdamWOptions {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Adam with decoupled weight decay:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
template <class S>
class AdamW {
public:
  AdamW(UNet<S>& model, AdamWOptions opts) : model_(model), opts_(opts) {
    for (const auto& p : model_.parameters()) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    auto params = model_.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto& m = m_[k];
      auto& v = v_[k];
      auto value = params[k].value;
      auto grad = params[k].grad;
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double g = grad[i];
        m[i] = opts_.beta1 * m[i] + (1.0 - opts_.beta1) * g;
        v[i] = opts_.beta2 * v[i] + (1.0 - opts_.beta2) * g * g;
        const double update = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + opts_.eps);
        const double theta = value[i];
        value[i] = static_cast<S>(theta - opts_.learning_rate * (update + opts_.weight_decay * theta));
      }
    }
  }

  long steps() const noexcept { return t_; }

private:
  UNet<S>& model_;
  AdamWOptions opts_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace p2n::nn
