#pragma once

#include <cmath>
#include <vector>

#include "spg/nn/layers.hpp"

namespace spg::nn {

// Standard Adam with bias correction. Deterministic: update order follows
// the parameter list, which follows network construction order.
template <typename T>
class Adam {
 public:
  explicit Adam(std::vector<ParamRef<T>> params, T beta1 = T(0.9), T beta2 = T(0.999),
                T eps = T(1e-8))
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    slots_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      slots_[i].m.assign(params_[i].w->size(), T(0));
      slots_[i].v.assign(params_[i].w->size(), T(0));
    }
  }

  const std::vector<ParamRef<T>>& params() const { return params_; }
  long steps() const { return t_; }

  void step(T lr) {
    ++t_;
    T bc1 = T(1) - std::pow(beta1_, T(t_));
    T bc2 = T(1) - std::pow(beta2_, T(t_));
    for (size_t i = 0; i < params_.size(); ++i) {
      auto& w = *params_[i].w;
      auto& g = *params_[i].g;
      auto& m = slots_[i].m;
      auto& v = slots_[i].v;
      for (size_t j = 0; j < w.size(); ++j) {
        m[j] = beta1_ * m[j] + (T(1) - beta1_) * g[j];
        v[j] = beta2_ * v[j] + (T(1) - beta2_) * g[j] * g[j];
        T mh = m[j] / bc1;
        T vh = v[j] / bc2;
        w[j] -= lr * mh / (std::sqrt(vh) + eps_);
      }
    }
  }

  void zero_grad() { zero_grads(params_); }

  // Optimizer state participates in checkpoints so resumed runs continue
  // bit-identically.
  std::vector<T>& slot_m(size_t i) { return slots_[i].m; }
  std::vector<T>& slot_v(size_t i) { return slots_[i].v; }
  void set_steps(long t) { t_ = t; }

 private:
  struct Slot {
    std::vector<T> m, v;
  };
  std::vector<ParamRef<T>> params_;
  std::vector<Slot> slots_;
  T beta1_, beta2_, eps_;
  long t_ = 0;
};

// Cosine decay from lr_max to lr_min over total steps.
template <typename T>
T cosine_lr(long step, long total, T lr_max, T lr_min) {
  if (step >= total) return lr_min;
  double frac = double(step) / double(total);
  return T(lr_min + (lr_max - lr_min) * 0.5 * (1.0 + std::cos(std::numbers::pi * frac)));
}

}  // namespace spg::nn
