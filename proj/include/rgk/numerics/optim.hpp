#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "rgk/numerics/tensor.hpp"

namespace rgk {

// Adam with decoupled weight decay. Decay applies to matrices only; biases,
// norm gains and embeddings of rank 1 are left undecayed.
class AdamW {
 public:
  struct Options {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;
  };

  AdamW(std::vector<Tensor> params, Options options) : params_(std::move(params)), opt_(options) {
    for (const auto& p : params_) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }

  void set_lr(double lr) { opt_.lr = lr; }
  double lr() const { return opt_.lr; }
  std::size_t steps() const { return t_; }

  // Applies one update from accumulated gradients scaled by grad_scale, then
  // clears the gradients.
  void step(double grad_scale = 1.0) {
    ++t_;
    double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Tensor& p = params_[k];
      if (!p.has_grad()) continue;
      const auto g = p.grad();
      auto& w = p.mutable_values();
      bool decay = p.rank() >= 2 && opt_.weight_decay > 0;
      for (std::size_t i = 0; i < w.size(); ++i) {
        double gi = g[i] * grad_scale;
        m_[k][i] = opt_.beta1 * m_[k][i] + (1 - opt_.beta1) * gi;
        v_[k][i] = opt_.beta2 * v_[k][i] + (1 - opt_.beta2) * gi * gi;
        if (decay) w[i] -= opt_.lr * opt_.weight_decay * w[i];
        w[i] -= opt_.lr * (m_[k][i] / bc1) / (std::sqrt(v_[k][i] / bc2) + opt_.eps);
      }
      p.zero_grad();
    }
  }

 private:
  std::vector<Tensor> params_;
  Options opt_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

// Cosine decay from base_lr at step 0 to min_lr at total_steps.
inline double cosine_lr(double base_lr, std::size_t step, std::size_t total_steps, double min_lr = 0.0) {
  if (total_steps == 0) return base_lr;
  double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
  return min_lr + 0.5 * (base_lr - min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace rgk
