#pragma once

#include <cmath>
#include <vector>

#include "nn/layers.hpp"

namespace ctig::nn {

// Decoupled weight decay Adam. Decay is skipped for params flagged
// decay=false (biases, norm gains, embeddings) and for frozen params.
class AdamW {
 public:
  AdamW(ParamRefs params, double beta1, double beta2, double weight_decay,
        double eps = 1e-8)
      : params_(std::move(params)),
        beta1_(beta1),
        beta2_(beta2),
        wd_(weight_decay),
        eps_(eps) {
    for (Param* p : params_) {
      m_.emplace_back(p->w.shape);
      v_.emplace_back(p->w.shape);
    }
  }

  void zero_grad() {
    for (Param* p : params_) p->zero_grad();
  }

  void step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      Param* p = params_[i];
      if (p->frozen) continue;
      real* w = p->w.data();
      const real* g = p->g.data();
      real* m = m_[i].data();
      real* v = v_[i].data();
      int64_t n = p->w.numel();
      double decay = p->decay ? wd_ : 0.0;
      for (int64_t j = 0; j < n; ++j) {
        double gj = g[j];
        double mj = beta1_ * m[j] + (1.0 - beta1_) * gj;
        double vj = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
        m[j] = static_cast<real>(mj);
        v[j] = static_cast<real>(vj);
        double mh = mj / bc1, vh = vj / bc2;
        w[j] = static_cast<real>(w[j] - lr * (mh / (std::sqrt(vh) + eps_) + decay * w[j]));
      }
    }
  }

  int64_t step_count() const { return t_; }
  void set_step_count(int64_t t) { t_ = t; }
  std::vector<Tensor>& m_state() { return m_; }
  std::vector<Tensor>& v_state() { return v_; }

 private:
  ParamRefs params_;
  double beta1_, beta2_, wd_, eps_;
  int64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Cosine-annealed learning rate over a fixed step budget.
inline double cosine_lr(double base, int64_t step, int64_t total, int64_t warmup = 0) {
  if (warmup > 0 && step < warmup)
    return base * static_cast<double>(step + 1) / static_cast<double>(warmup);
  double p = total > warmup
                 ? static_cast<double>(step - warmup) / static_cast<double>(total - warmup)
                 : 1.0;
  p = std::min(1.0, std::max(0.0, p));
  return base * 0.5 * (1.0 + std::cos(3.14159265358979323846 * p));
}

// Exponential moving average of parameters, used as sampling weights.
class Ema {
 public:
  Ema(const ParamRefs& params, double decay) : params_(params), decay_(decay) {
    for (Param* p : params_) shadow_.push_back(p->w);
  }

  void update() {
    real d = static_cast<real>(decay_);
    for (size_t i = 0; i < params_.size(); ++i) {
      const real* w = params_[i]->w.data();
      real* s = shadow_[i].data();
      int64_t n = shadow_[i].numel();
      for (int64_t j = 0; j < n; ++j) s[j] = d * s[j] + (real(1) - d) * w[j];
    }
  }

  const std::vector<Tensor>& shadow() const { return shadow_; }
  std::vector<Tensor>& shadow() { return shadow_; }

  void copy_to_params() {
    for (size_t i = 0; i < params_.size(); ++i) params_[i]->w = shadow_[i];
  }

 private:
  ParamRefs params_;
  double decay_;
  std::vector<Tensor> shadow_;
};

}  // namespace ctig::nn
