#include "diffusion/diffusion.hpp"

#include <cmath>

#include "common/error.hpp"

namespace ctig::diffusion {

double training_loss_at(Unet& model, const Tensor& x0, const Tensor& cond,
                        const std::vector<int>& nsteps, const Tensor& eps,
                        const NoiseSchedule& schedule, bool run_backward,
                        Tensor* dcond_out) {
  const int64_t B = x0.dim(0);
  Tensor xn(x0.shape);
  for (int64_t b = 0; b < B; ++b) {
    int n = nsteps[static_cast<size_t>(b)];
    if (n < 1 || n > schedule.steps)
      throw InvalidArg("training_loss: step out of range: " + std::to_string(n));
    double ab = schedule.alpha_bar(n);
    real sa = static_cast<real>(std::sqrt(ab));
    real sb = static_cast<real>(std::sqrt(1.0 - ab));
    int64_t stride = x0.numel() / B;
    for (int64_t i = 0; i < stride; ++i)
      xn[b * stride + i] = sa * x0[b * stride + i] + sb * eps[b * stride + i];
  }
  Tensor pred = model.forward(xn, nsteps, cond);
  double loss = 0;
  for (int64_t i = 0; i < pred.numel(); ++i) {
    double d = static_cast<double>(pred[i]) - static_cast<double>(eps[i]);
    loss += d * d;
  }
  loss /= static_cast<double>(pred.numel());
  if (run_backward) {
    Tensor dpred(pred.shape);
    real scale = real(2) / static_cast<real>(pred.numel());
    for (int64_t i = 0; i < pred.numel(); ++i) dpred[i] = scale * (pred[i] - eps[i]);
    Tensor dcond = model.backward(dpred);
    if (dcond_out) *dcond_out = std::move(dcond);
  }
  return loss;
}

double training_loss(Unet& model, const Tensor& x0, const Tensor& cond,
                     const NoiseSchedule& schedule, Rng& rng, bool run_backward,
                     Tensor* dcond_out) {
  const int64_t B = x0.dim(0);
  std::vector<int> nsteps(static_cast<size_t>(B));
  for (auto& n : nsteps) n = 1 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(schedule.steps)));
  Tensor eps(x0.shape);
  for (auto& e : eps.v) e = static_cast<real>(rng.normal());
  return training_loss_at(model, x0, cond, nsteps, eps, schedule, run_backward, dcond_out);
}

Tensor sample(Unet& model, const Tensor& cond, const NoiseSchedule& schedule,
              int64_t batch, Rng& rng, double guidance, const Tensor* null_cond) {
  const auto& cfg = model.config();
  Tensor x({batch, cfg.in_ch, cfg.img_h, cfg.img_w});
  for (auto& v : x.v) v = static_cast<real>(rng.normal());
  std::vector<int> nsteps(static_cast<size_t>(batch));
  for (int n = schedule.steps; n >= 1; --n) {
    std::fill(nsteps.begin(), nsteps.end(), n);
    Tensor eps_hat = model.forward(x, nsteps, cond);
    if (guidance != 1.0) {
      if (!null_cond) throw InvalidArg("sample: guidance != 1 requires a null condition");
      Tensor eps_u = model.forward(x, nsteps, *null_cond);
      for (int64_t i = 0; i < eps_hat.numel(); ++i)
        eps_hat[i] = eps_u[i] + static_cast<real>(guidance) * (eps_hat[i] - eps_u[i]);
    }
    x = denoise_step_from_eps(x, n, eps_hat, schedule, rng);
  }
  for (auto& v : x.v) v = std::clamp(v, real(-1), real(1));
  return x;
}

}  // namespace ctig::diffusion
