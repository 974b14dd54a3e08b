#pragma once

#include "diffusion/schedule.hpp"
#include "diffusion/unet.hpp"

namespace ctig::diffusion {

// Noise-prediction loss at fixed (n, eps): mean squared error between eps
// and the model prediction at forward_sample(x0, n, eps). When
// `run_backward`, parameter grads accumulate and the gradient w.r.t. the
// condition concat is written to dcond_out.
double training_loss_at(Unet& model, const Tensor& x0, const Tensor& cond,
                        const std::vector<int>& nsteps, const Tensor& eps,
                        const NoiseSchedule& schedule, bool run_backward = false,
                        Tensor* dcond_out = nullptr);

// The stochastic training objective: per-sample n uniform on {1..N} and
// standard normal eps, both drawn from `rng`.
double training_loss(Unet& model, const Tensor& x0, const Tensor& cond,
                     const NoiseSchedule& schedule, Rng& rng, bool run_backward = false,
                     Tensor* dcond_out = nullptr);

// Ancestral sampling from pure noise, descending n = N..1, clamped to
// [-1, 1] at the end. cond: (B, 3D). guidance != 1 blends conditional and
// null-condition predictions (eps_u + w * (eps_c - eps_u)).
Tensor sample(Unet& model, const Tensor& cond, const NoiseSchedule& schedule,
              int64_t batch, Rng& rng, double guidance = 1.0,
              const Tensor* null_cond = nullptr);

}  // namespace ctig::diffusion
