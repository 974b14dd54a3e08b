#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "common/tensor.hpp"

namespace ctig::diffusion {

// Per-step noise schedule. Arrays are 1-based: betas[n], alphas[n],
// alpha_bars[n] for n in 1..steps, with alpha_bars[0] == 1. alpha_bars is
// computed as the running product so alpha_bars[n] == alpha_bars[n-1] *
// alphas[n] holds exactly as stored.
struct NoiseSchedule {
  int steps = 0;
  std::string kind;  // "linear" | "cosine"
  std::vector<double> betas, alphas, alpha_bars;

  double beta(int n) const { return betas[static_cast<size_t>(n)]; }
  double alpha(int n) const { return alphas[static_cast<size_t>(n)]; }
  double alpha_bar(int n) const { return alpha_bars[static_cast<size_t>(n)]; }

  nlohmann::ordered_json to_json() const;
  static NoiseSchedule from_json(const nlohmann::ordered_json& j);
};

NoiseSchedule make_schedule(int steps, const std::string& kind);

// Closed-form forward marginal: x_n = sqrt(abar_n) x0 + sqrt(1-abar_n) eps.
Tensor forward_sample(const Tensor& x0, int n, const Tensor& eps,
                      const NoiseSchedule& schedule);

// One ancestral step given the model's noise prediction:
//   mu = (x_n - beta_n/sqrt(1-abar_n) * eps_hat) / sqrt(alpha_n)
//   x_{n-1} = mu + sqrt(beta_n) * z,  z = 0 at n = 1.
Tensor denoise_step_from_eps(const Tensor& x_n, int n, const Tensor& eps_hat,
                             const NoiseSchedule& schedule, Rng& rng);

}  // namespace ctig::diffusion
