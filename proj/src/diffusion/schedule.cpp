#include "diffusion/schedule.hpp"

#include <cmath>

#include "common/error.hpp"

namespace ctig::diffusion {

nlohmann::ordered_json NoiseSchedule::to_json() const {
  nlohmann::ordered_json j;
  j["steps"] = steps;
  j["kind"] = kind;
  return j;
}

NoiseSchedule NoiseSchedule::from_json(const nlohmann::ordered_json& j) {
  return make_schedule(j.at("steps").get<int>(), j.at("kind").get<std::string>());
}

NoiseSchedule make_schedule(int steps, const std::string& kind) {
  if (steps < 2) throw InvalidArg("make_schedule: steps must be >= 2");
  if (kind != "linear" && kind != "cosine")
    throw InvalidArg("make_schedule: unknown kind: " + kind);

  NoiseSchedule s;
  s.steps = steps;
  s.kind = kind;
  s.betas.assign(static_cast<size_t>(steps) + 1, 0.0);
  s.alphas.assign(static_cast<size_t>(steps) + 1, 0.0);
  s.alpha_bars.assign(static_cast<size_t>(steps) + 1, 1.0);

  if (kind == "linear") {
    // classic 1e-4..0.02 range defined at 1000 steps, rescaled to N
    double scale = 1000.0 / static_cast<double>(steps);
    double lo = 1e-4 * scale, hi = 0.02 * scale;
    for (int n = 1; n <= steps; ++n) {
      double b = lo + (hi - lo) * static_cast<double>(n - 1) / static_cast<double>(steps - 1);
      s.betas[static_cast<size_t>(n)] = std::min(b, 0.999);
    }
  } else {
    // squared-cosine alpha-bar curve, betas clipped at 0.999
    const double off = 0.008;
    auto f = [off](double t) {
      double a = (t + off) / (1.0 + off) * 1.5707963267948966;
      double c = std::cos(a);
      return c * c;
    };
    double f0 = f(0.0);
    double prev = 1.0;
    for (int n = 1; n <= steps; ++n) {
      double ab = f(static_cast<double>(n) / static_cast<double>(steps)) / f0;
      double b = 1.0 - ab / prev;
      s.betas[static_cast<size_t>(n)] = std::min(std::max(b, 1e-8), 0.999);
      prev = ab;
    }
  }

  for (int n = 1; n <= steps; ++n) {
    s.alphas[static_cast<size_t>(n)] = 1.0 - s.betas[static_cast<size_t>(n)];
    s.alpha_bars[static_cast<size_t>(n)] =
        s.alpha_bars[static_cast<size_t>(n - 1)] * s.alphas[static_cast<size_t>(n)];
  }
  for (int n = 1; n <= steps; ++n)
    if (!(s.alpha_bars[static_cast<size_t>(n)] < s.alpha_bars[static_cast<size_t>(n - 1)]))
      throw RuntimeFault("make_schedule: alpha_bar is not strictly decreasing");
  return s;
}

Tensor forward_sample(const Tensor& x0, int n, const Tensor& eps,
                      const NoiseSchedule& schedule) {
  if (n < 1 || n > schedule.steps)
    throw InvalidArg("forward_sample: step out of range: " + std::to_string(n));
  if (!x0.same_shape(eps)) throw InvalidArg("forward_sample: shape mismatch");
  double ab = schedule.alpha_bar(n);
  real a = static_cast<real>(std::sqrt(ab));
  real b = static_cast<real>(std::sqrt(1.0 - ab));
  Tensor x(x0.shape);
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = a * x0[i] + b * eps[i];
  return x;
}

Tensor denoise_step_from_eps(const Tensor& x_n, int n, const Tensor& eps_hat,
                             const NoiseSchedule& schedule, Rng& rng) {
  if (n < 1 || n > schedule.steps)
    throw InvalidArg("denoise_step: step out of range: " + std::to_string(n));
  if (!x_n.same_shape(eps_hat)) throw InvalidArg("denoise_step: shape mismatch");
  double beta = schedule.beta(n);
  double coef = beta / std::sqrt(1.0 - schedule.alpha_bar(n));
  double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha(n));
  double sigma = n > 1 ? std::sqrt(beta) : 0.0;
  Tensor x(x_n.shape);
  for (int64_t i = 0; i < x.numel(); ++i) {
    double mu = (static_cast<double>(x_n[i]) - coef * static_cast<double>(eps_hat[i])) *
                inv_sqrt_alpha;
    double z = sigma > 0 ? rng.normal() : 0.0;
    x[i] = static_cast<real>(mu + sigma * z);
  }
  return x;
}

}  // namespace ctig::diffusion
