#pragma once

// Adaptive step-size controller for perturbation-based implicit
// differentiation. lambda is set to a fraction alpha of ||theta|| relative to
// the downstream gradient norm, and alpha is nudged by +/- eta so that the
// moving average of non-zero gradient components per example tracks a target c.

#include <cstdint>
#include <span>

namespace aimle {

struct AimleController {
  double alpha = 0.0;
  double g_bar = 1.0;   // EMA of per-example L0 of the unscaled MAP differences
  double eta = 1e-3;
  double c = 1.0;       // target non-zero components per example
  double gamma = 0.9;   // EMA discount, 0 < gamma <= 1
  std::uint64_t t = 0;

  void validate() const;
  friend bool operator==(const AimleController&, const AimleController&) = default;
};

// lambda = alpha * mean_i(theta_norm / dgrad_norms[i]), skipping zero norms.
// Throws AllDegenerate when every norm is zero and EmptyBatch on an empty list.
double compute_lambda(const AimleController& state, double theta_norm,
                      std::span<const double> dgrad_norms);

// g_bar' = gamma * g_bar + (1 - gamma) * mean(batch_l0); t' = t + 1.
AimleController update_ema(const AimleController& state, std::span<const double> batch_l0);

// alpha' = [alpha + eta]_+ if g_bar <= c, else [alpha - eta]_+.
AimleController update_alpha(const AimleController& state);

}  // namespace aimle
