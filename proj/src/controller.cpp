#include "aimle/controller.hpp"

#include <algorithm>
#include <cmath>

#include "aimle/errors.hpp"

namespace aimle {

void AimleController::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidArgument("alpha must be >= 0");
  if (!(g_bar >= 0.0) || !std::isfinite(g_bar)) throw InvalidArgument("g_bar must be >= 0");
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw InvalidArgument("eta must be >= 0");
  if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("c must be > 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma must lie in (0, 1]");
}

double compute_lambda(const AimleController& state, double theta_norm,
                      std::span<const double> dgrad_norms) {
  if (dgrad_norms.empty()) throw EmptyBatch("compute_lambda needs at least one gradient norm");
  double sum = 0.0;
  std::size_t used = 0;
  for (double norm : dgrad_norms) {
    if (norm == 0.0) continue;
    sum += theta_norm / norm;
    ++used;
  }
  if (used == 0) throw AllDegenerate("every downstream gradient has zero norm");
  return std::max(0.0, state.alpha * sum / static_cast<double>(used));
}

AimleController update_ema(const AimleController& state, std::span<const double> batch_l0) {
  if (batch_l0.empty()) throw EmptyBatch("update_ema needs a non-empty batch");
  double mean = 0.0;
  for (double l0 : batch_l0) mean += l0;
  mean /= static_cast<double>(batch_l0.size());
  AimleController next = state;
  next.g_bar = state.gamma * state.g_bar + (1.0 - state.gamma) * mean;
  next.t = state.t + 1;
  return next;
}

AimleController update_alpha(const AimleController& state) {
  AimleController next = state;
  const double step = state.g_bar <= state.c ? state.eta : -state.eta;
  next.alpha = std::max(0.0, state.alpha + step);
  return next;
}

}  // namespace aimle
