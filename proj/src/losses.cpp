#include "aimle/losses.hpp"

#include <cmath>
#include <random>

#include "aimle/errors.hpp"

namespace aimle {

DownstreamValue quad_loss(std::span<const double> target, std::span<const double> z) {
  require_same_size(z.size(), target.size(), "state");
  DownstreamValue out;
  out.grad.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = z[i] - target[i];
    out.value += d * d;
    out.grad[i] = 2.0 * d;
  }
  return out;
}

DownstreamValue QuadraticLoss::operator()(std::span<const double> z) const {
  return quad_loss(target, z);
}

double QuadraticLoss::value(const DiscreteState& z) const {
  require_same_size(z.size(), target.size(), "state");
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double d = z.bits[i] - target[i];
    total += d * d;
  }
  return total;
}

StateLoss QuadraticLoss::as_state_loss() const {
  return [self = *this](const DiscreteState& z) { return self.value(z); };
}

Downstream QuadraticLoss::as_downstream() const {
  return [self = *this](std::span<const double> z) { return self(z); };
}

QuadraticLoss random_quadratic_loss(std::size_t m, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  QuadraticLoss loss;
  loss.target.resize(m);
  for (double& b : loss.target) b = normal(rng);
  return loss;
}

void validate(const OptimizerConfig& cfg) {
  const double lr = std::visit([](const auto& c) { return c.lr; }, cfg);
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("learning rate must be > 0");
}

void optimizer_step(const OptimizerConfig& cfg, std::span<double> params,
                    std::span<const double> grad, OptimizerState& state) {
  require_same_size(grad.size(), params.size(), "gradient");
  if (const auto* sgd = std::get_if<Sgd>(&cfg)) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= sgd->lr * grad[i];
    ++state.step;
    return;
  }
  const auto& adam = std::get<Adam>(cfg);
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  require_same_size(state.m.size(), params.size(), "optimizer state");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(adam.beta1, t);
  const double correction2 = 1.0 - std::pow(adam.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = adam.beta1 * state.m[i] + (1.0 - adam.beta1) * grad[i];
    state.v[i] = adam.beta2 * state.v[i] + (1.0 - adam.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    params[i] -= adam.lr * m_hat / (std::sqrt(v_hat) + adam.eps);
  }
}

}  // namespace aimle
