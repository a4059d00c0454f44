#pragma once

// Toy downstream losses with analytic gradients and first-order optimizers.

#include <span>
#include <variant>

#include "aimle/estimators.hpp"
#include "aimle/polytope.hpp"

namespace aimle {

// f(z) = ||z - b||^2.
struct QuadraticLoss {
  Vector target;

  DownstreamValue operator()(std::span<const double> z) const;
  double value(const DiscreteState& z) const;

  StateLoss as_state_loss() const;
  Downstream as_downstream() const;
};

DownstreamValue quad_loss(std::span<const double> target, std::span<const double> z);

// b ~ N(0, I).
QuadraticLoss random_quadratic_loss(std::size_t m, Rng& rng);

struct Sgd {
  double lr = 0.1;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

using OptimizerConfig = std::variant<Sgd, Adam>;

struct OptimizerState {
  Vector m;
  Vector v;
  std::uint64_t step = 0;
};

void validate(const OptimizerConfig& cfg);

// In-place descent step on params.
void optimizer_step(const OptimizerConfig& cfg, std::span<double> params,
                    std::span<const double> grad, OptimizerState& state);

}  // namespace aimle
