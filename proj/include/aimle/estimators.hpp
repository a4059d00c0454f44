#pragma once

// Gradient estimators for E_{z ~ p(z; theta)}[f(z)] with discrete z: score
// function (SFE), straight-through (STE), Gumbel-Softmax, perturbation-based
// implicit differentiation (IMLE) with forward or central differences, and its
// adaptive variant (AIMLE). Every estimator returns the mean over S samples.

#include <functional>
#include <span>

#include "aimle/controller.hpp"
#include "aimle/noise.hpp"
#include "aimle/polytope.hpp"

namespace aimle {

struct GradientEstimate {
  Vector grad;
  std::size_t samples_used = 0;
  double l0_norm = 0.0;  // mean non-zero components per sample
  bool is_zero = true;
};

// f(z) and its gradient with respect to z, for a (possibly relaxed) state z.
struct DownstreamValue {
  double value = 0.0;
  Vector grad;
};
using Downstream = std::function<DownstreamValue(std::span<const double>)>;

enum class Difference { Forward, Central };

GradientEstimate estimate_sfe(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                              const StateLoss& loss, std::size_t samples, Rng& rng,
                              EnumerationGuard guard = {});

GradientEstimate estimate_ste(const PolytopeSpec& spec, std::span<const double> theta,
                              const NoiseSpec& noise, const Downstream& dgrad,
                              std::size_t samples, Rng& rng);

// Categorical only. Pathwise gradient through s = softmax((theta + g) / tau_gs).
GradientEstimate estimate_gumbel_softmax(const PolytopeSpec& spec, std::span<const double> theta,
                                         double tau_gs, const Downstream& dgrad,
                                         std::size_t samples, Rng& rng);

// Forward pass of the perturbation-based estimators: noise draws, perturbed
// MAP states and downstream gradients at those states. All randomness is
// consumed here, so backward passes at different lambdas are reproducible.
struct PerturbedBatch {
  std::size_t samples = 0;
  std::size_t dim = 0;
  Vector noise;                       // samples x dim, row-major
  std::vector<DiscreteState> states;  // z_i = MAP(theta + eps_i)
  Vector dgrads;                      // samples x dim, row-major
  Vector dgrad_norms;

  std::span<const double> noise_row(std::size_t i) const { return {noise.data() + i * dim, dim}; }
  std::span<const double> dgrad_row(std::size_t i) const { return {dgrads.data() + i * dim, dim}; }
};

PerturbedBatch perturb_batch(const PolytopeSpec& spec, std::span<const double> theta,
                             const NoiseSpec& noise, const Downstream& dgrad, std::size_t samples,
                             Rng& rng);

// Unscaled per-sample MAP differences are in {-1, 0, 1}; their L0 counts are
// written to `per_sample_l0` when non-null. lambda == 0 yields the zero
// estimate.
GradientEstimate imle_backward(const PolytopeSpec& spec, std::span<const double> theta,
                               const PerturbedBatch& batch, double lambda, Difference mode,
                               Vector* per_sample_l0 = nullptr);

// Throws InvalidStep for lambda <= 0.
GradientEstimate estimate_imle(const PolytopeSpec& spec, std::span<const double> theta,
                               const NoiseSpec& noise, const Downstream& dgrad, double lambda,
                               std::size_t samples, Difference mode, Rng& rng);

struct AimleStep {
  GradientEstimate estimate;
  AimleController controller;  // state after the EMA and alpha updates
  double lambda = 0.0;         // step used for this call (pre-update alpha)
};

AimleStep estimate_aimle(const PolytopeSpec& spec, std::span<const double> theta,
                         const NoiseSpec& noise, const Downstream& dgrad,
                         const AimleController& controller, std::size_t samples, Difference mode,
                         Rng& rng);

}  // namespace aimle
