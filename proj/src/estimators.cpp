#include "aimle/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "aimle/errors.hpp"
#include "aimle/map_solvers.hpp"

namespace aimle {

namespace {

void require_samples(std::size_t samples) {
  if (samples < 1) throw InvalidArgument("sample count must be >= 1");
}

std::size_t nonzeros(std::span<const double> v) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double x) { return x != 0.0; }));
}

GradientEstimate finish(Vector sum, std::size_t samples, double l0_total) {
  GradientEstimate est;
  const double inv = 1.0 / static_cast<double>(samples);
  for (double& g : sum) g *= inv;
  est.grad = std::move(sum);
  est.samples_used = samples;
  est.l0_norm = l0_total * inv;
  est.is_zero = std::all_of(est.grad.begin(), est.grad.end(), [](double g) { return g == 0.0; });
  return est;
}

DownstreamValue call_checked(const Downstream& dgrad, std::span<const double> z) {
  auto value = dgrad(z);
  require_same_size(value.grad.size(), z.size(), "downstream gradient");
  return value;
}

double norm2(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

GradientEstimate estimate_sfe(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                              const StateLoss& loss, std::size_t samples, Rng& rng,
                              EnumerationGuard guard) {
  require_samples(samples);
  const ExactSampler sampler(spec, theta, tau, guard);
  const Vector mu = sampler.distribution().marginals();
  const std::size_t m = theta.size();
  // Per-state score terms are cached: the same state always contributes the
  // same (z - mu) l(z) / tau.
  std::vector<Vector> cached(sampler.distribution().states.size());
  std::vector<double> cached_l0(cached.size(), 0.0);
  Vector sum(m, 0.0);
  double l0_total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const std::size_t idx = sampler.sample_index(rng);
    if (cached[idx].empty()) {
      const auto& z = sampler.distribution().states[idx];
      const double l = loss(z);
      Vector term(m);
      for (std::size_t i = 0; i < m; ++i) term[i] = (z.bits[i] - mu[i]) * l / tau;
      cached_l0[idx] = static_cast<double>(nonzeros(term));
      cached[idx] = std::move(term);
    }
    for (std::size_t i = 0; i < m; ++i) sum[i] += cached[idx][i];
    l0_total += cached_l0[idx];
  }
  return finish(std::move(sum), samples, l0_total);
}

GradientEstimate estimate_ste(const PolytopeSpec& spec, std::span<const double> theta,
                              const NoiseSpec& noise, const Downstream& dgrad,
                              std::size_t samples, Rng& rng) {
  require_samples(samples);
  check_theta(spec, theta);
  validate(noise);
  const std::size_t m = theta.size();
  Vector sum(m, 0.0);
  double l0_total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const Vector z = perturb_and_map(spec, theta, noise, rng).as_vector();
    const auto value = call_checked(dgrad, z);
    for (std::size_t i = 0; i < m; ++i) sum[i] += value.grad[i];
    l0_total += static_cast<double>(nonzeros(value.grad));
  }
  return finish(std::move(sum), samples, l0_total);
}

GradientEstimate estimate_gumbel_softmax(const PolytopeSpec& spec, std::span<const double> theta,
                                         double tau_gs, const Downstream& dgrad,
                                         std::size_t samples, Rng& rng) {
  if (!spec.is_categorical()) throw Unsupported("Gumbel-Softmax requires a categorical spec");
  require_samples(samples);
  check_theta(spec, theta);
  check_temperature(tau_gs);
  const std::size_t m = theta.size();
  Vector sum(m, 0.0);
  Vector relaxed(m);
  double l0_total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      relaxed[i] = (theta[i] + gumbel_quantile(uniform_open(rng))) / tau_gs;
      max_logit = std::max(max_logit, relaxed[i]);
    }
    double total = 0.0;
    for (double& x : relaxed) {
      x = std::exp(x - max_logit);
      total += x;
    }
    for (double& x : relaxed) x /= total;
    const auto value = call_checked(dgrad, relaxed);
    // J^T g with J = (diag(s) - s s^T) / tau: s_i (g_i - <s, g>) / tau.
    const double sg = std::inner_product(relaxed.begin(), relaxed.end(), value.grad.begin(), 0.0);
    std::size_t nz = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double term = relaxed[i] * (value.grad[i] - sg) / tau_gs;
      sum[i] += term;
      nz += term != 0.0;
    }
    l0_total += static_cast<double>(nz);
  }
  return finish(std::move(sum), samples, l0_total);
}

PerturbedBatch perturb_batch(const PolytopeSpec& spec, std::span<const double> theta,
                             const NoiseSpec& noise, const Downstream& dgrad, std::size_t samples,
                             Rng& rng) {
  require_samples(samples);
  check_theta(spec, theta);
  validate(noise);
  const std::size_t m = theta.size();
  PerturbedBatch batch;
  batch.samples = samples;
  batch.dim = m;
  batch.noise.resize(samples * m);
  batch.dgrads.resize(samples * m);
  batch.dgrad_norms.resize(samples);
  batch.states.reserve(samples);
  Vector perturbed(m);
  for (std::size_t s = 0; s < samples; ++s) {
    std::span<double> eps(batch.noise.data() + s * m, m);
    sample_noise_into(noise, eps, rng);
    for (std::size_t i = 0; i < m; ++i) perturbed[i] = theta[i] + eps[i];
    batch.states.push_back(map_solve(spec, perturbed));
    const auto value = call_checked(dgrad, batch.states.back().as_vector());
    std::copy(value.grad.begin(), value.grad.end(), batch.dgrads.begin() + static_cast<std::ptrdiff_t>(s * m));
    batch.dgrad_norms[s] = norm2(value.grad);
  }
  return batch;
}

GradientEstimate imle_backward(const PolytopeSpec& spec, std::span<const double> theta,
                               const PerturbedBatch& batch, double lambda, Difference mode,
                               Vector* per_sample_l0) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidStep("lambda must be finite and >= 0");
  require_same_size(theta.size(), batch.dim, "theta");
  const std::size_t m = batch.dim;
  if (per_sample_l0) per_sample_l0->assign(batch.samples, 0.0);
  if (lambda == 0.0) {
    // Both MAP calls see the same input, so every difference vanishes.
    GradientEstimate est;
    est.grad.assign(m, 0.0);
    est.samples_used = batch.samples;
    return est;
  }
  Vector diff_sum(m, 0.0);
  Vector minus(m);
  Vector plus(m);
  double l0_total = 0.0;
  for (std::size_t s = 0; s < batch.samples; ++s) {
    const auto eps = batch.noise_row(s);
    const auto g = batch.dgrad_row(s);
    for (std::size_t i = 0; i < m; ++i) {
      minus[i] = theta[i] + eps[i] - lambda * g[i];
      plus[i] = theta[i] + eps[i] + lambda * g[i];
    }
    const DiscreteState lower = map_solve(spec, minus);
    const DiscreteState& upper =
        mode == Difference::Forward ? batch.states[s] : map_solve(spec, plus);
    std::size_t nz = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const int d = static_cast<int>(upper.bits[i]) - static_cast<int>(lower.bits[i]);
      diff_sum[i] += d;
      nz += d != 0;
    }
    l0_total += static_cast<double>(nz);
    if (per_sample_l0) (*per_sample_l0)[s] = static_cast<double>(nz);
  }
  const double scale = mode == Difference::Forward ? lambda : 2.0 * lambda;
  for (double& d : diff_sum) d /= scale;
  return finish(std::move(diff_sum), batch.samples, l0_total);
}

GradientEstimate estimate_imle(const PolytopeSpec& spec, std::span<const double> theta,
                               const NoiseSpec& noise, const Downstream& dgrad, double lambda,
                               std::size_t samples, Difference mode, Rng& rng) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidStep("lambda must be > 0");
  const auto batch = perturb_batch(spec, theta, noise, dgrad, samples, rng);
  return imle_backward(spec, theta, batch, lambda, mode);
}

AimleStep estimate_aimle(const PolytopeSpec& spec, std::span<const double> theta,
                         const NoiseSpec& noise, const Downstream& dgrad,
                         const AimleController& controller, std::size_t samples, Difference mode,
                         Rng& rng) {
  controller.validate();
  const auto batch = perturb_batch(spec, theta, noise, dgrad, samples, rng);
  AimleStep step;
  try {
    step.lambda = compute_lambda(controller, norm2(theta), batch.dgrad_norms);
  } catch (const AllDegenerate&) {
    step.lambda = 0.0;
  }
  Vector l0;
  step.estimate = imle_backward(spec, theta, batch, step.lambda, mode, &l0);
  step.controller = update_alpha(update_ema(controller, l0));
  return step;
}

}  // namespace aimle
