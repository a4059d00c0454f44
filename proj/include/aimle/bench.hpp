#pragma once

// Synthetic benchmark harness: cosine similarity between estimated and exact
// gradients over sample counts and lambda sweeps, the exact expectation of the
// IMLE update by enumeration, and a closed-loop toy training run.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aimle/controller.hpp"
#include "aimle/estimators.hpp"
#include "aimle/losses.hpp"
#include "aimle/noise.hpp"
#include "aimle/polytope.hpp"

namespace aimle {

enum class EstimatorKind { Exact, Sfe, Ste, GumbelSoftmax, Imle, Aimle };

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::Imle;
  Difference mode = Difference::Central;
  double lambda = 1.0;                 // IMLE step
  NoiseSpec noise = GumbelNoise{1.0};  // STE / IMLE / AIMLE perturbation
  double tau = 1.0;                    // SFE/exact temperature, Gumbel-Softmax relaxation temperature
  AimleController controller{};        // AIMLE initial state
  std::size_t warmup_steps = 2000;     // AIMLE controller steps before the measured call
  std::size_t warmup_samples = 10;     // samples per warm-up step

  // "exact", "sfe", "ste", "gumbel_softmax", "imle_forward", "imle_central",
  // "aimle_forward" or "aimle_central".
  std::string id() const;
  // IMLE: the step; AIMLE: "adaptive"; others: "na".
  std::string lambda_label() const;
  // Temperature reported for this estimator.
  double reported_tau() const;

  static EstimatorConfig from_id(std::string_view id);
};

// One synthetic instance: theta ~ N(0, I), b ~ N(0, I), and the exact gradient
// of E_{z ~ p(z; theta)} ||z - b||^2 at temperature 1. Drawn from stream
// (seed, 0).
struct Problem {
  Vector theta;
  QuadraticLoss loss;
  Vector true_grad;
};

Problem make_problem(const PolytopeSpec& spec, std::uint64_t seed, EnumerationGuard guard = {});

struct EstimatorOutcome {
  GradientEstimate estimate;
  std::optional<double> lambda;          // step used, when the estimator has one
  std::optional<AimleController> controller;
};

// Runs one estimator call. AIMLE first warms its controller up on the same
// problem (warmup_steps calls with warmup_samples each) and then makes the
// measured call with `samples`.
EstimatorOutcome run_estimator(const PolytopeSpec& spec, const Problem& problem,
                               const EstimatorConfig& cfg, std::size_t samples, Rng& rng,
                               EnumerationGuard guard = {});

// <a, b> / (||a|| ||b||), 0 when either vector is zero.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Fraction of components that are exactly zero.
double zero_fraction(std::span<const double> v);

struct BenchRecord {
  std::string estimator;
  std::string spec;
  std::size_t n = 0;
  std::size_t samples = 0;
  std::string lambda;
  double tau = 1.0;
  std::uint64_t seed = 0;
  double cosine = 0.0;
  double l0_norm = 0.0;
  double zero_fraction = 0.0;
  double wall_time_s = 0.0;
};

struct BenchOptions {
  std::size_t jobs = 1;
  bool timing = false;  // wall_time_s stays 0 unless set, keeping output reproducible
  EnumerationGuard guard{};
};

// Seeds 0..count-1 offset by a root seed.
std::vector<std::uint64_t> seed_list(std::uint64_t root, std::size_t count);

// Records ordered by (estimator, S, seed).
std::vector<BenchRecord> bench_cosine(const PolytopeSpec& spec,
                                      const std::vector<EstimatorConfig>& estimators,
                                      const std::vector<std::size_t>& sample_grid,
                                      const std::vector<std::uint64_t>& seeds,
                                      const BenchOptions& options = {});

// `points` evenly spaced values from lo to hi, both endpoints exact.
std::vector<double> lambda_grid(double lo, double hi, std::size_t points);

// IMLE at every lambda in the grid (mode from `imle`), then one row for `aimle`.
std::vector<BenchRecord> sweep_lambda(const PolytopeSpec& spec, const std::vector<double>& lambdas,
                                      std::size_t samples, const std::vector<std::uint64_t>& seeds,
                                      const EstimatorConfig& imle, const EstimatorConfig& aimle,
                                      const BenchOptions& options = {});

struct AggregateRow {
  std::string estimator;
  std::string spec;
  std::size_t n = 0;
  std::size_t samples = 0;
  std::string lambda;
  double tau = 1.0;
  std::size_t count = 0;
  double cosine_mean = 0.0;
  double cosine_std = 0.0;
  double l0_mean = 0.0;
  double zero_fraction_mean = 0.0;
};

// Groups by (estimator, spec, S, lambda, tau) in order of first appearance.
std::vector<AggregateRow> aggregate(const std::vector<BenchRecord>& records);

struct ExpectedImle {
  Vector unscaled;  // mu(theta) - E_{zbar}[mu(theta - lambda grad l(zbar))]
  Vector scaled;    // unscaled / lambda
};

// Exact expectation over zbar ~ p(z; theta) at temperature 1, by enumeration.
ExpectedImle expected_imle_gradient_exact(const PolytopeSpec& spec, std::span<const double> theta,
                                          const Downstream& loss, double lambda,
                                          EnumerationGuard guard = {});

struct TrajectoryRow {
  std::size_t step = 0;
  double loss = 0.0;    // exact expected loss before the update
  double lambda = 0.0;  // step used (0 when not applicable)
  double g_bar = 0.0;   // controller state after the update (AIMLE only)
  double alpha = 0.0;
};

struct ToyRun {
  std::vector<TrajectoryRow> trajectory;
  Vector theta;  // final parameters
  AimleController controller;
  OptimizerState optimizer;
  std::string rng_state;  // estimator engine state after the last step
};

struct ToyOptions {
  std::size_t steps = 1000;
  std::size_t samples = 1;
  std::optional<Vector> initial_theta;  // resume point; defaults to the problem's theta
  std::optional<AimleController> initial_controller;
  std::optional<OptimizerState> initial_optimizer;
  std::optional<std::string> initial_rng_state;  // from ToyRun::rng_state
  std::size_t first_step = 0;                    // numbering offset for resumed runs
  EnumerationGuard guard{};
};

// Closed-loop training of theta on the seed's problem. The exact oracle is
// used only to report the loss (and as the gradient for EstimatorKind::Exact).
// Estimator randomness comes from stream (seed, 1); resuming from a previous
// run's theta, controller, optimizer and rng state continues it exactly.
ToyRun run_toy_training(const PolytopeSpec& spec, const EstimatorConfig& estimator,
                        const OptimizerConfig& optimizer, std::uint64_t seed,
                        const ToyOptions& options = {});

}  // namespace aimle
