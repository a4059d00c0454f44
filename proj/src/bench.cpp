#include "aimle/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include "aimle/csv.hpp"
#include "aimle/errors.hpp"
#include "aimle/parallel.hpp"

namespace aimle {

namespace {

double norm2(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

// One estimator call at theta. AIMLE reads and advances *controller.
EstimatorOutcome estimate_once(const PolytopeSpec& spec, std::span<const double> theta,
                               const QuadraticLoss& loss, const EstimatorConfig& cfg,
                               std::size_t samples, Rng& rng, AimleController* controller,
                               EnumerationGuard guard) {
  EstimatorOutcome out;
  switch (cfg.kind) {
    case EstimatorKind::Exact: {
      out.estimate.grad = exact_gradient(spec, theta, cfg.tau, loss.as_state_loss(), guard);
      out.estimate.samples_used = samples;
      const auto nz = std::count_if(out.estimate.grad.begin(), out.estimate.grad.end(),
                                    [](double g) { return g != 0.0; });
      out.estimate.l0_norm = static_cast<double>(nz);
      out.estimate.is_zero = nz == 0;
      break;
    }
    case EstimatorKind::Sfe:
      out.estimate = estimate_sfe(spec, theta, cfg.tau, loss.as_state_loss(), samples, rng, guard);
      break;
    case EstimatorKind::Ste:
      out.estimate = estimate_ste(spec, theta, cfg.noise, loss.as_downstream(), samples, rng);
      break;
    case EstimatorKind::GumbelSoftmax:
      out.estimate = estimate_gumbel_softmax(spec, theta, cfg.tau, loss.as_downstream(), samples, rng);
      break;
    case EstimatorKind::Imle: {
      const auto batch = perturb_batch(spec, theta, cfg.noise, loss.as_downstream(), samples, rng);
      out.estimate = imle_backward(spec, theta, batch, cfg.lambda, cfg.mode);
      out.lambda = cfg.lambda;
      break;
    }
    case EstimatorKind::Aimle: {
      const auto step = estimate_aimle(spec, theta, cfg.noise, loss.as_downstream(), *controller,
                                       samples, cfg.mode, rng);
      out.estimate = step.estimate;
      out.lambda = step.lambda;
      *controller = step.controller;
      out.controller = step.controller;
      break;
    }
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

BenchRecord make_record(const PolytopeSpec& spec, const EstimatorConfig& cfg, std::size_t samples,
                        std::uint64_t seed, const Problem& problem, const EstimatorOutcome& outcome) {
  BenchRecord r;
  r.estimator = cfg.id();
  r.spec = spec.descriptor();
  r.n = spec.dimension();
  r.samples = samples;
  r.lambda = cfg.lambda_label();
  r.tau = cfg.reported_tau();
  r.seed = seed;
  r.cosine = cosine_similarity(outcome.estimate.grad, problem.true_grad);
  r.l0_norm = outcome.estimate.l0_norm;
  r.zero_fraction = zero_fraction(outcome.estimate.grad);
  return r;
}

std::vector<Problem> make_problems(const PolytopeSpec& spec, const std::vector<std::uint64_t>& seeds,
                                   const BenchOptions& options) {
  std::vector<Problem> problems(seeds.size());
  parallel_for(seeds.size(), options.jobs,
               [&](std::size_t i) { problems[i] = make_problem(spec, seeds[i], options.guard); });
  return problems;
}

}  // namespace

std::string EstimatorConfig::id() const {
  const char* suffix = mode == Difference::Forward ? "_forward" : "_central";
  switch (kind) {
    case EstimatorKind::Exact: return "exact";
    case EstimatorKind::Sfe: return "sfe";
    case EstimatorKind::Ste: return "ste";
    case EstimatorKind::GumbelSoftmax: return "gumbel_softmax";
    case EstimatorKind::Imle: return std::string("imle") + suffix;
    case EstimatorKind::Aimle: return std::string("aimle") + suffix;
  }
  return "unknown";
}

std::string EstimatorConfig::lambda_label() const {
  if (kind == EstimatorKind::Imle) return format_real(lambda);
  if (kind == EstimatorKind::Aimle) return "adaptive";
  return "na";
}

double EstimatorConfig::reported_tau() const {
  switch (kind) {
    case EstimatorKind::Ste:
    case EstimatorKind::Imle:
    case EstimatorKind::Aimle:
      return noise_temperature(noise);
    default:
      return tau;
  }
}

EstimatorConfig EstimatorConfig::from_id(std::string_view id) {
  EstimatorConfig cfg;
  if (id == "exact") {
    cfg.kind = EstimatorKind::Exact;
  } else if (id == "sfe") {
    cfg.kind = EstimatorKind::Sfe;
  } else if (id == "ste") {
    cfg.kind = EstimatorKind::Ste;
  } else if (id == "gumbel_softmax") {
    cfg.kind = EstimatorKind::GumbelSoftmax;
  } else if (id == "imle_forward" || id == "imle_central") {
    cfg.kind = EstimatorKind::Imle;
    cfg.mode = id == "imle_forward" ? Difference::Forward : Difference::Central;
  } else if (id == "aimle_forward" || id == "aimle_central") {
    cfg.kind = EstimatorKind::Aimle;
    cfg.mode = id == "aimle_forward" ? Difference::Forward : Difference::Central;
  } else {
    throw InvalidArgument("unknown estimator '" + std::string(id) + "'");
  }
  return cfg;
}

Problem make_problem(const PolytopeSpec& spec, std::uint64_t seed, EnumerationGuard guard) {
  Rng rng = make_stream(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  Problem p;
  p.theta.resize(spec.dimension());
  for (double& t : p.theta) t = normal(rng);
  p.loss = random_quadratic_loss(spec.dimension(), rng);
  p.true_grad = exact_gradient(spec, p.theta, 1.0, p.loss.as_state_loss(), guard);
  return p;
}

EstimatorOutcome run_estimator(const PolytopeSpec& spec, const Problem& problem,
                               const EstimatorConfig& cfg, std::size_t samples, Rng& rng,
                               EnumerationGuard guard) {
  AimleController controller = cfg.controller;
  if (cfg.kind == EstimatorKind::Aimle) {
    controller.validate();
    for (std::size_t step = 0; step < cfg.warmup_steps; ++step) {
      estimate_once(spec, problem.theta, problem.loss, cfg, cfg.warmup_samples, rng, &controller,
                    guard);
    }
  }
  return estimate_once(spec, problem.theta, problem.loss, cfg, samples, rng, &controller, guard);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "cosine operand");
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double c = std::inner_product(a.begin(), a.end(), b.begin(), 0.0) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

double zero_fraction(std::span<const double> v) {
  if (v.empty()) return 1.0;
  const auto zeros = std::count(v.begin(), v.end(), 0.0);
  return static_cast<double>(zeros) / static_cast<double>(v.size());
}

std::vector<std::uint64_t> seed_list(std::uint64_t root, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  std::iota(seeds.begin(), seeds.end(), root);
  return seeds;
}

std::vector<BenchRecord> bench_cosine(const PolytopeSpec& spec,
                                      const std::vector<EstimatorConfig>& estimators,
                                      const std::vector<std::size_t>& sample_grid,
                                      const std::vector<std::uint64_t>& seeds,
                                      const BenchOptions& options) {
  const auto problems = make_problems(spec, seeds, options);
  const std::size_t per_estimator = sample_grid.size() * seeds.size();
  std::vector<BenchRecord> records(estimators.size() * per_estimator);
  parallel_for(records.size(), options.jobs, [&](std::size_t task) {
    const std::size_t e = task / per_estimator;
    const std::size_t s = (task % per_estimator) / seeds.size();
    const std::size_t k = task % seeds.size();
    // Stream 0 is the problem; estimator e at grid point s uses 1 + (e << 32 | s).
    Rng rng = make_stream(seeds[k], 1 + ((static_cast<std::uint64_t>(e) << 32) | s));
    const auto start = std::chrono::steady_clock::now();
    const auto outcome = run_estimator(spec, problems[k], estimators[e], sample_grid[s], rng,
                                       options.guard);
    records[task] = make_record(spec, estimators[e], sample_grid[s], seeds[k], problems[k], outcome);
    if (options.timing) records[task].wall_time_s = seconds_since(start);
  });
  return records;
}

std::vector<double> lambda_grid(double lo, double hi, std::size_t points) {
  if (points == 0) return {};
  if (points == 1) return {lo};
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  grid.back() = hi;
  return grid;
}

std::vector<BenchRecord> sweep_lambda(const PolytopeSpec& spec, const std::vector<double>& lambdas,
                                      std::size_t samples, const std::vector<std::uint64_t>& seeds,
                                      const EstimatorConfig& imle, const EstimatorConfig& aimle,
                                      const BenchOptions& options) {
  if (imle.kind != EstimatorKind::Imle) throw InvalidArgument("sweep_lambda needs an IMLE config");
  if (aimle.kind != EstimatorKind::Aimle) throw InvalidArgument("sweep_lambda needs an AIMLE config");
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw InvalidStep("sweep lambdas must be >= 0");
  }
  std::vector<EstimatorConfig> configs;
  for (double l : lambdas) {
    auto cfg = imle;
    cfg.lambda = l;
    configs.push_back(cfg);
  }
  configs.push_back(aimle);
  return bench_cosine(spec, configs, {samples}, seeds, options);
}

std::vector<AggregateRow> aggregate(const std::vector<BenchRecord>& records) {
  using Key = std::tuple<std::string, std::string, std::size_t, std::string, double>;
  std::map<Key, std::size_t> index;
  std::vector<AggregateRow> rows;
  std::vector<std::vector<double>> cosines;
  for (const auto& r : records) {
    const Key key{r.estimator, r.spec, r.samples, r.lambda, r.tau};
    auto [it, inserted] = index.try_emplace(key, rows.size());
    if (inserted) {
      AggregateRow row;
      row.estimator = r.estimator;
      row.spec = r.spec;
      row.n = r.n;
      row.samples = r.samples;
      row.lambda = r.lambda;
      row.tau = r.tau;
      rows.push_back(row);
      cosines.emplace_back();
    }
    auto& row = rows[it->second];
    ++row.count;
    row.cosine_mean += r.cosine;
    row.l0_mean += r.l0_norm;
    row.zero_fraction_mean += r.zero_fraction;
    cosines[it->second].push_back(r.cosine);
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto& row = rows[i];
    const double n = static_cast<double>(row.count);
    row.cosine_mean /= n;
    row.l0_mean /= n;
    row.zero_fraction_mean /= n;
    double ss = 0.0;
    for (double c : cosines[i]) ss += (c - row.cosine_mean) * (c - row.cosine_mean);
    row.cosine_std = row.count > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  }
  return rows;
}

ExpectedImle expected_imle_gradient_exact(const PolytopeSpec& spec, std::span<const double> theta,
                                          const Downstream& loss, double lambda,
                                          EnumerationGuard guard) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InvalidStep("lambda must be > 0");
  const auto dist = exact_distribution(spec, theta, 1.0, guard);
  const std::size_t m = theta.size();
  ExpectedImle out;
  const Vector mu = dist.marginals();
  out.unscaled.assign(m, 0.0);
  Vector shifted(m);
  for (std::size_t s = 0; s < dist.states.size(); ++s) {
    const auto value = loss(dist.states[s].as_vector());
    require_same_size(value.grad.size(), m, "loss gradient");
    for (std::size_t i = 0; i < m; ++i) shifted[i] = theta[i] - lambda * value.grad[i];
    const Vector mu_shifted = marginals(spec, shifted, 1.0, guard);
    for (std::size_t i = 0; i < m; ++i) out.unscaled[i] += dist.probabilities[s] * (mu[i] - mu_shifted[i]);
  }
  out.scaled = out.unscaled;
  for (double& x : out.scaled) x /= lambda;
  return out;
}

ToyRun run_toy_training(const PolytopeSpec& spec, const EstimatorConfig& estimator,
                        const OptimizerConfig& optimizer, std::uint64_t seed,
                        const ToyOptions& options) {
  validate(optimizer);
  const Problem problem = make_problem(spec, seed, options.guard);
  ToyRun run;
  run.theta = options.initial_theta.value_or(problem.theta);
  check_theta(spec, run.theta);
  run.controller = options.initial_controller.value_or(estimator.controller);
  run.controller.validate();
  run.optimizer = options.initial_optimizer.value_or(OptimizerState{});
  const auto state_loss = problem.loss.as_state_loss();
  Rng rng = make_stream(seed, 1);
  if (options.initial_rng_state) {
    std::istringstream in(*options.initial_rng_state);
    in >> rng;
    if (!in) throw InvalidArgument("bad rng state");
  }
  run.trajectory.reserve(options.steps);
  for (std::size_t step = 0; step < options.steps; ++step) {
    TrajectoryRow row;
    row.step = options.first_step + step;
    row.loss = exact_expected_loss(spec, run.theta, 1.0, state_loss, options.guard);
    const auto outcome = estimate_once(spec, run.theta, problem.loss, estimator, options.samples, rng,
                                       &run.controller, options.guard);
    row.lambda = outcome.lambda.value_or(0.0);
    row.g_bar = run.controller.g_bar;
    row.alpha = run.controller.alpha;
    optimizer_step(optimizer, run.theta, outcome.estimate.grad, run.optimizer);
    run.trajectory.push_back(row);
  }
  std::ostringstream state;
  state << rng;
  run.rng_state = state.str();
  return run;
}

}  // namespace aimle
