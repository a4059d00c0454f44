#include <doctest.h>

#include <cmath>

#include "aimle/errors.hpp"
#include "aimle/losses.hpp"
#include "support.hpp"

using namespace aimle;

TEST_SUITE("losses_optim") {

TEST_CASE("quad_loss examples") {
  const auto at_e1 = quad_loss(Vector{0, 0, 0}, Vector{1, 0, 0});
  CHECK(at_e1.value == 1.0);
  CHECK(at_e1.grad == Vector{2, 0, 0});
  const Vector b{0.3, -1.2, 2.0};
  const auto at_b = quad_loss(b, b);
  CHECK(at_b.value == 0.0);
  CHECK(at_b.grad == Vector{0, 0, 0});
  CHECK_THROWS_AS(quad_loss(b, Vector{1, 0}), DimensionMismatch);
}

TEST_CASE("quad_loss gradient matches finite differences") {
  Rng rng = make_stream(31, 0);
  for (int rep = 0; rep < 50; ++rep) {
    const auto b = testing::normal_vector(7, rng);
    auto z = testing::normal_vector(7, rng);
    const auto grad = quad_loss(b, z).grad;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double saved = z[i], h = 1e-6;
      z[i] = saved + h;
      const double up = quad_loss(b, z).value;
      z[i] = saved - h;
      const double down = quad_loss(b, z).value;
      z[i] = saved;
      CHECK(std::abs((up - down) / (2 * h) - grad[i]) <= 1e-6);
    }
  }
}

TEST_CASE("QuadraticLoss adapters agree") {
  const QuadraticLoss loss{Vector{0.5, -0.5, 1.0}};
  const auto z = testing::one_hot(3, 1);
  CHECK(loss.value(z) == quad_loss(loss.target, z.as_vector()).value);
  CHECK(loss.as_state_loss()(z) == loss.value(z));
  CHECK(loss.as_downstream()(z.as_vector()).grad == quad_loss(loss.target, z.as_vector()).grad);
}

TEST_CASE("SGD examples") {
  Vector theta{1, 1};
  OptimizerState state;
  optimizer_step(Sgd{0.1}, theta, Vector{1, 0}, state);
  CHECK(theta[0] == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(theta[1] == 1.0);
  const Vector before = theta;
  optimizer_step(Sgd{0.1}, theta, Vector{0, 0}, state);
  CHECK(theta == before);
}

TEST_CASE("Adam first step moves each component by about lr") {
  Vector theta{0.5, -2.0, 3.0};
  OptimizerState state;
  const Adam adam;
  optimizer_step(adam, theta, Vector{1.0, 1.0, 1.0}, state);
  CHECK(theta[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
  CHECK(theta[1] == doctest::Approx(-2.0 - 1e-3).epsilon(1e-6));
  CHECK(state.step == 1);
  Vector neg{0.0};
  OptimizerState fresh;
  optimizer_step(Adam{0.01}, neg, Vector{-250.0}, fresh);
  CHECK(neg[0] == doctest::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("Adam follows the bias-corrected recursion") {
  const Adam adam{0.05, 0.8, 0.95, 1e-8};
  Vector theta{1.0};
  OptimizerState state;
  double m = 0.0, v = 0.0, x = 1.0;
  for (int t = 1; t <= 20; ++t) {
    const double g = 2.0 * x - 0.3;
    optimizer_step(adam, theta, Vector{2.0 * theta[0] - 0.3}, state);
    m = 0.8 * m + 0.2 * g;
    v = 0.95 * v + 0.05 * g * g;
    x -= 0.05 * (m / (1 - std::pow(0.8, t))) / (std::sqrt(v / (1 - std::pow(0.95, t))) + 1e-8);
    CHECK(theta[0] == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("optimizer validation") {
  CHECK_THROWS_AS(validate(OptimizerConfig{Sgd{0.0}}), InvalidArgument);
  CHECK_THROWS_AS(validate(OptimizerConfig{Adam{-1.0}}), InvalidArgument);
  Vector theta{1.0};
  OptimizerState state;
  CHECK_THROWS_AS(optimizer_step(Sgd{}, theta, Vector{1, 2}, state), DimensionMismatch);
}

TEST_CASE("random quadratic loss is standard normal") {
  Rng rng = make_stream(32, 0);
  const auto loss = random_quadratic_loss(20000, rng);
  double mean = 0.0, sq = 0.0;
  for (double b : loss.target) mean += b;
  mean /= 20000.0;
  for (double b : loss.target) sq += (b - mean) * (b - mean);
  CHECK(std::abs(mean) < 0.03);
  CHECK(std::abs(sq / 19999.0 - 1.0) < 0.04);
}

}  // TEST_SUITE
