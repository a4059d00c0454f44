#include <doctest.h>

#include <cmath>
#include <map>

#include "aimle/errors.hpp"
#include "aimle/map_solvers.hpp"
#include "aimle/noise.hpp"
#include "support.hpp"

using namespace aimle;

namespace {

double gumbel_cdf(double x) { return std::exp(-std::exp(-x)); }

// TV distance between a sample and Gumbel(0, 1) on 100 equal bins over
// [-4, 10) plus the two tails.
double tv_against_gumbel(const Vector& draws) {
  const double lo = -4.0, hi = 10.0;
  const std::size_t bins = 100;
  std::vector<double> counts(bins + 2, 0.0);
  for (double x : draws) {
    std::size_t b = 0;
    if (x < lo) b = 0;
    else if (x >= hi) b = bins + 1;
    else b = 1 + std::min(bins - 1, static_cast<std::size_t>((x - lo) / (hi - lo) * bins));
    counts[b] += 1.0;
  }
  double tv = 0.0;
  for (std::size_t b = 0; b < bins + 2; ++b) {
    double p = 0.0;
    if (b == 0) p = gumbel_cdf(lo);
    else if (b == bins + 1) p = 1.0 - gumbel_cdf(hi);
    else {
      const double a = lo + (hi - lo) * static_cast<double>(b - 1) / bins;
      p = gumbel_cdf(a + (hi - lo) / bins) - gumbel_cdf(a);
    }
    tv += std::abs(counts[b] / static_cast<double>(draws.size()) - p);
  }
  return 0.5 * tv;
}

}  // namespace

TEST_SUITE("noise_models") {

TEST_CASE("noise spec parsing and validation") {
  CHECK(std::holds_alternative<NoNoise>(parse_noise("none")));
  CHECK(std::get<GumbelNoise>(parse_noise("gumbel")).temperature == 1.0);
  CHECK(std::get<GumbelNoise>(parse_noise("gumbel:0.5")).temperature == 0.5);
  const auto sog = std::get<SumOfGammaNoise>(parse_noise("sog:10:20:2"));
  CHECK(sog.k == 10);
  CHECK(sog.s == 20);
  CHECK(sog.temperature == 2.0);
  CHECK(std::get<SumOfGammaNoise>(parse_noise("sog:3")).s == 10);
  for (const char* bad : {"", "gauss", "gumbel:-1", "gumbel:x", "sog", "sog:0", "sog:2:0"}) {
    CHECK_THROWS_AS(parse_noise(bad), InvalidArgument);
  }
  CHECK_THROWS_AS(validate(NoiseSpec{SumOfGammaNoise{0, 10, 1.0}}), InvalidArgument);
  for (const char* text : {"none", "gumbel:0.5", "sog:10:20:2"}) {
    CHECK(describe(parse_noise(describe(parse_noise(text)))) == describe(parse_noise(text)));
  }
}

TEST_CASE("sample_noise examples") {
  CHECK(std::abs(gumbel_quantile(std::exp(-1.0))) <= 1e-15);
  Rng rng = make_stream(1, 0);
  CHECK(sample_noise(NoNoise{}, 4, rng) == Vector(4, 0.0));
  CHECK(sample_noise(GumbelNoise{0.0}, 3, rng) == Vector(3, 0.0));
}

TEST_CASE("Gumbel mean is the Euler-Mascheroni constant") {
  Rng rng = make_stream(2, 0);
  const auto draws = sample_noise(GumbelNoise{1.0}, 1'000'000, rng);
  double mean = 0.0;
  for (double x : draws) mean += x;
  mean /= static_cast<double>(draws.size());
  CHECK(std::abs(mean - 0.5772156649) <= 0.005);
}

TEST_CASE("noise temperature scales the draw") {
  Rng a = make_stream(3, 0), b = make_stream(3, 0);
  const auto unit = sample_noise(GumbelNoise{1.0}, 50, a);
  const auto scaled = sample_noise(GumbelNoise{2.5}, 50, b);
  for (std::size_t i = 0; i < 50; ++i) CHECK(scaled[i] == doctest::Approx(2.5 * unit[i]).epsilon(1e-14));
}

TEST_CASE("sampling is deterministic given the seed") {
  for (const char* text : {"gumbel", "sog:5:10"}) {
    Rng a = make_stream(4, 7), b = make_stream(4, 7);
    CHECK(sample_noise(parse_noise(text), 20, a) == sample_noise(parse_noise(text), 20, b));
  }
}

TEST_CASE("sum-of-gamma with k = 1 matches Gumbel") {
  Rng rng = make_stream(5, 0);
  const auto draws = sample_noise(SumOfGammaNoise{1, 50, 1.0}, 1'000'000, rng);
  CHECK(tv_against_gumbel(draws) <= 0.02);
}

TEST_CASE("sum-of-gamma mean") {
  for (std::size_t k : {1, 5, 10}) {
    const std::size_t s = 10;
    Rng rng = make_stream(6, k);
    const auto draws = sample_noise(SumOfGammaNoise{k, s, 1.0}, 400'000, rng);
    double mean = 0.0, sq = 0.0;
    for (double x : draws) mean += x;
    mean /= static_cast<double>(draws.size());
    for (double x : draws) sq += (x - mean) * (x - mean);
    const double se = std::sqrt(sq / static_cast<double>(draws.size() - 1) / static_cast<double>(draws.size()));
    double harmonic = 0.0;
    for (std::size_t i = 1; i <= s; ++i) harmonic += 1.0 / static_cast<double>(i);
    const double expected = (harmonic - std::log(static_cast<double>(s))) / static_cast<double>(k);
    CHECK(std::abs(mean - expected) <= 4.0 * se);
  }
}

TEST_CASE("perturb_and_map without noise is map_solve") {
  Rng rng = make_stream(7, 0);
  for (const char* text : {"categorical:6", "ksubset:7:3", "tree:6", "grid:3x3"}) {
    const auto spec = PolytopeSpec::parse(text);
    for (int rep = 0; rep < 20; ++rep) {
      const auto theta = testing::normal_vector(spec.dimension(), rng);
      CHECK(perturb_and_map(spec, theta, NoNoise{}, rng) == map_solve(spec, theta));
      CHECK(perturb_and_map(spec, theta, GumbelNoise{0.0}, rng) == map_solve(spec, theta));
    }
  }
}

TEST_CASE("Gumbel-max is uniform for equal parameters") {
  Rng rng = make_stream(8, 0);
  const auto spec = PolytopeSpec::categorical(3);
  std::map<DiscreteState, int> freq;
  for (int i = 0; i < 100000; ++i) ++freq[perturb_and_map(spec, Vector{0, 0, 0}, GumbelNoise{}, rng)];
  CHECK(freq.size() == 3);
  for (const auto& [z, count] : freq) CHECK(std::abs(count / 100000.0 - 1.0 / 3.0) <= 0.01);
}

TEST_CASE("Gumbel-max samples the softmax") {
  Rng rng = make_stream(9, 0);
  const auto spec = PolytopeSpec::categorical(5);
  for (int rep = 0; rep < 5; ++rep) {
    const auto theta = testing::normal_vector(5, rng);
    Vector freq(5, 0.0);
    for (int i = 0; i < 100000; ++i) {
      const auto z = perturb_and_map(spec, theta, GumbelNoise{}, rng);
      for (std::size_t j = 0; j < 5; ++j) freq[j] += z.bits[j];
    }
    double tv = 0.0;
    for (std::size_t j = 0; j < 5; ++j) {
      tv += std::abs(freq[j] / 100000.0 - pmf(spec, theta, 1.0, testing::one_hot(5, j)));
    }
    CHECK(0.5 * tv <= 0.01);
  }
}

}  // TEST_SUITE
