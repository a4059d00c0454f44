#pragma once

// Perturbation distributions rho(eps) and the Perturb-and-MAP sampler.

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "aimle/polytope.hpp"
#include "aimle/rng.hpp"

namespace aimle {

struct NoNoise {};

struct GumbelNoise {
  double temperature = 1.0;
};

// eps = (tau / k) * (sum_{i=1}^{s} Gamma(1/k, k/i) - log s).
struct SumOfGammaNoise {
  std::size_t k = 1;
  std::size_t s = 10;
  double temperature = 1.0;
};

using NoiseSpec = std::variant<NoNoise, GumbelNoise, SumOfGammaNoise>;

void validate(const NoiseSpec& noise);

// "none", "gumbel", "gumbel:0.5", "sog:10", "sog:10:20:1.0" (k, s, temperature).
NoiseSpec parse_noise(std::string_view text);
std::string describe(const NoiseSpec& noise);
double noise_temperature(const NoiseSpec& noise);

// Standard Gumbel quantile -log(-log u).
inline double gumbel_quantile(double u) { return -std::log(-std::log(u)); }

void sample_noise_into(const NoiseSpec& noise, std::span<double> out, Rng& rng);
Vector sample_noise(const NoiseSpec& noise, std::size_t m, Rng& rng);

// map_solve(theta + eps) with eps ~ noise.
DiscreteState perturb_and_map(const PolytopeSpec& spec, std::span<const double> theta,
                              const NoiseSpec& noise, Rng& rng);

}  // namespace aimle
