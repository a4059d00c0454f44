#include "aimle/noise.hpp"

#include <charconv>
#include <cmath>
#include <random>

#include "aimle/errors.hpp"
#include "aimle/map_solvers.hpp"

namespace aimle {

namespace {

double parse_real(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InvalidArgument("bad number '" + std::string(text) + "' in noise spec");
  }
  return value;
}

}  // namespace

void validate(const NoiseSpec& noise) {
  if (const auto* g = std::get_if<GumbelNoise>(&noise)) {
    if (!(g->temperature >= 0.0) || !std::isfinite(g->temperature)) {
      throw InvalidArgument("noise temperature must be >= 0");
    }
  } else if (const auto* s = std::get_if<SumOfGammaNoise>(&noise)) {
    if (!(s->temperature >= 0.0) || !std::isfinite(s->temperature)) {
      throw InvalidArgument("noise temperature must be >= 0");
    }
    if (s->k < 1 || s->s < 1) throw InvalidArgument("sum-of-gamma requires k >= 1 and s >= 1");
  }
}

NoiseSpec parse_noise(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(':', start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  NoiseSpec noise;
  if (parts[0] == "none" && parts.size() == 1) {
    noise = NoNoise{};
  } else if (parts[0] == "gumbel" && parts.size() <= 2) {
    noise = GumbelNoise{parts.size() == 2 ? parse_real(parts[1]) : 1.0};
  } else if (parts[0] == "sog" && parts.size() >= 2 && parts.size() <= 4) {
    SumOfGammaNoise sog;
    sog.k = static_cast<std::size_t>(parse_real(parts[1]));
    if (parts.size() >= 3) sog.s = static_cast<std::size_t>(parse_real(parts[2]));
    if (parts.size() == 4) sog.temperature = parse_real(parts[3]);
    noise = sog;
  } else {
    throw InvalidArgument("unknown noise spec '" + std::string(text) + "'");
  }
  validate(noise);
  return noise;
}

std::string describe(const NoiseSpec& noise) {
  if (std::holds_alternative<NoNoise>(noise)) return "none";
  auto num = [](double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
  };
  if (const auto* g = std::get_if<GumbelNoise>(&noise)) return "gumbel:" + num(g->temperature);
  const auto& s = std::get<SumOfGammaNoise>(noise);
  return "sog:" + std::to_string(s.k) + ":" + std::to_string(s.s) + ":" + num(s.temperature);
}

double noise_temperature(const NoiseSpec& noise) {
  if (const auto* g = std::get_if<GumbelNoise>(&noise)) return g->temperature;
  if (const auto* s = std::get_if<SumOfGammaNoise>(&noise)) return s->temperature;
  return 0.0;
}

void sample_noise_into(const NoiseSpec& noise, std::span<double> out, Rng& rng) {
  if (std::holds_alternative<NoNoise>(noise)) {
    std::fill(out.begin(), out.end(), 0.0);
  } else if (const auto* g = std::get_if<GumbelNoise>(&noise)) {
    for (double& x : out) x = g->temperature * gumbel_quantile(uniform_open(rng));
  } else {
    const auto& sog = std::get<SumOfGammaNoise>(noise);
    const double k = static_cast<double>(sog.k);
    const double log_s = std::log(static_cast<double>(sog.s));
    for (double& x : out) {
      double sum = 0.0;
      for (std::size_t i = 1; i <= sog.s; ++i) {
        std::gamma_distribution<double> gamma(1.0 / k, k / static_cast<double>(i));
        sum += gamma(rng);
      }
      x = sog.temperature / k * (sum - log_s);
    }
  }
}

Vector sample_noise(const NoiseSpec& noise, std::size_t m, Rng& rng) {
  Vector out(m);
  sample_noise_into(noise, out, rng);
  return out;
}

DiscreteState perturb_and_map(const PolytopeSpec& spec, std::span<const double> theta,
                              const NoiseSpec& noise, Rng& rng) {
  require_same_size(theta.size(), spec.dimension(), "theta");
  if (std::holds_alternative<NoNoise>(noise)) return map_solve(spec, theta);
  Vector perturbed = sample_noise(noise, theta.size(), rng);
  for (std::size_t i = 0; i < theta.size(); ++i) perturbed[i] += theta[i];
  return map_solve(spec, perturbed);
}

}  // namespace aimle
