#pragma once

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "aimle/polytope.hpp"
#include "aimle/rng.hpp"

namespace testing {

inline aimle::Vector normal_vector(std::size_t m, aimle::Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  aimle::Vector v(m);
  for (double& x : v) x = dist(rng);
  return v;
}

inline aimle::Vector softmax(const aimle::Vector& theta, double tau = 1.0) {
  double hi = theta[0];
  for (double t : theta) hi = std::max(hi, t);
  aimle::Vector p(theta.size());
  double total = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) total += p[i] = std::exp((theta[i] - hi) / tau);
  for (double& x : p) x /= total;
  return p;
}

inline double norm(const aimle::Vector& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

inline aimle::DiscreteState one_hot(std::size_t m, std::size_t i) {
  auto z = aimle::DiscreteState::zeros(m);
  z.bits[i] = 1;
  return z;
}

inline aimle::DiscreteState bits(std::initializer_list<int> b) {
  std::vector<std::uint8_t> v;
  for (int x : b) v.push_back(static_cast<std::uint8_t>(x));
  return aimle::DiscreteState(v);
}

}  // namespace testing
