#pragma once

// Constrained discrete exponential families p(z; theta) ∝ exp(<z, theta> / tau)
// over the binary vertices z of an integral polytope, with exact
// enumeration-based oracles for small state spaces.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "aimle/rng.hpp"

namespace aimle {

using Vector = std::vector<double>;

enum class Neighborhood { Four, Eight };

struct Categorical {
  std::size_t n = 0;
  friend bool operator==(const Categorical&, const Categorical&) = default;
};

struct KSubset {
  std::size_t n = 0;
  std::size_t k = 0;
  friend bool operator==(const KSubset&, const KSubset&) = default;
};

// Undirected complete graph on `vertices` nodes; one indicator per edge (i, j),
// i < j, in lexicographic order.
struct SpanningTree {
  std::size_t vertices = 0;
  friend bool operator==(const SpanningTree&, const SpanningTree&) = default;
};

// One indicator per cell, row-major. States are the cell sets of simple paths
// from the top-left to the bottom-right cell.
struct GridPath {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Neighborhood neighborhood = Neighborhood::Four;
  friend bool operator==(const GridPath&, const GridPath&) = default;
};

class PolytopeSpec {
 public:
  using Variant = std::variant<Categorical, KSubset, SpanningTree, GridPath>;

  static PolytopeSpec categorical(std::size_t n);
  static PolytopeSpec k_subset(std::size_t n, std::size_t k);
  static PolytopeSpec spanning_tree(std::size_t vertices);
  static PolytopeSpec grid_path(std::size_t rows, std::size_t cols,
                                Neighborhood neighborhood = Neighborhood::Four);

  // Parses the descriptor format produced by descriptor(), e.g. "categorical:50",
  // "ksubset:6:2", "tree:5", "grid:3x3" or "grid8:3x3".
  static PolytopeSpec parse(std::string_view text);

  std::size_t dimension() const;
  std::string descriptor() const;
  const Variant& variant() const { return variant_; }

  // True for Categorical and for KSubset with k == 1.
  bool is_categorical() const;
  // Number of ones in every state, when it is fixed by the variant.
  std::size_t subset_size() const;

  friend bool operator==(const PolytopeSpec&, const PolytopeSpec&) = default;

 private:
  explicit PolytopeSpec(Variant v) : variant_(v) {}
  Variant variant_;
};

struct DiscreteState {
  std::vector<std::uint8_t> bits;

  DiscreteState() = default;
  explicit DiscreteState(std::vector<std::uint8_t> b) : bits(std::move(b)) {}
  static DiscreteState zeros(std::size_t m) { return DiscreteState(std::vector<std::uint8_t>(m, 0)); }

  std::size_t size() const { return bits.size(); }
  std::size_t count() const;
  Vector as_vector() const;

  friend auto operator<=>(const DiscreteState&, const DiscreteState&) = default;
};

std::string to_string(const DiscreteState& z);

struct EnumerationGuard {
  std::size_t max_states = 1'000'000;
};

// Edge (i, j), i < j, of the complete graph on v vertices -> indicator index.
std::size_t edge_index(std::size_t i, std::size_t j, std::size_t vertices);
std::vector<std::pair<std::size_t, std::size_t>> edge_list(std::size_t vertices);

bool is_member(const PolytopeSpec& spec, const DiscreteState& z);

void check_theta(const PolytopeSpec& spec, std::span<const double> theta);
void check_temperature(double tau);

// Every state exactly once, in ascending lexicographic order of the bit vector.
// Throws GuardExceeded if the state count exceeds the guard, Unsupported for
// SpanningTree with more than 9 vertices or GridPath larger than 5x5.
std::vector<DiscreteState> enumerate_states(const PolytopeSpec& spec,
                                            EnumerationGuard guard = {});

double weight(const DiscreteState& z, std::span<const double> theta);

// States and their probabilities at temperature tau, built once and reused by
// the other exact oracles.
struct ExactDistribution {
  std::vector<DiscreteState> states;
  Vector probabilities;
  double log_partition = 0.0;

  Vector marginals() const;
  double expectation(const std::function<double(const DiscreteState&)>& f) const;
};

ExactDistribution exact_distribution(const PolytopeSpec& spec, std::span<const double> theta,
                                     double tau, EnumerationGuard guard = {});

double log_partition(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                     EnumerationGuard guard = {});

enum class PmfMode { Lenient, Strict };

// Zero for infeasible z in lenient mode; InfeasibleState in strict mode.
double pmf(const PolytopeSpec& spec, std::span<const double> theta, double tau,
           const DiscreteState& z, PmfMode mode = PmfMode::Lenient, EnumerationGuard guard = {});

Vector marginals(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                 EnumerationGuard guard = {});

// Draws exact samples from p(z; theta) by inverse-CDF over the enumerated states.
class ExactSampler {
 public:
  ExactSampler(const PolytopeSpec& spec, std::span<const double> theta, double tau,
               EnumerationGuard guard = {});

  const DiscreteState& operator()(Rng& rng) const;
  std::size_t sample_index(Rng& rng) const;
  const ExactDistribution& distribution() const { return dist_; }

 private:
  ExactDistribution dist_;
  Vector cdf_;
};

DiscreteState sample_exact(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                           Rng& rng, EnumerationGuard guard = {});

using StateLoss = std::function<double(const DiscreteState&)>;

double exact_expected_loss(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                           const StateLoss& loss, EnumerationGuard guard = {});

// (1/tau) (E[z l(z)] - E[l(z)] mu(theta)).
Vector exact_gradient(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                      const StateLoss& loss, EnumerationGuard guard = {});

}  // namespace aimle
