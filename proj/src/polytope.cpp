#include "aimle/polytope.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "aimle/errors.hpp"

namespace aimle {

void require_same_size(std::size_t lhs, std::size_t rhs, const char* what) {
  if (lhs != rhs) {
    throw DimensionMismatch(std::string(what) + ": expected length " + std::to_string(rhs) +
                            ", got " + std::to_string(lhs));
  }
}

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t parse_count(std::string_view text, std::string_view whole) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw InvalidArgument("bad polytope descriptor '" + std::string(whole) + "'");
  }
  return value;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

// Saturating binomial coefficient; returns `cap + 1` once the value exceeds cap.
std::size_t binomial_capped(std::size_t n, std::size_t k, std::size_t cap) {
  k = std::min(k, n - k);
  long double value = 1.0L;
  for (std::size_t i = 1; i <= k; ++i) {
    value = value * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    if (value > static_cast<long double>(cap)) return cap + 1;
  }
  return static_cast<std::size_t>(std::llround(value));
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  bool unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[b] = a;
    return true;
  }
};

void guard_check(std::size_t count, EnumerationGuard guard, const PolytopeSpec& spec) {
  if (count > guard.max_states) {
    throw GuardExceeded(spec.descriptor() + " has more than " + std::to_string(guard.max_states) +
                        " states");
  }
}

std::vector<DiscreteState> enumerate_subsets(std::size_t n, std::size_t k) {
  // Lexicographically ascending bit vectors with k ones: start from the
  // smallest (ones at the end) and step with std::next_permutation.
  std::vector<std::uint8_t> bits(n, 0);
  std::fill(bits.end() - static_cast<std::ptrdiff_t>(k), bits.end(), 1);
  std::vector<DiscreteState> out;
  do {
    out.emplace_back(bits);
  } while (std::next_permutation(bits.begin(), bits.end()));
  return out;
}

void enumerate_trees(const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                     std::size_t vertices, std::size_t next, std::size_t chosen, UnionFind uf,
                     std::vector<std::uint8_t>& bits, std::vector<DiscreteState>& out) {
  if (chosen + 1 == vertices) {
    out.emplace_back(bits);
    return;
  }
  const std::size_t remaining_needed = vertices - 1 - chosen;
  for (std::size_t e = next; e + remaining_needed <= edges.size(); ++e) {
    UnionFind branch = uf;
    if (!branch.unite(edges[e].first, edges[e].second)) continue;
    bits[e] = 1;
    enumerate_trees(edges, vertices, e + 1, chosen + 1, std::move(branch), bits, out);
    bits[e] = 0;
  }
}

std::vector<std::size_t> grid_neighbors(std::size_t cell, std::size_t rows, std::size_t cols,
                                        Neighborhood hood) {
  std::vector<std::size_t> out;
  const auto r = static_cast<long>(cell / cols);
  const auto c = static_cast<long>(cell % cols);
  for (long dr = -1; dr <= 1; ++dr) {
    for (long dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      if (hood == Neighborhood::Four && dr != 0 && dc != 0) continue;
      const long nr = r + dr;
      const long nc = c + dc;
      if (nr < 0 || nc < 0 || nr >= static_cast<long>(rows) || nc >= static_cast<long>(cols)) continue;
      out.push_back(static_cast<std::size_t>(nr) * cols + static_cast<std::size_t>(nc));
    }
  }
  return out;
}

struct GridWalker {
  const GridPath& grid;
  std::vector<std::vector<std::size_t>> adjacency;
  std::vector<std::uint8_t> visited;
  std::size_t target;

  explicit GridWalker(const GridPath& g)
      : grid(g), visited(g.rows * g.cols, 0), target(g.rows * g.cols - 1) {
    for (std::size_t cell = 0; cell < g.rows * g.cols; ++cell) {
      adjacency.push_back(grid_neighbors(cell, g.rows, g.cols, g.neighborhood));
    }
  }

  void all_paths(std::size_t cell, std::set<std::vector<std::uint8_t>>& sets, std::size_t& paths,
                 std::size_t limit) {
    if (cell == target) {
      sets.insert(visited);
      if (sets.size() > limit || ++paths > 64 * limit) {
        throw GuardExceeded("grid path enumeration exceeded the guard");
      }
      return;
    }
    for (std::size_t next : adjacency[cell]) {
      if (visited[next]) continue;
      visited[next] = 1;
      all_paths(next, sets, paths, limit);
      visited[next] = 0;
    }
  }

  // Hamiltonian path over exactly the marked cells, from cell 0 to target.
  bool covers(std::size_t cell, std::size_t remaining, const std::vector<std::uint8_t>& marked) {
    if (cell == target) return remaining == 0;
    for (std::size_t next : adjacency[cell]) {
      if (!marked[next] || visited[next]) continue;
      visited[next] = 1;
      const bool ok = covers(next, remaining - 1, marked);
      visited[next] = 0;
      if (ok) return true;
    }
    return false;
  }
};

}  // namespace

PolytopeSpec PolytopeSpec::categorical(std::size_t n) {
  if (n < 1) throw InvalidArgument("Categorical requires n >= 1");
  return PolytopeSpec(Categorical{n});
}

PolytopeSpec PolytopeSpec::k_subset(std::size_t n, std::size_t k) {
  if (k < 1 || k > n) throw InvalidArgument("KSubset requires 1 <= k <= n");
  return PolytopeSpec(KSubset{n, k});
}

PolytopeSpec PolytopeSpec::spanning_tree(std::size_t vertices) {
  if (vertices < 2) throw InvalidArgument("SpanningTree requires v >= 2");
  return PolytopeSpec(SpanningTree{vertices});
}

PolytopeSpec PolytopeSpec::grid_path(std::size_t rows, std::size_t cols, Neighborhood neighborhood) {
  if (rows < 1 || cols < 1) throw InvalidArgument("GridPath requires rows >= 1 and cols >= 1");
  return PolytopeSpec(GridPath{rows, cols, neighborhood});
}

PolytopeSpec PolytopeSpec::parse(std::string_view text) {
  const auto parts = split(text, ':');
  const auto kind = parts.front();
  if (kind == "categorical" && parts.size() == 2) return categorical(parse_count(parts[1], text));
  if (kind == "ksubset" && parts.size() == 3) {
    return k_subset(parse_count(parts[1], text), parse_count(parts[2], text));
  }
  if (kind == "tree" && parts.size() == 2) return spanning_tree(parse_count(parts[1], text));
  if ((kind == "grid" || kind == "grid8") && parts.size() == 2) {
    const auto dims = split(parts[1], 'x');
    if (dims.size() != 2) throw InvalidArgument("bad grid descriptor '" + std::string(text) + "'");
    return grid_path(parse_count(dims[0], text), parse_count(dims[1], text),
                     kind == "grid8" ? Neighborhood::Eight : Neighborhood::Four);
  }
  throw InvalidArgument("unknown polytope descriptor '" + std::string(text) + "'");
}

std::size_t PolytopeSpec::dimension() const {
  return std::visit(overloaded{
                        [](const Categorical& c) { return c.n; },
                        [](const KSubset& s) { return s.n; },
                        [](const SpanningTree& t) { return t.vertices * (t.vertices - 1) / 2; },
                        [](const GridPath& g) { return g.rows * g.cols; },
                    },
                    variant_);
}

std::string PolytopeSpec::descriptor() const {
  return std::visit(
      overloaded{
          [](const Categorical& c) { return "categorical:" + std::to_string(c.n); },
          [](const KSubset& s) {
            return "ksubset:" + std::to_string(s.n) + ":" + std::to_string(s.k);
          },
          [](const SpanningTree& t) { return "tree:" + std::to_string(t.vertices); },
          [](const GridPath& g) {
            return std::string(g.neighborhood == Neighborhood::Eight ? "grid8:" : "grid:") +
                   std::to_string(g.rows) + "x" + std::to_string(g.cols);
          },
      },
      variant_);
}

bool PolytopeSpec::is_categorical() const {
  if (std::holds_alternative<Categorical>(variant_)) return true;
  if (const auto* s = std::get_if<KSubset>(&variant_)) return s->k == 1;
  return false;
}

std::size_t PolytopeSpec::subset_size() const {
  return std::visit(overloaded{
                        [](const Categorical&) -> std::size_t { return 1; },
                        [](const KSubset& s) { return s.k; },
                        [](const SpanningTree& t) { return t.vertices - 1; },
                        [](const GridPath&) -> std::size_t {
                          throw Unsupported("grid paths have no fixed size");
                        },
                    },
                    variant_);
}

std::size_t DiscreteState::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

Vector DiscreteState::as_vector() const { return Vector(bits.begin(), bits.end()); }

std::string to_string(const DiscreteState& z) {
  std::string s;
  s.reserve(z.bits.size());
  for (auto b : z.bits) s.push_back(b ? '1' : '0');
  return s;
}

std::size_t edge_index(std::size_t i, std::size_t j, std::size_t vertices) {
  if (i > j) std::swap(i, j);
  if (i == j || j >= vertices) throw InvalidArgument("invalid edge");
  // Edges (0,1)...(0,v-1) come first, then (1,2)..., so row i starts at
  // i*v - i*(i+1)/2.
  return i * vertices - i * (i + 1) / 2 + (j - i - 1);
}

std::vector<std::pair<std::size_t, std::size_t>> edge_list(std::size_t vertices) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < vertices; ++i) {
    for (std::size_t j = i + 1; j < vertices; ++j) edges.emplace_back(i, j);
  }
  return edges;
}

bool is_member(const PolytopeSpec& spec, const DiscreteState& z) {
  if (z.size() != spec.dimension()) return false;
  if (std::any_of(z.bits.begin(), z.bits.end(), [](auto b) { return b > 1; })) return false;
  return std::visit(
      overloaded{
          [&](const Categorical&) { return z.count() == 1; },
          [&](const KSubset& s) { return z.count() == s.k; },
          [&](const SpanningTree& t) {
            if (z.count() != t.vertices - 1) return false;
            UnionFind uf(t.vertices);
            const auto edges = edge_list(t.vertices);
            for (std::size_t e = 0; e < edges.size(); ++e) {
              if (z.bits[e] && !uf.unite(edges[e].first, edges[e].second)) return false;
            }
            return true;
          },
          [&](const GridPath& g) {
            const std::size_t cells = g.rows * g.cols;
            if (!z.bits[0] || !z.bits[cells - 1]) return false;
            GridWalker walker(g);
            walker.visited[0] = 1;
            return walker.covers(0, z.count() - 1, z.bits);
          },
      },
      spec.variant());
}

void check_theta(const PolytopeSpec& spec, std::span<const double> theta) {
  require_same_size(theta.size(), spec.dimension(), "theta");
  for (double t : theta) {
    if (!std::isfinite(t)) throw InvalidArgument("theta must be finite");
  }
}

void check_temperature(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("temperature must be positive and finite");
  }
}

std::vector<DiscreteState> enumerate_states(const PolytopeSpec& spec, EnumerationGuard guard) {
  std::vector<DiscreteState> states = std::visit(
      overloaded{
          [&](const Categorical& c) {
            guard_check(c.n, guard, spec);
            return enumerate_subsets(c.n, 1);
          },
          [&](const KSubset& s) {
            guard_check(binomial_capped(s.n, s.k, guard.max_states), guard, spec);
            return enumerate_subsets(s.n, s.k);
          },
          [&](const SpanningTree& t) {
            if (t.vertices > 9) throw Unsupported("spanning-tree enumeration supports v <= 9");
            // Cayley: v^(v-2) labelled trees.
            std::size_t count = 1;
            for (std::size_t i = 2; i < t.vertices; ++i) count *= t.vertices;
            guard_check(count, guard, spec);
            const auto edges = edge_list(t.vertices);
            std::vector<std::uint8_t> bits(edges.size(), 0);
            std::vector<DiscreteState> out;
            out.reserve(count);
            enumerate_trees(edges, t.vertices, 0, 0, UnionFind(t.vertices), bits, out);
            return out;
          },
          [&](const GridPath& g) {
            if (g.rows > 5 || g.cols > 5) throw Unsupported("grid-path enumeration supports up to 5x5");
            GridWalker walker(g);
            walker.visited[0] = 1;
            std::set<std::vector<std::uint8_t>> sets;
            std::size_t paths = 0;
            walker.all_paths(0, sets, paths, guard.max_states);
            guard_check(sets.size(), guard, spec);
            std::vector<DiscreteState> out;
            out.reserve(sets.size());
            for (const auto& s : sets) out.emplace_back(s);
            return out;
          },
      },
      spec.variant());
  std::sort(states.begin(), states.end());
  return states;
}

double weight(const DiscreteState& z, std::span<const double> theta) {
  require_same_size(z.size(), theta.size(), "state");
  double w = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (z.bits[i]) w += theta[i];
  }
  return w;
}

Vector ExactDistribution::marginals() const {
  Vector mu(states.empty() ? 0 : states.front().size(), 0.0);
  for (std::size_t s = 0; s < states.size(); ++s) {
    for (std::size_t i = 0; i < mu.size(); ++i) {
      if (states[s].bits[i]) mu[i] += probabilities[s];
    }
  }
  for (double& x : mu) x = std::min(x, 1.0);
  return mu;
}

double ExactDistribution::expectation(const std::function<double(const DiscreteState&)>& f) const {
  double total = 0.0;
  for (std::size_t s = 0; s < states.size(); ++s) total += probabilities[s] * f(states[s]);
  return total;
}

ExactDistribution exact_distribution(const PolytopeSpec& spec, std::span<const double> theta,
                                     double tau, EnumerationGuard guard) {
  check_theta(spec, theta);
  check_temperature(tau);
  ExactDistribution dist;
  dist.states = enumerate_states(spec, guard);
  Vector scaled(dist.states.size());
  double max_w = -std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < dist.states.size(); ++s) {
    scaled[s] = weight(dist.states[s], theta) / tau;
    max_w = std::max(max_w, scaled[s]);
  }
  double sum = 0.0;
  for (double w : scaled) sum += std::exp(w - max_w);
  dist.log_partition = max_w + std::log(sum);
  dist.probabilities.resize(scaled.size());
  for (std::size_t s = 0; s < scaled.size(); ++s) {
    dist.probabilities[s] = std::exp(scaled[s] - dist.log_partition);
  }
  return dist;
}

double log_partition(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                     EnumerationGuard guard) {
  return exact_distribution(spec, theta, tau, guard).log_partition;
}

double pmf(const PolytopeSpec& spec, std::span<const double> theta, double tau,
           const DiscreteState& z, PmfMode mode, EnumerationGuard guard) {
  check_theta(spec, theta);
  check_temperature(tau);
  if (!is_member(spec, z)) {
    if (mode == PmfMode::Strict) throw InfeasibleState(to_string(z) + " is not a feasible state");
    return 0.0;
  }
  return std::exp(weight(z, theta) / tau - log_partition(spec, theta, tau, guard));
}

Vector marginals(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                 EnumerationGuard guard) {
  return exact_distribution(spec, theta, tau, guard).marginals();
}

ExactSampler::ExactSampler(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                           EnumerationGuard guard)
    : dist_(exact_distribution(spec, theta, tau, guard)), cdf_(dist_.probabilities.size()) {
  std::partial_sum(dist_.probabilities.begin(), dist_.probabilities.end(), cdf_.begin());
}

std::size_t ExactSampler::sample_index(Rng& rng) const {
  std::uniform_real_distribution<double> unif(0.0, cdf_.back());
  const double u = unif(rng);
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return std::min(static_cast<std::size_t>(it - cdf_.begin()), cdf_.size() - 1);
}

const DiscreteState& ExactSampler::operator()(Rng& rng) const {
  return dist_.states[sample_index(rng)];
}

DiscreteState sample_exact(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                           Rng& rng, EnumerationGuard guard) {
  return ExactSampler(spec, theta, tau, guard)(rng);
}

double exact_expected_loss(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                           const StateLoss& loss, EnumerationGuard guard) {
  return exact_distribution(spec, theta, tau, guard).expectation(loss);
}

Vector exact_gradient(const PolytopeSpec& spec, std::span<const double> theta, double tau,
                      const StateLoss& loss, EnumerationGuard guard) {
  const auto dist = exact_distribution(spec, theta, tau, guard);
  const std::size_t m = spec.dimension();
  Vector z_loss(m, 0.0);
  Vector mu(m, 0.0);
  double mean_loss = 0.0;
  for (std::size_t s = 0; s < dist.states.size(); ++s) {
    const double p = dist.probabilities[s];
    const double l = loss(dist.states[s]);
    mean_loss += p * l;
    for (std::size_t i = 0; i < m; ++i) {
      if (dist.states[s].bits[i]) {
        z_loss[i] += p * l;
        mu[i] += p;
      }
    }
  }
  Vector grad(m);
  for (std::size_t i = 0; i < m; ++i) grad[i] = (z_loss[i] - mean_loss * mu[i]) / tau;
  return grad;
}

}  // namespace aimle
