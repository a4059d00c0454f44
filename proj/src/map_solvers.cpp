#include "aimle/map_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>

#include "aimle/errors.hpp"

namespace aimle {

namespace {

// Strict weak order: larger value first, lower index on ties.
struct ByValueThenIndex {
  std::span<const double> values;
  bool operator()(std::size_t a, std::size_t b) const {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  }
};

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

DiscreteState map_topk(const PolytopeSpec& spec, std::span<const double> theta) {
  require_same_size(theta.size(), spec.dimension(), "theta");
  std::size_t k = 0;
  if (std::holds_alternative<Categorical>(spec.variant())) {
    k = 1;
  } else if (const auto* s = std::get_if<KSubset>(&spec.variant())) {
    k = s->k;
  } else {
    throw Unsupported("map_topk requires a Categorical or KSubset spec");
  }
  auto z = DiscreteState::zeros(theta.size());
  if (k == 1) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < theta.size(); ++i) {
      if (theta[i] > theta[best]) best = i;
    }
    z.bits[best] = 1;
    return z;
  }
  std::vector<std::size_t> order(theta.size());
  std::iota(order.begin(), order.end(), 0);
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k - 1), order.end(),
                   ByValueThenIndex{theta});
  // nth_element leaves the k-th element in place with all better ones before it.
  for (std::size_t i = 0; i < k; ++i) z.bits[order[i]] = 1;
  return z;
}

DiscreteState map_spanning_tree(const PolytopeSpec& spec, std::span<const double> theta) {
  const auto* tree = std::get_if<SpanningTree>(&spec.variant());
  if (!tree) throw Unsupported("map_spanning_tree requires a SpanningTree spec");
  require_same_size(theta.size(), spec.dimension(), "theta");
  const auto edges = edge_list(tree->vertices);
  std::vector<std::size_t> order(edges.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), ByValueThenIndex{theta});

  std::vector<std::size_t> parent(tree->vertices);
  std::iota(parent.begin(), parent.end(), 0);
  auto z = DiscreteState::zeros(edges.size());
  std::size_t taken = 0;
  for (std::size_t e : order) {
    const auto a = find_root(parent, edges[e].first);
    const auto b = find_root(parent, edges[e].second);
    if (a == b) continue;
    parent[b] = a;
    z.bits[e] = 1;
    if (++taken + 1 == tree->vertices) break;
  }
  return z;
}

DiscreteState map_grid_path(const GridCosts& costs) {
  const std::size_t cells = costs.rows * costs.cols;
  if (cells == 0) throw InvalidArgument("empty grid");
  require_same_size(costs.cost.size(), cells, "grid costs");
  for (double c : costs.cost) {
    if (!(c > 0.0) || !std::isfinite(c)) throw InvalidArgument("grid costs must be positive");
  }
  const auto hood = costs.neighborhood;
  const auto rows = static_cast<long>(costs.rows);
  const auto cols = static_cast<long>(costs.cols);

  // dist[v] is the cost of the best path ending at v, including v itself.
  std::vector<double> dist(cells, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> prev(cells, cells);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> frontier;
  dist[0] = costs.cost[0];
  frontier.emplace(dist[0], 0);
  while (!frontier.empty()) {
    const auto [d, cell] = frontier.top();
    frontier.pop();
    if (d > dist[cell]) continue;
    const long r = static_cast<long>(cell) / cols;
    const long c = static_cast<long>(cell) % cols;
    for (long dr = -1; dr <= 1; ++dr) {
      for (long dc = -1; dc <= 1; ++dc) {
        if ((dr == 0 && dc == 0) || (hood == Neighborhood::Four && dr != 0 && dc != 0)) continue;
        const long nr = r + dr;
        const long nc = c + dc;
        if (nr < 0 || nc < 0 || nr >= rows || nc >= cols) continue;
        const auto next = static_cast<std::size_t>(nr * cols + nc);
        const double candidate = d + costs.cost[next];
        if (candidate < dist[next] || (candidate == dist[next] && cell < prev[next])) {
          const bool improved = candidate < dist[next];
          dist[next] = candidate;
          prev[next] = cell;
          if (improved) frontier.emplace(candidate, next);
        }
      }
    }
  }
  auto z = DiscreteState::zeros(cells);
  for (std::size_t cell = cells - 1; cell != cells; cell = prev[cell]) {
    z.bits[cell] = 1;
    if (cell == 0) break;
  }
  return z;
}

double grid_path_cost(const GridCosts& costs, const DiscreteState& path) {
  return weight(path, costs.cost);
}

DiscreteState map_brute_force(const PolytopeSpec& spec, std::span<const double> theta,
                              EnumerationGuard guard) {
  check_theta(spec, theta);
  const auto states = enumerate_states(spec, guard);
  std::size_t best = 0;
  double best_weight = weight(states[0], theta);
  for (std::size_t s = 1; s < states.size(); ++s) {
    const double w = weight(states[s], theta);
    if (w > best_weight) {
      best_weight = w;
      best = s;
    }
  }
  return states[best];
}

DiscreteState map_solve(const PolytopeSpec& spec, std::span<const double> theta) {
  require_same_size(theta.size(), spec.dimension(), "theta");
  if (std::holds_alternative<Categorical>(spec.variant()) ||
      std::holds_alternative<KSubset>(spec.variant())) {
    return map_topk(spec, theta);
  }
  if (std::holds_alternative<SpanningTree>(spec.variant())) return map_spanning_tree(spec, theta);

  const auto& grid = std::get<GridPath>(spec.variant());
  if (std::all_of(theta.begin(), theta.end(), [](double t) { return t < 0.0; })) {
    GridCosts costs{grid.rows, grid.cols, Vector(theta.size()), grid.neighborhood};
    std::transform(theta.begin(), theta.end(), costs.cost.begin(), [](double t) { return -t; });
    return map_grid_path(costs);
  }
  return map_brute_force(spec, theta);
}

}  // namespace aimle
