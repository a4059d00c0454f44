#pragma once

// MAP solvers argmax_{z in C} <z, theta> for every polytope variant. Ties are
// broken in favour of the lowest index everywhere.

#include <span>

#include "aimle/polytope.hpp"

namespace aimle {

// Cell costs for the shortest-path solver; every cost must be > 0.
struct GridCosts {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vector cost;  // row-major
  Neighborhood neighborhood = Neighborhood::Four;
};

// Indicator of the k largest components (k = 1 for Categorical).
DiscreteState map_topk(const PolytopeSpec& spec, std::span<const double> theta);

// Maximum-weight spanning tree of the complete graph (Kruskal).
DiscreteState map_spanning_tree(const PolytopeSpec& spec, std::span<const double> theta);

// Minimum-cost top-left to bottom-right path (Dijkstra over cells). The cost
// of a path includes both endpoint cells.
DiscreteState map_grid_path(const GridCosts& costs);

double grid_path_cost(const GridCosts& costs, const DiscreteState& path);

// Dispatches on the variant. For GridPath with every theta < 0 this runs
// Dijkstra on costs = -theta; otherwise the instance is a longest-path problem
// and is solved by enumeration (grids up to 5x5), else Unsupported.
DiscreteState map_solve(const PolytopeSpec& spec, std::span<const double> theta);

// Brute-force argmax over enumerate_states, lowest state in enumeration order
// on ties. Reference oracle for the solvers above.
DiscreteState map_brute_force(const PolytopeSpec& spec, std::span<const double> theta,
                              EnumerationGuard guard = {});

}  // namespace aimle
