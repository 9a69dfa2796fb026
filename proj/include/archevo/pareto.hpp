#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

namespace archevo {

// Accuracy is maximized, every budget minimized.
struct ScoredPoint {
  std::size_t id = 0;
  double accuracy = 0.0;
  std::vector<double> budgets;
};

// Throws InvariantError when the budget vectors differ in length.
bool dominates(const ScoredPoint& a, const ScoredPoint& b);

// Fronts in rank order; ids inside a front ascend.
std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const ScoredPoint> points);

// Boundary points of each objective get +inf; objectives with zero range add
// nothing. Ties in an objective are ordered by id so the result does not
// depend on input order.
std::map<std::size_t, double> crowding_distance(std::span<const ScoredPoint> front);

// Whole fronts from rank 1 up; the front that overflows k is cut by crowding
// distance (descending, lower id first on ties).
std::vector<std::size_t> select_pareto_parents(std::span<const ScoredPoint> points, std::size_t k);

}  // namespace archevo
