#include "archevo/pareto.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "archevo/common.hpp"

namespace archevo {

namespace {

void check_dims(const ScoredPoint& a, const ScoredPoint& b) {
  if (a.budgets.size() != b.budgets.size()) {
    throw InvariantError("budget dimension mismatch: " + std::to_string(a.budgets.size()) +
                         " vs " + std::to_string(b.budgets.size()));
  }
}

// Objective 0 is accuracy, objective m > 0 is budget m - 1.
double objective(const ScoredPoint& p, std::size_t m) {
  return m == 0 ? p.accuracy : p.budgets[m - 1];
}

}  // namespace

bool dominates(const ScoredPoint& a, const ScoredPoint& b) {
  check_dims(a, b);
  if (a.accuracy < b.accuracy) return false;
  bool strict = a.accuracy > b.accuracy;
  for (std::size_t i = 0; i < a.budgets.size(); ++i) {
    if (a.budgets[i] > b.budgets[i]) return false;
    if (a.budgets[i] < b.budgets[i]) strict = true;
  }
  return strict;
}

std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const ScoredPoint> points) {
  const std::size_t m = points.size();
  for (std::size_t i = 1; i < m; ++i) check_dims(points[0], points[i]);

  std::vector<std::vector<std::size_t>> dominated_by(m);  // i dominates these
  std::vector<std::size_t> domination_count(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (dominates(points[i], points[j])) {
        dominated_by[i].push_back(j);
        ++domination_count[j];
      } else if (dominates(points[j], points[i])) {
        dominated_by[j].push_back(i);
        ++domination_count[i];
      }
    }
  }

  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < m; ++i) {
    if (domination_count[i] == 0) current.push_back(i);
  }
  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t i : current) {
      for (std::size_t j : dominated_by[i]) {
        if (--domination_count[j] == 0) next.push_back(j);
      }
    }
    std::vector<std::size_t> ids;
    ids.reserve(current.size());
    for (std::size_t i : current) ids.push_back(points[i].id);
    std::sort(ids.begin(), ids.end());
    fronts.push_back(std::move(ids));
    current = std::move(next);
  }
  return fronts;
}

std::map<std::size_t, double> crowding_distance(std::span<const ScoredPoint> front) {
  std::map<std::size_t, double> distance;
  for (const auto& p : front) distance[p.id] = 0.0;
  const std::size_t n = front.size();
  if (n == 0) return distance;
  for (std::size_t i = 1; i < n; ++i) check_dims(front[0], front[i]);
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (n <= 2) {
    for (auto& [id, d] : distance) d = inf;
    return distance;
  }

  const std::size_t objectives = 1 + front[0].budgets.size();
  std::vector<std::size_t> order(n);
  for (std::size_t m = 0; m < objectives; ++m) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = objective(front[a], m);
      const double vb = objective(front[b], m);
      if (va != vb) return va < vb;
      return front[a].id < front[b].id;
    });
    distance[front[order.front()].id] = inf;
    distance[front[order.back()].id] = inf;
    const double range = objective(front[order.back()], m) - objective(front[order.front()], m);
    if (range <= 0.0) continue;
    for (std::size_t r = 1; r + 1 < n; ++r) {
      double& d = distance[front[order[r]].id];
      if (d == inf) continue;
      d += (objective(front[order[r + 1]], m) - objective(front[order[r - 1]], m)) / range;
    }
  }
  return distance;
}

std::vector<std::size_t> select_pareto_parents(std::span<const ScoredPoint> points, std::size_t k) {
  std::vector<std::size_t> chosen;
  if (k == 0 || points.empty()) return chosen;
  std::map<std::size_t, const ScoredPoint*> by_id;
  for (const auto& p : points) by_id[p.id] = &p;

  for (const auto& front : non_dominated_sort(points)) {
    if (chosen.size() + front.size() <= k) {
      chosen.insert(chosen.end(), front.begin(), front.end());
      if (chosen.size() == k) break;
      continue;
    }
    std::vector<ScoredPoint> members;
    members.reserve(front.size());
    for (std::size_t id : front) members.push_back(*by_id.at(id));
    const auto dist = crowding_distance(members);
    std::vector<std::size_t> ranked(front.begin(), front.end());
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
      const double da = dist.at(a);
      const double db = dist.at(b);
      if (da != db) return da > db;
      return a < b;
    });
    ranked.resize(k - chosen.size());
    chosen.insert(chosen.end(), ranked.begin(), ranked.end());
    break;
  }
  return chosen;
}

}  // namespace archevo
