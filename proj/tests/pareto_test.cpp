#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "archevo/common.hpp"
#include "archevo/pareto.hpp"

using namespace archevo;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Definition-level oracle: a point's rank is one more than the highest rank
// among the points that dominate it.
std::vector<std::vector<std::size_t>> brute_force_fronts(const std::vector<ScoredPoint>& pts) {
  std::vector<int> rank(pts.size(), 0);
  std::vector<bool> done(pts.size(), false);
  int r = 0;
  std::size_t left = pts.size();
  std::vector<std::vector<std::size_t>> fronts;
  while (left > 0) {
    ++r;
    std::vector<std::size_t> front;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (done[i]) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
        if (done[j] || i == j) continue;
        bool ge = pts[j].accuracy >= pts[i].accuracy, gt = pts[j].accuracy > pts[i].accuracy;
        for (std::size_t d = 0; d < pts[i].budgets.size(); ++d) {
          ge = ge && pts[j].budgets[d] <= pts[i].budgets[d];
          gt = gt || pts[j].budgets[d] < pts[i].budgets[d];
        }
        dominated = ge && gt;
      }
      if (!dominated) front.push_back(pts[i].id);
    }
    for (auto id : front) {
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (pts[i].id == id) done[i] = true;
      }
    }
    left -= front.size();
    std::sort(front.begin(), front.end());
    fronts.push_back(front);
  }
  return fronts;
}

std::vector<ScoredPoint> random_instance(std::mt19937_64& gen) {
  const std::size_t m = 1 + gen() % 50;
  const std::size_t n = 1 + gen() % 3;
  std::vector<ScoredPoint> pts;
  while (pts.size() < m) {
    ScoredPoint p{pts.size(), double(gen() % 8), {}};
    if (!pts.empty() && gen() % 5 == 0) {
      // Forced duplicate of an earlier point.
      const auto& src = pts[gen() % pts.size()];
      p.accuracy = src.accuracy;
      p.budgets = src.budgets;
    } else {
      for (std::size_t d = 0; d < n; ++d) p.budgets.push_back(double(gen() % 6));
    }
    pts.push_back(p);
  }
  return pts;
}

}  // namespace

TEST(Dominance, Basic) {
  EXPECT_TRUE(dominates({0, 90, {1.0}}, {1, 85, {1.0}}));
  EXPECT_TRUE(dominates({0, 90, {0.5}}, {1, 90, {1.0}}));
  EXPECT_FALSE(dominates({0, 90, {1.0}}, {1, 90, {1.0}}));
  EXPECT_FALSE(dominates({0, 90, {1.0}}, {1, 85, {0.5}}));
  EXPECT_THROW(dominates({0, 90, {1.0}}, {1, 85, {0.5, 1.0}}), InvariantError);
}

TEST(NonDominatedSort, SmallCases) {
  EXPECT_TRUE(non_dominated_sort({}).empty());
  const std::vector<ScoredPoint> pts = {{0, 80, {1}}, {1, 90, {1}}, {2, 90, {2}}, {3, 70, {0.5}}};
  const auto fronts = non_dominated_sort(pts);
  ASSERT_EQ(fronts.size(), 2u);
  EXPECT_EQ(fronts[0], (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(fronts[1], (std::vector<std::size_t>{0, 2}));
}

TEST(NonDominatedSort, DuplicatesShareAFront) {
  const std::vector<ScoredPoint> pts = {{0, 80, {1}}, {1, 80, {1}}};
  const auto fronts = non_dominated_sort(pts);
  ASSERT_EQ(fronts.size(), 1u);
  EXPECT_EQ(fronts[0].size(), 2u);
}

TEST(NonDominatedSort, MatchesOracleAndPartitions) {
  std::mt19937_64 gen(20240611);
  for (int inst = 0; inst < 200; ++inst) {
    const auto pts = random_instance(gen);
    const auto fronts = non_dominated_sort(pts);
    ASSERT_EQ(fronts, brute_force_fronts(pts)) << "instance " << inst;
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& f : fronts) {
      total += f.size();
      seen.insert(f.begin(), f.end());
    }
    EXPECT_EQ(total, pts.size());
    EXPECT_EQ(seen.size(), pts.size());
  }
}

TEST(NonDominatedSort, MembershipInvariantUnderPositiveScaling) {
  std::mt19937_64 gen(7);
  for (int inst = 0; inst < 50; ++inst) {
    auto pts = random_instance(gen);
    const auto before = non_dominated_sort(pts);
    for (auto& p : pts) {
      p.accuracy *= 3.5;
      p.budgets[0] *= 0.01;
    }
    EXPECT_EQ(non_dominated_sort(pts), before);
  }
}

TEST(Crowding, HandCase) {
  const std::vector<ScoredPoint> front = {{0, 90, {1.0}}, {1, 85, {0.7}}, {2, 80, {0.5}}};
  const auto d = crowding_distance(front);
  EXPECT_EQ(d.at(0), kInf);
  EXPECT_EQ(d.at(2), kInf);
  EXPECT_DOUBLE_EQ(d.at(1), 2.0);
}

TEST(Crowding, TwoPointsAndZeroRange) {
  const auto two = crowding_distance(std::vector<ScoredPoint>{{4, 1, {1}}, {9, 2, {0}}});
  EXPECT_EQ(two.at(4), kInf);
  EXPECT_EQ(two.at(9), kInf);
  // Budget objective is flat; only accuracy contributes.
  const auto flat = crowding_distance(
      std::vector<ScoredPoint>{{0, 90, {1}}, {1, 85, {1}}, {2, 80, {1}}, {3, 70, {1}}});
  EXPECT_DOUBLE_EQ(flat.at(1), (90.0 - 80.0) / 20.0);
  EXPECT_DOUBLE_EQ(flat.at(2), (85.0 - 70.0) / 20.0);
}

TEST(ParetoParents, Examples) {
  const std::vector<ScoredPoint> two_fronts = {{0, 90, {1}}, {1, 80, {0.5}}, {2, 70, {1}}};
  EXPECT_EQ(select_pareto_parents(two_fronts, 2), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(select_pareto_parents(two_fronts, 5).size(), 3u);
  EXPECT_TRUE(select_pareto_parents(two_fronts, 0).empty());
  const std::vector<ScoredPoint> one_front = {{0, 90, {1.0}}, {1, 85, {0.7}}, {2, 80, {0.5}}};
  EXPECT_EQ(select_pareto_parents(one_front, 1), (std::vector<std::size_t>{0}));
  EXPECT_EQ(select_pareto_parents(one_front, 2), (std::vector<std::size_t>{0, 2}));
}

TEST(ParetoParents, PermutationInvariant) {
  std::mt19937_64 gen(99);
  for (int inst = 0; inst < 100; ++inst) {
    auto pts = random_instance(gen);
    const std::size_t k = gen() % (pts.size() + 2);
    auto expected = select_pareto_parents(pts, k);
    std::sort(expected.begin(), expected.end());
    std::shuffle(pts.begin(), pts.end(), gen);
    auto got = select_pareto_parents(pts, k);
    std::sort(got.begin(), got.end());
    EXPECT_EQ(got, expected);
    EXPECT_EQ(got.size(), std::min(k, pts.size()));
  }
}
