#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "relpose/ambiguity.hpp"
#include "relpose/errors.hpp"

using namespace relpose;
using namespace relpose::testing;

namespace {

double wrap(double a)
{
  return std::atan2(std::sin(a), std::cos(a));
}

double yawOf(const Pose2& p)
{
  return std::atan2(p.rotation()(1, 0), p.rotation()(0, 0));
}

Pose2 randomPlanar(std::mt19937_64& rng, double minDist = 1.0, double maxDist = 5.0)
{
  std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> dist(minDist, maxDist);
  const double bearing = ang(rng);
  const double d = dist(rng);
  return Pose2(planarRotation(ang(rng)), Eigen::Vector2d(d * std::cos(bearing), d * std::sin(bearing)));
}

PairRanges rangesFor(const RobotTeam& team, const MeasurementGraph& graph, const RelativeState<2>& x,
                     std::size_t robot)
{
  return pairRangesFor(team, graph, rangeStack<2>(x, team, graph), robot);
}

PairRanges swapped(const PairRanges& r)
{
  return PairRanges{r.y1j, r.y1i, r.y2j, r.y2i};
}

double forwardResidual(const RobotTeam& team, const Pose2& pose, const PairRanges& r)
{
  const RelativeState<2> x{{pose}};
  const int t1 = team.robot(0).tags[0].tagId;
  const int t2 = team.robot(0).tags[1].tagId;
  const int ti = team.robot(1).tags[0].tagId;
  const int tj = team.robot(1).tags[1].tagId;
  return std::max({std::abs(rangeOne<2>(x, team, RangeEdge{t1, ti}) - r.y1i),
                   std::abs(rangeOne<2>(x, team, RangeEdge{t1, tj}) - r.y1j),
                   std::abs(rangeOne<2>(x, team, RangeEdge{t2, ti}) - r.y2i),
                   std::abs(rangeOne<2>(x, team, RangeEdge{t2, tj}) - r.y2j)});
}

}  // namespace

TEST(Ambiguity, RecoversTruthAndAllModesAreConsistent)
{
  std::mt19937_64 rng(1);
  const RobotTeam team(standardTagLayout(2));
  const MeasurementGraph graph = interRobotGraph(team, 0.1);
  for (int trial = 0; trial < 200; ++trial) {
    const Pose2 truth = randomPlanar(rng);
    const PairRanges r = rangesFor(team, graph, RelativeState<2>{{truth}}, 1);
    const PlanarModeSet set = solvePair(team.robot(0), team.robot(1), r);
    ASSERT_EQ(set.validCount(), 4);
    EXPECT_LT(forwardResidual(team, set.modes[0].pose, r), 1e-9);
    EXPECT_LT(forwardResidual(team, set.modes[1].pose, r), 1e-9);
    bool found = false;
    for (const auto& m : set.modes) {
      found = found || ((m.pose.translation() - truth.translation()).norm() < 1e-9 &&
                        std::abs(wrap(yawOf(m.pose) - yawOf(truth))) < 1e-9);
    }
    EXPECT_TRUE(found);
  }
}

TEST(Ambiguity, FlipModesSwapTheTargetTags)
{
  std::mt19937_64 rng(7);
  const RobotTeam team(standardTagLayout(2));
  const MeasurementGraph graph = interRobotGraph(team, 0.1);
  for (int trial = 0; trial < 200; ++trial) {
    const PairRanges r = rangesFor(team, graph, RelativeState<2>{{randomPlanar(rng)}}, 1);
    const PlanarModeSet set = solvePair(team.robot(0), team.robot(1), r);
    EXPECT_LT(forwardResidual(team, set.modes[2].pose, swapped(r)), 1e-9);
    EXPECT_LT(forwardResidual(team, set.modes[3].pose, swapped(r)), 1e-9);
  }
}

TEST(Ambiguity, FlipsAddPiToHeading)
{
  std::mt19937_64 rng(2);
  const RobotTeam team(standardTagLayout(2));
  const MeasurementGraph graph = interRobotGraph(team, 0.1);
  for (int trial = 0; trial < 50; ++trial) {
    const PairRanges r = rangesFor(team, graph, RelativeState<2>{{randomPlanar(rng)}}, 1);
    const PlanarModeSet set = solvePair(team.robot(0), team.robot(1), r);
    EXPECT_NEAR(std::abs(wrap(yawOf(set.modes[2].pose) - yawOf(set.modes[0].pose))), std::numbers::pi, 1e-9);
    EXPECT_NEAR(std::abs(wrap(yawOf(set.modes[3].pose) - yawOf(set.modes[1].pose))), std::numbers::pi, 1e-9);
    for (int i = 0; i < 4; ++i) {
      EXPECT_EQ(set.modes[static_cast<std::size_t>(i)].index, i + 1);
    }
  }
}

TEST(Ambiguity, ArbitraryTagLayoutsStayForwardConsistent)
{
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> off(-0.3, 0.3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<RobotGeometry> layout;
    for (int p = 1; p <= 2; ++p) {
      layout.push_back(RobotGeometry{p,
                                     {{2 * p - 1, Eigen::Vector3d(off(rng), off(rng), 0.0)},
                                      {2 * p, Eigen::Vector3d(off(rng), off(rng), 0.0)}}});
    }
    const RobotTeam team(layout);
    const MeasurementGraph graph = interRobotGraph(team, 0.1);
    const Pose2 truth = randomPlanar(rng);
    const PairRanges r = rangesFor(team, graph, RelativeState<2>{{truth}}, 1);
    const PlanarModeSet set = solvePair(team.robot(0), team.robot(1), r);
    ASSERT_EQ(set.validCount(), 4);
    EXPECT_LT(forwardResidual(team, set.modes[0].pose, r), 1e-9);
    EXPECT_LT(forwardResidual(team, set.modes[1].pose, r), 1e-9);
    EXPECT_LT(forwardResidual(team, set.modes[2].pose, swapped(r)), 1e-9);
    EXPECT_LT(forwardResidual(team, set.modes[3].pose, swapped(r)), 1e-9);
    bool found = false;
    for (const auto& m : set.modes) {
      found = found || (m.pose.translation() - truth.translation()).norm() < 1e-8;
    }
    EXPECT_TRUE(found);
  }
}

TEST(Ambiguity, CollinearTagsCollapseBranches)
{
  const RobotTeam team(standardTagLayout(2));
  const MeasurementGraph graph = interRobotGraph(team, 0.1);
  // target tags land on x = 0.17, the reference baseline axis
  const Pose2 truth(planarRotation(0.0), Eigen::Vector2d(0.0, 1.2));
  const PairRanges r = rangesFor(team, graph, RelativeState<2>{{truth}}, 1);
  const PlanarModeSet set = solvePair(team.robot(0), team.robot(1), r);
  ASSERT_EQ(set.validCount(), 4);
  EXPECT_TRUE(set.modes[0].pose.isApprox(set.modes[1].pose, 1e-6));
  EXPECT_TRUE(set.modes[2].pose.isApprox(set.modes[3].pose, 1e-6));
}

TEST(Ambiguity, NonIntersectingCirclesAreInvalid)
{
  const RobotTeam team(standardTagLayout(2));
  // |y1 - y2| far beyond the 0.34 m baseline: no intersection
  const PairRanges r{1.0, 1.0, 3.0, 3.0};
  const PlanarModeSet set = solvePair(team.robot(0), team.robot(1), r);
  EXPECT_EQ(set.validCount(), 0);
  EXPECT_THROW(enumerateCombinations({set}), NoSolutionError);
}

TEST(Ambiguity, SlackTreatsNearMissAsTangent)
{
  const RobotTeam team(standardTagLayout(2));
  // misses the triangle inequality by 0.01 m for both target tags
  const PairRanges r{2.0, 2.0, 2.35, 2.35};
  EXPECT_EQ(solvePair(team.robot(0), team.robot(1), r).validCount(), 0);
  const PlanarModeSet set = solvePair(team.robot(0), team.robot(1), r, 0.02);
  EXPECT_EQ(set.validCount(), 4);
  EXPECT_TRUE(set.modes[0].pose.isApprox(set.modes[1].pose, 1e-12));
  EXPECT_EQ(solvePair(team.robot(0), team.robot(1), r, 0.005).validCount(), 0);
}

TEST(Ambiguity, InvalidRangesThrow)
{
  const RobotTeam team(standardTagLayout(2));
  EXPECT_THROW(solvePair(team.robot(0), team.robot(1), PairRanges{0.0, 1.0, 1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(solvePair(team.robot(0), team.robot(1), PairRanges{NAN, 1.0, 1.0, 1.0}), std::invalid_argument);
}

TEST(Ambiguity, DiscriminantClampTolerance)
{
  EXPECT_DOUBLE_EQ(discriminantTolerance(4.0, 1.0), 4e-9);
  EXPECT_DOUBLE_EQ(discriminantTolerance(1e-8, 1e-8), 1e-12);
}

TEST(Ambiguity, CombinationCounts)
{
  std::mt19937_64 rng(4);
  for (int n = 2; n <= 4; ++n) {
    const RobotTeam team(standardTagLayout(n));
    const MeasurementGraph graph = interRobotGraph(team, 0.1);
    RelativeState<2> x;
    for (int p = 1; p < n; ++p) {
      x.poses.push_back(randomPlanar(rng));
    }
    const auto combos = geometricCombinations(team, graph, rangeStack<2>(x, team, graph));
    EXPECT_EQ(combos.size(), static_cast<std::size_t>(std::pow(4, n - 1)));
  }
}

TEST(Ambiguity, ProductRuleAndOrdering)
{
  PlanarModeSet two;
  PlanarModeSet four;
  for (int i = 0; i < 4; ++i) {
    two.modes[static_cast<std::size_t>(i)] = PlanarMode{i + 1, Pose2(), i < 2};
    four.modes[static_cast<std::size_t>(i)] = PlanarMode{i + 1, Pose2(), true};
  }
  const auto combos = enumerateCombinations({two, four});
  ASSERT_EQ(combos.size(), 8u);
  EXPECT_EQ(combos[0].modeIndices, (std::vector<int>{1, 1}));
  EXPECT_EQ(combos[1].modeIndices, (std::vector<int>{2, 1}));
  EXPECT_EQ(combos[2].modeIndices, (std::vector<int>{1, 2}));
  for (std::size_t i = 0; i < combos.size(); ++i) {
    EXPECT_EQ(combos[i].index, static_cast<int>(i) + 1);
  }
}

TEST(Ambiguity, ReflectAboutAxis)
{
  const Eigen::Vector2d r = reflectAboutAxis({0.0, 1.0}, {1.0, 0.0}, {0.0, 0.0});
  EXPECT_NEAR((r - Eigen::Vector2d(0.0, -1.0)).norm(), 0.0, 1e-15);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d p = randomVector(rng, 2);
    const Eigen::Vector2d axis = randomVector(rng, 2);
    const Eigen::Vector2d anchor = randomVector(rng, 2);
    EXPECT_LT((reflectAboutAxis(reflectAboutAxis(p, axis, anchor), axis, anchor) - p).norm(), 1e-12);
    const Eigen::Vector2d onAxis = anchor + 0.7 * axis;
    EXPECT_LT((reflectAboutAxis(onAxis, axis, anchor) - onAxis).norm(), 1e-12);
  }
  EXPECT_THROW(reflectAboutAxis({1.0, 1.0}, {0.0, 0.0}, {0.0, 0.0}), std::invalid_argument);
}

// 0.4 m: Monte-Carlo 95th percentile of the best-mode error is 0.35 m over 2e4 geometries
TEST(Ambiguity, BestModeUnderAveragedNoise)
{
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 0.1 / std::sqrt(200.0));
  const RobotTeam team(standardTagLayout(2));
  const MeasurementGraph graph = interRobotGraph(team, 0.1);
  int good = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    const Pose2 truth = randomPlanar(rng);
    PairRanges r = rangesFor(team, graph, RelativeState<2>{{truth}}, 1);
    r.y1i += noise(rng);
    r.y1j += noise(rng);
    r.y2i += noise(rng);
    r.y2j += noise(rng);
    const PlanarModeSet set = solvePair(team.robot(0), team.robot(1), r, 4.0 * 0.1 * std::sqrt(2.0 / 200.0));
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : set.modes) {
      if (m.valid) {
        best = std::min(best, (m.pose.translation() - truth.translation()).norm());
      }
    }
    good += best < 0.4 ? 1 : 0;
  }
  EXPECT_GE(good, static_cast<int>(0.95 * trials));
}
