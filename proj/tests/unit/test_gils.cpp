#include <gtest/gtest.h>

#include <numbers>

#include "oracles.hpp"
#include "relpose/errors.hpp"
#include "relpose/gils.hpp"

using namespace relpose;
using namespace relpose::testing;

namespace {

struct Scene
{
  RobotTeam team;
  MeasurementGraph graph;
  RelativeState<2> truth;
};

Scene referencePlanarScene()
{
  RobotTeam team(standardTagLayout(3));
  MeasurementGraph graph = interRobotGraph(team, 0.1);
  return Scene{team, graph, toPlanar(referenceScene())};
}

AveragedRanges exactRanges(const Scene& s)
{
  AveragedRanges r;
  r.mean = rangeStack<2>(s.truth, s.team, s.graph);
  r.count = 200;
  return r;
}

AveragedRanges noisyRanges(const Scene& s, std::mt19937_64& rng, double sigma)
{
  AveragedRanges r = exactRanges(s);
  r.mean += randomVector(rng, r.mean.size(), sigma);
  return r;
}

RelativeState<2> perturb(const RelativeState<2>& x, double amount)
{
  Eigen::VectorXd dx = Eigen::VectorXd::Constant(x.dof(), amount);
  return oplus<2>(x, dx);
}

}  // namespace

TEST(Gils, AverageSingleSnapshot)
{
  RangeSnapshot s{1.5, Eigen::Vector3d(1.0, 2.0, 3.0)};
  const AveragedRanges a = averageRanges(std::span<const RangeSnapshot>(&s, 1));
  EXPECT_EQ(a.count, 1);
  EXPECT_EQ(a.mean, s.values);
  EXPECT_EQ(a.tStart, 1.5);
  EXPECT_EQ(a.tEnd, 1.5);
}

TEST(Gils, AverageConstantSnapshots)
{
  std::vector<RangeSnapshot> s;
  for (int k = 0; k < 10; ++k) {
    s.push_back({0.1 * k, Eigen::Vector2d(4.0, 5.0)});
  }
  const AveragedRanges a = averageRanges(s);
  EXPECT_EQ(a.count, 10);
  EXPECT_LT((a.mean - Eigen::Vector2d(4.0, 5.0)).norm(), 1e-14);
  EXPECT_DOUBLE_EQ(a.tStart, 0.0);
  EXPECT_DOUBLE_EQ(a.tEnd, 0.9);
}

TEST(Gils, AverageErrors)
{
  EXPECT_THROW(averageRanges({}), std::invalid_argument);
  std::vector<RangeSnapshot> s{{0.0, Eigen::Vector2d(1.0, 1.0)}, {0.1, Eigen::Vector3d(1.0, 1.0, 1.0)}};
  EXPECT_THROW(averageRanges(s), std::invalid_argument);
}

TEST(Gils, AverageFollowsCentralLimitRate)
{
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0.0, 0.1);
  const int repeats = 2000;
  double sumSq = 0.0;
  for (int r = 0; r < repeats; ++r) {
    std::vector<RangeSnapshot> s(200);
    for (auto& snap : s) {
      snap.values = Eigen::VectorXd::Constant(1, 3.0 + noise(rng));
    }
    const double e = averageRanges(s).mean(0) - 3.0;
    sumSq += e * e;
  }
  const double std = std::sqrt(sumSq / repeats);
  EXPECT_NEAR(std, 0.1 / std::sqrt(200.0), 0.0005);
}

TEST(Gils, RefineFromExactSolutionStopsImmediately)
{
  const Scene s = referencePlanarScene();
  const RefineResult r = refineMode(s.truth, exactRanges(s), s.team, s.graph);
  EXPECT_EQ(r.status, RefineStatus::Converged);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_LT(tangentDifference<2>(s.truth, r.state).norm(), 1e-10);
  EXPECT_LT(r.cost, 1e-20);
}

TEST(Gils, RefineFromPerturbedStartConverges)
{
  const Scene s = referencePlanarScene();
  const RefineResult r = refineMode(perturb(s.truth, 0.05), exactRanges(s), s.team, s.graph);
  EXPECT_EQ(r.status, RefineStatus::Converged);
  EXPECT_LE(r.iterations, 15);
  EXPECT_LT(tangentDifference<2>(s.truth, r.state).norm(), 1e-8);
}

TEST(Gils, RefineDescendsForEveryGeometricMode)
{
  std::mt19937_64 rng(12);
  for (int instance = 0; instance < 5; ++instance) {
    Scene s = referencePlanarScene();
    s.truth.poses[0] = Pose2(planarRotation(0.3 * instance), Eigen::Vector2d(1.0 + 0.4 * instance, -0.5));
    const AveragedRanges y = noisyRanges(s, rng, 0.1 / std::sqrt(200.0));
    const auto combos = geometricCombinations(s.team, s.graph, y.mean, 4.0 * 0.1 * std::sqrt(0.01));
    EXPECT_EQ(combos.size(), 16u);
    for (const auto& c : combos) {
      const RefineResult r = refineMode(c.state, y, s.team, s.graph);
      EXPECT_LE(r.cost, r.initialCost);
    }
  }
}

TEST(Gils, RefineRejectsRankDeficientGraph)
{
  const RobotTeam team(standardTagLayout(2));
  MeasurementGraph graph;
  for (int k = 0; k < 4; ++k) {
    graph.edges.push_back(RangeEdge{1, 3, 0.1});
  }
  AveragedRanges y;
  y.mean = Eigen::VectorXd::Constant(4, 2.0);
  y.count = 1;
  const RelativeState<2> x{{Pose2(planarRotation(0.0), Eigen::Vector2d(2.0, 0.0))}};
  EXPECT_THROW(refineMode(x, y, team, graph), DegenerateGeometryError);
  EXPECT_THROW(modeCovariance(x, y, team, graph), DegenerateGeometryError);
}

TEST(Gils, CovarianceOfZeroResidualIsZero)
{
  const Scene s = referencePlanarScene();
  const ModeCovariance c = modeCovariance(s.truth, exactRanges(s), s.team, s.graph);
  EXPECT_LT(c.scale, 1e-25);
  EXPECT_LT(c.covariance.norm(), 1e-20);
}

TEST(Gils, CovarianceScaleUsesResidualOverL)
{
  std::mt19937_64 rng(13);
  const Scene s = referencePlanarScene();
  const AveragedRanges y = noisyRanges(s, rng, 0.01);
  const RefineResult r = refineMode(s.truth, y, s.team, s.graph);
  const ModeCovariance c = modeCovariance(r.state, y, s.team, s.graph);
  const Eigen::VectorXd e = rangeStack<2>(r.state, s.team, s.graph) - y.mean;
  EXPECT_NEAR(c.scale, e.squaredNorm() / 11.0, 1e-15);
  const Eigen::MatrixXd h = measJacobian<2>(r.state, s.team, s.graph);
  const Eigen::MatrixXd expected = c.scale * (h.transpose() * h).inverse();
  EXPECT_LT(relativeError(c.covariance, expected), 1e-9);
  EXPECT_LT((c.covariance - c.covariance.transpose()).norm(), 1e-18);
}

TEST(Gils, CovarianceMatchesSampleSpread)
{
  std::mt19937_64 rng(14);
  const Scene s = referencePlanarScene();
  const double sigma = 0.1 / std::sqrt(200.0);
  const int draws = 200;
  std::vector<Eigen::VectorXd> errors;
  Eigen::MatrixXd predicted = Eigen::MatrixXd::Zero(6, 6);
  for (int k = 0; k < draws; ++k) {
    const AveragedRanges y = noisyRanges(s, rng, sigma);
    const RefineResult r = refineMode(s.truth, y, s.team, s.graph);
    predicted += modeCovariance(r.state, y, s.team, s.graph).covariance / draws;
    errors.push_back(tangentDifference<2>(s.truth, r.state));
  }
  Eigen::MatrixXd sample = Eigen::MatrixXd::Zero(6, 6);
  for (const auto& e : errors) {
    sample += e * e.transpose() / draws;
  }
  for (const int i : {1, 2, 4, 5}) {
    const double ratio = predicted(i, i) / sample(i, i);
    EXPECT_GT(ratio, 0.5) << "index " << i;
    EXPECT_LT(ratio, 2.0) << "index " << i;
  }
}

TEST(Gils, DeduplicateIdenticalModes)
{
  const Scene s = referencePlanarScene();
  const Eigen::MatrixXd p = Eigen::MatrixXd::Identity(6, 6);
  const std::vector<RefinedMode> modes{{s.truth, p, 0.2, 1}, {s.truth, p, 0.1, 2}};
  const auto out = deduplicateModes(modes);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].combination, 2);
}

TEST(Gils, DeduplicateKeepsDistantModesAndIsIdempotent)
{
  std::mt19937_64 rng(15);
  const Eigen::MatrixXd p = Eigen::MatrixXd::Identity(6, 6);
  std::vector<RefinedMode> modes;
  for (int k = 0; k < 6; ++k) {
    RelativeState<2> x;
    x.poses = {Pose2(planarRotation(0.5 * k), Eigen::Vector2d(k, 0.0)),
               Pose2(planarRotation(-0.5 * k), Eigen::Vector2d(0.0, k))};
    modes.push_back({x, p, 0.1 * k, k + 1});
  }
  EXPECT_EQ(deduplicateModes(modes).size(), modes.size());

  for (int k = 0; k < 20; ++k) {
    modes.push_back({perturb(modes[static_cast<std::size_t>(k % 6)].state, 0.01), p, 1.0, 10 + k});
  }
  const auto once = deduplicateModes(modes);
  EXPECT_EQ(once.size(), 6u);
  const auto twice = deduplicateModes(once);
  ASSERT_EQ(twice.size(), once.size());
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_EQ(twice[i].combination, once[i].combination);
  }
}

TEST(Gils, ModeDistanceIsInfiniteNearPi)
{
  RelativeState<2> a{{Pose2()}};
  RelativeState<2> b{{Pose2(planarRotation(std::numbers::pi), Eigen::Vector2d::Zero())}};
  EXPECT_TRUE(std::isinf(modeDistance(a, b)));
  EXPECT_EQ(modeDistance(a, a), 0.0);
}

TEST(Gils, ReferenceSceneReducesSixteenToEight)
{
  const Scene s = referencePlanarScene();
  const GilsResult r = initializeMixture(s.team, s.graph, exactRanges(s));
  EXPECT_EQ(r.geometric.size(), 16u);
  ASSERT_EQ(r.mixture.modes.size(), 8u);
  const State3 truth = referenceScene();
  int matches = 0;
  for (const auto& m : r.mixture.modes) {
    EXPECT_DOUBLE_EQ(m.weight, 0.125);
    matches += tangentDifference<3>(truth, m.mean).cwiseAbs().maxCoeff() < 1e-6 ? 1 : 0;
  }
  EXPECT_EQ(matches, 1);
}

TEST(Gils, LiftIdentity)
{
  const LiftedMode l = liftToSE3(RelativeState<2>::Identity(2), Eigen::MatrixXd::Zero(6, 6));
  for (const auto& p : l.state.poses) {
    EXPECT_TRUE(p.isApprox(Pose3::Identity(), 0.0));
  }
}

TEST(Gils, LiftEmbedsPoseAndCovariance)
{
  std::mt19937_64 rng(16);
  const RelativeState<2> x{{Pose2(planarRotation(0.7), Eigen::Vector2d(1.0, -2.0))}};
  const Eigen::Matrix3d a = Eigen::Matrix3d::Random();
  const Eigen::Matrix3d p2 = a * a.transpose();
  const LiftOptions opt{0.01, 0.04};
  const LiftedMode l = liftToSE3(x, p2, opt);
  EXPECT_TRUE(l.state.poses[0].isApprox(planarPose3(0.7, 1.0, -2.0), 1e-15));
  const std::array<int, 3> idx{2, 3, 4};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      EXPECT_EQ(l.covariance(idx[i], idx[j]), p2(i, j));
    }
  }
  EXPECT_EQ(l.covariance(0, 0), 0.01);
  EXPECT_EQ(l.covariance(1, 1), 0.01);
  EXPECT_EQ(l.covariance(5, 5), 0.04);
  EXPECT_EQ(l.covariance(0, 2), 0.0);
}

TEST(Gils, LiftPreservesRangesForPlanarGeometry)
{
  std::mt19937_64 rng(17);
  const RobotTeam team(standardTagLayout(4));
  const MeasurementGraph graph = interRobotGraph(team, 0.1);
  for (int k = 0; k < 50; ++k) {
    RelativeState<2> x;
    for (int p = 0; p < 3; ++p) {
      x.poses.push_back(randomPose<2>(rng, 3.0, 2.0));
    }
    const LiftedMode l = liftToSE3(x, Eigen::MatrixXd::Identity(9, 9));
    EXPECT_LT((rangeStack<3>(l.state, team, graph) - rangeStack<2>(x, team, graph)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Gils, MixtureWeights)
{
  std::vector<GaussianMode> eight(8, GaussianMode{0.0, State3::Identity(1), Eigen::MatrixXd::Identity(6, 6), 0.0});
  const GaussianMixture m = buildMixture(eight);
  for (const auto& mode : m.modes) {
    EXPECT_DOUBLE_EQ(mode.weight, 0.125);
  }
  EXPECT_NEAR(m.totalWeight(), 1.0, 1e-12);
  const GaussianMixture one = buildMixture({eight[0]});
  EXPECT_DOUBLE_EQ(one.modes[0].weight, 1.0);
  EXPECT_THROW(buildMixture({}), NoSolutionError);
}

TEST(Gils, InitializeFromNoisyWindowKeepsTruthNearby)
{
  std::mt19937_64 rng(18);
  const Scene s = referencePlanarScene();
  const GilsResult r = initializeMixture(s.team, s.graph, noisyRanges(s, rng, 0.1 / std::sqrt(200.0)));
  ASSERT_FALSE(r.mixture.modes.empty());
  EXPECT_NEAR(r.mixture.totalWeight(), 1.0, 1e-12);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : r.mixture.modes) {
    best = std::min(best, tangentDifference<3>(referenceScene(), m.mean).norm());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m.covariance);
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-10);
  }
  EXPECT_LT(best, 0.2);
}
