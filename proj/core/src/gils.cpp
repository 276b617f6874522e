#include "relpose/gils.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "relpose/errors.hpp"

namespace relpose {

namespace {

constexpr double kRankThreshold = 1e-10;

double halfSquaredResidual(const RelativeState<2>& x, const AveragedRanges& ranges,
                           const RobotTeam& team, const MeasurementGraph& graph)
{
  return 0.5 * (rangeStack<2>(x, team, graph) - ranges.mean).squaredNorm();
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m)
{
  return 0.5 * (m + m.transpose());
}

/// Solves (H^T H) dx = -H^T e; throws when H^T H is rank deficient.
Eigen::VectorXd gaussNewtonStep(const Eigen::MatrixXd& h, const Eigen::VectorXd& e)
{
  const Eigen::MatrixXd normal = symmetrize(h.transpose() * h);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal);
  const double maxEig = eig.eigenvalues().maxCoeff();
  if (!(maxEig > 0.0) || eig.eigenvalues().minCoeff() < kRankThreshold * maxEig) {
    throw DegenerateGeometryError("refineMode: normal matrix H^T H is rank deficient");
  }
  return -normal.ldlt().solve(h.transpose() * e);
}

Eigen::MatrixXd normalInverse(const Eigen::MatrixXd& h)
{
  const Eigen::MatrixXd normal = symmetrize(h.transpose() * h);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal);
  const double maxEig = eig.eigenvalues().maxCoeff();
  if (!(maxEig > 0.0) || eig.eigenvalues().minCoeff() < kRankThreshold * maxEig) {
    throw DegenerateGeometryError("modeCovariance: H^T H is singular at the estimate");
  }
  const Eigen::VectorXd inv = eig.eigenvalues().cwiseInverse();
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

AveragedRanges averageRanges(std::span<const RangeSnapshot> snapshots)
{
  if (snapshots.empty()) {
    throw std::invalid_argument("averageRanges: no snapshots");
  }
  AveragedRanges out;
  out.mean = Eigen::VectorXd::Zero(snapshots.front().values.size());
  for (const auto& s : snapshots) {
    if (s.values.size() != out.mean.size()) {
      throw std::invalid_argument("averageRanges: inconsistent snapshot lengths");
    }
    if (!s.values.allFinite()) {
      throw std::invalid_argument("averageRanges: non-finite range");
    }
    out.mean += s.values;
  }
  out.count = static_cast<int>(snapshots.size());
  out.mean /= static_cast<double>(out.count);
  out.tStart = snapshots.front().timestamp;
  out.tEnd = snapshots.back().timestamp;
  return out;
}

RefineResult refineMode(const RelativeState<2>& initial, const AveragedRanges& ranges,
                        const RobotTeam& team, const MeasurementGraph& graph,
                        const RefineOptions& options)
{
  if (ranges.mean.size() != static_cast<Eigen::Index>(graph.size())) {
    throw std::invalid_argument("refineMode: averaged ranges do not match the graph");
  }
  if (static_cast<Eigen::Index>(graph.size()) < initial.dof()) {
    throw DegenerateGeometryError("refineMode: fewer ranges than state dimensions");
  }

  RefineResult result;
  result.state = initial;
  result.initialCost = halfSquaredResidual(initial, ranges, team, graph);
  result.cost = result.initialCost;
  result.status = RefineStatus::MaxIterations;

  RelativeState<2> x = initial;
  double cost = result.initialCost;
  int increases = 0;
  for (int it = 0; it < options.maxIterations; ++it) {
    const Eigen::VectorXd e = rangeStack<2>(x, team, graph) - ranges.mean;
    const Eigen::MatrixXd h = measJacobian<2>(x, team, graph);
    const Eigen::VectorXd dx = gaussNewtonStep(h, e);
    result.iterations = it + 1;
    if (dx.norm() < options.stepTolerance) {
      result.status = RefineStatus::Converged;
      break;
    }

    double lambda = options.stepSize;
    RelativeState<2> candidate = oplus<2>(x, lambda * dx);
    double candidateCost = halfSquaredResidual(candidate, ranges, team, graph);
    for (int k = 0; k < options.maxHalvings && candidateCost > cost; ++k) {
      lambda *= 0.5;
      candidate = oplus<2>(x, lambda * dx);
      candidateCost = halfSquaredResidual(candidate, ranges, team, graph);
    }

    increases = candidateCost > cost ? increases + 1 : 0;
    x = std::move(candidate);
    cost = candidateCost;
    if (cost <= result.cost) {
      result.state = x;
      result.cost = cost;
    }
    if (increases >= options.divergenceLimit) {
      result.status = RefineStatus::Diverged;
      break;
    }
  }
  return result;
}

ModeCovariance modeCovariance(const RelativeState<2>& estimate, const AveragedRanges& ranges,
                              const RobotTeam& team, const MeasurementGraph& graph)
{
  const auto edges = static_cast<long>(graph.size());
  const long robots = static_cast<long>(estimate.size()) + 1;
  const long dof = edges - (robots - 2);
  if (dof <= 0) {
    throw std::invalid_argument("modeCovariance: |E| - (N - 2) must be positive");
  }
  const Eigen::VectorXd e = ranges.mean - rangeStack<2>(estimate, team, graph);
  const Eigen::MatrixXd h = measJacobian<2>(estimate, team, graph);
  ModeCovariance out;
  out.scale = e.squaredNorm() / static_cast<double>(dof);
  out.covariance = symmetrize(out.scale * normalInverse(h));
  return out;
}

double modeDistance(const RelativeState<2>& a, const RelativeState<2>& b)
{
  try {
    return tangentDifference<2>(a, b).norm();
  } catch (const SingularRotationError&) {
    return std::numeric_limits<double>::infinity();
  }
}

std::vector<RefinedMode> deduplicateModes(const std::vector<RefinedMode>& modes,
                                          double mergeTolerance)
{
  std::vector<std::size_t> order(modes.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return modes[l].cost < modes[r].cost; });

  std::vector<std::size_t> kept;
  for (const std::size_t i : order) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return modeDistance(modes[k].state, modes[i].state) < mergeTolerance;
    });
    if (!duplicate) {
      kept.push_back(i);
    }
  }
  std::sort(kept.begin(), kept.end());
  std::vector<RefinedMode> out;
  out.reserve(kept.size());
  for (const std::size_t k : kept) {
    out.push_back(modes[k]);
  }
  return out;
}

LiftedMode liftToSE3(const RelativeState<2>& planar, const Eigen::MatrixXd& planarCovariance,
                     const LiftOptions& options)
{
  if (planarCovariance.rows() != planar.dof() || planarCovariance.cols() != planar.dof()) {
    throw std::invalid_argument("liftToSE3: covariance does not match the planar state");
  }
  constexpr int m2 = kDof<2>;
  constexpr int m3 = kDof<3>;
  // SE(2) tangent [theta, x, y] lands on SE(3) tangent slots [phi_z, rho_x, rho_y].
  constexpr std::array<int, m2> slot{2, 3, 4};

  LiftedMode out;
  const auto blocks = static_cast<Eigen::Index>(planar.size());
  out.covariance = Eigen::MatrixXd::Zero(blocks * m3, blocks * m3);
  for (std::size_t b = 0; b < planar.size(); ++b) {
    const Pose2& p = planar.poses[b];
    Eigen::Matrix3d c = Eigen::Matrix3d::Identity();
    c.topLeftCorner<2, 2>() = p.rotation();
    out.state.poses.emplace_back(c, Eigen::Vector3d(p.translation().x(), p.translation().y(), 0.0));

    const auto o3 = static_cast<Eigen::Index>(b) * m3;
    out.covariance(o3 + 0, o3 + 0) = options.tiltVariance;
    out.covariance(o3 + 1, o3 + 1) = options.tiltVariance;
    out.covariance(o3 + 5, o3 + 5) = options.heightVariance;
  }
  for (Eigen::Index b1 = 0; b1 < blocks; ++b1) {
    for (Eigen::Index b2 = 0; b2 < blocks; ++b2) {
      for (int i = 0; i < m2; ++i) {
        for (int j = 0; j < m2; ++j) {
          out.covariance(b1 * m3 + slot[i], b2 * m3 + slot[j]) =
              planarCovariance(b1 * m2 + i, b2 * m2 + j);
        }
      }
    }
  }
  return out;
}

double GaussianMixture::totalWeight() const
{
  double sum = 0.0;
  for (const auto& m : modes) {
    sum += m.weight;
  }
  return sum;
}

GaussianMixture buildMixture(std::vector<GaussianMode> modes)
{
  if (modes.empty()) {
    throw NoSolutionError("buildMixture: no modes survived initialization");
  }
  const double w = 1.0 / static_cast<double>(modes.size());
  for (auto& m : modes) {
    m.weight = w;
  }
  return GaussianMixture{std::move(modes)};
}

GilsResult initializeMixture(const RobotTeam& team, const MeasurementGraph& graph,
                             const AveragedRanges& ranges, const GilsOptions& options)
{
  GilsResult out;
  double sigma = 0.0;
  for (const auto& e : graph.edges) {
    sigma = std::max(sigma, e.sigma);
  }
  const double slack =
      options.slackSigmas * sigma * std::sqrt(2.0 / static_cast<double>(std::max(ranges.count, 1)));
  out.geometric = geometricCombinations(team, graph, ranges.mean, slack);

  std::vector<RefinedMode> candidates;
  for (const auto& combo : out.geometric) {
    RefineResult refined;
    try {
      refined = refineMode(combo.state, ranges, team, graph, options.refine);
      if (refined.status != RefineStatus::Diverged) {
        ModeCovariance cov = modeCovariance(refined.state, ranges, team, graph);
        candidates.push_back(
            RefinedMode{refined.state, std::move(cov.covariance), refined.cost, combo.index});
      }
    } catch (const DegenerateGeometryError&) {
      refined.state = combo.state;
      refined.status = RefineStatus::Degenerate;
    }
    out.refined.push_back(std::move(refined));
  }
  if (candidates.empty()) {
    throw NoSolutionError("initializeMixture: every geometric combination failed to refine");
  }

  out.survivors = deduplicateModes(candidates, options.mergeTolerance);
  std::vector<GaussianMode> lifted;
  for (const auto& mode : out.survivors) {
    LiftedMode l = liftToSE3(mode.state, mode.covariance, options.lift);
    lifted.push_back(GaussianMode{0.0, std::move(l.state), std::move(l.covariance), mode.cost});
  }
  out.mixture = buildMixture(std::move(lifted));
  return out;
}

}  // namespace relpose
