#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "relpose/errors.hpp"
#include "relpose/filters.hpp"

namespace relpose {

namespace {

/// Symmetric square root of a PSD matrix (negative eigenvalues treated as zero).
template<class Matrix>
Matrix psdSqrt(const Matrix& m)
{
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (m + m.transpose()));
  const auto root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

template<int Rows>
Eigen::Matrix<double, Rows, 1> standardNormal(Rng& rng, std::normal_distribution<double>& dist,
                                              Eigen::Index rows = Rows)
{
  Eigen::Matrix<double, Rows, 1> z(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    z(i) = dist(rng);
  }
  return z;
}

struct EdgeTerm
{
  std::size_t robotA = 0;
  Eigen::Vector3d offsetA;
  std::size_t robotB = 0;
  Eigen::Vector3d offsetB;
  double y = 0.0;
  double invVariance = 0.0;
};

Eigen::Vector3d tagInReference(const State3& x, std::size_t robot, const Eigen::Vector3d& offset)
{
  return robot == 0 ? offset : x.poses[robot - 1].transformPoint(offset);
}

}  // namespace

double effectiveSampleSize(std::span<const double> weights)
{
  double sq = 0.0;
  for (const double w : weights) {
    sq += w * w;
  }
  return sq > 0.0 ? 1.0 / sq : 0.0;
}

std::vector<std::size_t> systematicResample(std::span<const double> weights, Rng& rng)
{
  const std::size_t n = weights.size();
  std::vector<std::size_t> out(n);
  if (n == 0) {
    return out;
  }
  const double step = 1.0 / static_cast<double>(n);
  std::uniform_real_distribution<double> uniform(0.0, step);
  double u = uniform(rng);
  double cumulative = weights[0];
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (u > cumulative && j + 1 < n) {
      ++j;
      cumulative += weights[j];
    }
    out[i] = j;
    u += step;
  }
  return out;
}

ParticleBelief initParticles(const GaussianMixture& mixture, std::size_t count, Rng& rng)
{
  if (mixture.modes.empty()) {
    throw NoSolutionError("initParticles: empty mixture");
  }
  const std::size_t m = mixture.modes.size();
  const double total = mixture.totalWeight();
  std::vector<std::size_t> perMode(m);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double exact = static_cast<double>(count) * mixture.modes[i].weight / total;
    perMode[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += perMode[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& l, const auto& r) { return l.first > r.first; });
  for (std::size_t k = 0; assigned < count; ++k, ++assigned) {
    ++perMode[remainders[k % m].second];
  }

  ParticleBelief belief;
  belief.particles.reserve(count);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& mode = mixture.modes[i];
    const Eigen::MatrixXd root = psdSqrt<Eigen::MatrixXd>(mode.covariance);
    for (std::size_t k = 0; k < perMode[i]; ++k) {
      const Eigen::VectorXd z = standardNormal<Eigen::Dynamic>(rng, normal, root.rows());
      belief.particles.push_back(oplus<3>(mode.mean, root * z));
    }
  }
  belief.weights.assign(count, 1.0 / static_cast<double>(count));
  return belief;
}

PfStepResult pfStep(const ParticleBelief& belief, const Input3& reference,
                    std::span<const Input3> others, double dt, const RangeSnapshot& measurement,
                    const RobotTeam& team, const MeasurementGraph& graph,
                    const GaussianMixture& prior, Rng& rng, const PfOptions& options)
{
  if (!(dt > 0.0)) {
    throw std::invalid_argument("pfStep: dt must be positive");
  }
  if (belief.particles.empty()) {
    throw std::invalid_argument("pfStep: empty particle set");
  }
  const std::size_t blocks = belief.particles.front().size();
  if (others.size() != blocks) {
    throw std::invalid_argument("pfStep: one input per non-reference robot is required");
  }
  if (measurement.values.size() != static_cast<Eigen::Index>(graph.size())) {
    throw std::invalid_argument("pfStep: measurement length does not match the graph");
  }

  std::vector<EdgeTerm> edges;
  edges.reserve(graph.size());
  for (std::size_t e = 0; e < graph.size(); ++e) {
    const auto& a = team.tag(graph.edges[e].tagA);
    const auto& b = team.tag(graph.edges[e].tagB);
    const double s = graph.edges[e].sigma;
    edges.push_back(EdgeTerm{a.robotIndex, a.offset, b.robotIndex, b.offset,
                             measurement.values(static_cast<Eigen::Index>(e)), 1.0 / (s * s)});
  }

  const TangentMatrix<3> refRoot = psdSqrt<TangentMatrix<3>>(reference.q);
  std::vector<TangentMatrix<3>> roots;
  roots.reserve(blocks);
  for (const auto& in : others) {
    roots.push_back(psdSqrt<TangentMatrix<3>>(in.q));
  }
  std::normal_distribution<double> normal(0.0, 1.0);

  auto propagateFn = [&](State3& x, Rng& g) {
    const Tangent<3> wRef = refRoot * standardNormal<6>(g, normal);
    const Pose3 left = expMap<3>(-dt * (reference.u + wRef));
    for (std::size_t b = 0; b < blocks; ++b) {
      const Tangent<3> w = roots[b] * standardNormal<6>(g, normal);
      x.poses[b] = left * x.poses[b] * expMap<3>(dt * (others[b].u + w));
    }
  };
  auto logLikelihoodFn = [&](const State3& x) {
    double ll = 0.0;
    for (const auto& e : edges) {
      const double range =
          (tagInReference(x, e.robotA, e.offsetA) - tagInReference(x, e.robotB, e.offsetB)).norm();
      const double r = e.y - range;
      ll -= 0.5 * r * r * e.invVariance;
    }
    return ll;
  };

  PfStepResult out;
  out.belief = belief;
  const BootstrapOutcome outcome =
      bootstrapStep(out.belief.particles, out.belief.weights, propagateFn, logLikelihoodFn, rng,
                    options.resampleThreshold);
  out.resampled = outcome.resampled;
  if (outcome.degenerate) {
    out.belief = initParticles(prior, belief.size(), rng);
    out.recoveredFromPrior = true;
  }
  return out;
}

PfEstimate pfEstimate(const ParticleBelief& belief)
{
  if (belief.particles.empty()) {
    throw std::invalid_argument("pfEstimate: empty particle set");
  }
  const auto best = static_cast<std::size_t>(
      std::max_element(belief.weights.begin(), belief.weights.end()) - belief.weights.begin());
  PfEstimate out;
  out.mean = weightedTangentMean(belief.particles, belief.weights, best);
  const Eigen::Index dof = out.mean.dof();
  out.covariance = Eigen::MatrixXd::Zero(dof, dof);
  double used = 0.0;
  for (std::size_t i = 0; i < belief.size(); ++i) {
    try {
      const Eigen::VectorXd d = tangentDifference<3>(out.mean, belief.particles[i]);
      out.covariance.noalias() += belief.weights[i] * d * d.transpose();
      used += belief.weights[i];
    } catch (const SingularRotationError&) {
    }
  }
  if (used > 0.0) {
    out.covariance /= used;
  }
  return out;
}

}  // namespace relpose
