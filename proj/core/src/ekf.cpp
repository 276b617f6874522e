#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "relpose/errors.hpp"
#include "relpose/filters.hpp"

namespace relpose {

Eigen::MatrixXd repairCovariance(const Eigen::MatrixXd& p)
{
  Eigen::MatrixXd sym = 0.5 * (p + p.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) {
    return sym;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  const Eigen::VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd repaired = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (repaired + repaired.transpose());
}

double gaussianLogDensity(const Eigen::VectorXd& residual, const Eigen::MatrixXd& covariance)
{
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (!covariance.allFinite() || llt.info() != Eigen::Success) {
    throw NumericalFailureError("gaussianLogDensity: covariance is not positive definite");
  }
  const Eigen::VectorXd z = llt.matrixL().solve(residual);
  const double logDet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const auto k = static_cast<double>(residual.size());
  return -0.5 * (z.squaredNorm() + logDet + k * std::log(2.0 * std::numbers::pi));
}

bool normalizeLogWeights(std::span<const double> logWeights, std::span<double> weights)
{
  double maxLog = -std::numeric_limits<double>::infinity();
  for (const double l : logWeights) {
    if (std::isfinite(l)) {
      maxLog = std::max(maxLog, l);
    }
  }
  if (!std::isfinite(maxLog)) {
    return false;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < logWeights.size(); ++i) {
    const double l = logWeights[i];
    weights[i] = std::isnan(l) ? 0.0 : std::exp(l - maxLog);
    sum += weights[i];
  }
  for (double& w : weights) {
    w /= sum;
  }
  return true;
}

State3 weightedTangentMean(std::span<const State3> states, std::span<const double> weights,
                           std::size_t anchor)
{
  const State3& base = states[anchor];
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(base.dof());
  double used = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (weights[i] <= 0.0) {
      continue;
    }
    if (i == anchor) {
      used += weights[i];
      continue;
    }
    try {
      acc += weights[i] * tangentDifference<3>(base, states[i]);
      used += weights[i];
    } catch (const SingularRotationError&) {
      // outside the chart of the anchor
    }
  }
  if (used <= 0.0) {
    return base;
  }
  return oplus<3>(base, acc / used);
}

EkfBelief ekfPredict(const EkfBelief& belief, const Input3& reference,
                     std::span<const Input3> others, double dt)
{
  EkfBelief out;
  out.mean = propagate<3>(belief.mean, reference, others, dt);
  const Eigen::MatrixXd a = processJacobian<3>(others, dt);
  const Eigen::MatrixXd q = processNoise<3>(belief.mean, reference, others, dt);
  out.covariance = repairCovariance(a * belief.covariance * a.transpose() + q);
  return out;
}

EkfCorrection ekfCorrect(const EkfBelief& belief, const RangeSnapshot& measurement,
                         const RobotTeam& team, const MeasurementGraph& graph)
{
  if (measurement.values.size() != static_cast<Eigen::Index>(graph.size())) {
    throw std::invalid_argument("ekfCorrect: measurement length does not match the graph");
  }
  const Eigen::VectorXd predicted = rangeStack<3>(belief.mean, team, graph);
  const Eigen::MatrixXd h = measJacobian<3>(belief.mean, team, graph);
  const Eigen::VectorXd r = graph.noiseVariances();

  EkfCorrection out;
  out.innovation = measurement.values - predicted;
  const Eigen::MatrixXd ph = belief.covariance * h.transpose();
  out.innovationCovariance = h * ph;
  out.innovationCovariance.diagonal() += r;
  out.innovationCovariance = 0.5 * (out.innovationCovariance + out.innovationCovariance.transpose());

  Eigen::LLT<Eigen::MatrixXd> llt(out.innovationCovariance);
  if (!out.innovationCovariance.allFinite() || llt.info() != Eigen::Success) {
    throw NumericalFailureError("ekfCorrect: innovation covariance is not positive definite");
  }
  // K = P H^T S^-1
  const Eigen::MatrixXd k = llt.solve(ph.transpose()).transpose();
  out.belief.mean = oplus<3>(belief.mean, k * out.innovation);

  const Eigen::Index n = belief.covariance.rows();
  const Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(n, n) - k * h;
  out.belief.covariance = repairCovariance(ikh * belief.covariance * ikh.transpose() +
                                           k * r.asDiagonal() * k.transpose());

  const Eigen::VectorXd z = llt.matrixL().solve(out.innovation);
  const double logDet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const auto dim = static_cast<double>(out.innovation.size());
  out.logLikelihood = -0.5 * (z.squaredNorm() + logDet + dim * std::log(2.0 * std::numbers::pi));
  out.likelihood = std::exp(out.logLikelihood);
  return out;
}

}  // namespace relpose
