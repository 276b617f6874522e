#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "relpose/gils.hpp"
#include "relpose/models.hpp"

namespace relpose {

using State3 = RelativeState<3>;
using Input3 = VelocityInput<3>;
using Rng = std::mt19937_64;

// ---------------------------------------------------------------------------
// Shared numerics
// ---------------------------------------------------------------------------

/// Symmetrizes and clamps negative eigenvalues to zero.
Eigen::MatrixXd repairCovariance(const Eigen::MatrixXd& p);

/// log N(residual; 0, covariance). Throws NumericalFailureError if covariance is not PD.
double gaussianLogDensity(const Eigen::VectorXd& residual, const Eigen::MatrixXd& covariance);

/// Normalizes log-weights in place into linear weights via log-sum-exp.
/// Returns false (leaving `weights` untouched) when every entry is -inf or NaN.
bool normalizeLogWeights(std::span<const double> logWeights, std::span<double> weights);

/**
 * Weighted mean on SE(3)^(N-1): tangent vectors log(anchor^-1 x_i) are averaged and
 * mapped back with (+). Members whose rotation relative to the anchor is too close to pi
 * for a logarithm are left out and the remaining weights renormalized.
 */
State3 weightedTangentMean(std::span<const State3> states, std::span<const double> weights,
                           std::size_t anchor);

// ---------------------------------------------------------------------------
// EKF
// ---------------------------------------------------------------------------

struct EkfBelief
{
  State3 mean;
  Eigen::MatrixXd covariance;  ///< right-perturbation tangent covariance
};

/// Mean via propagate(); covariance A P A^T + L Q L^T.
EkfBelief ekfPredict(const EkfBelief& belief, const Input3& reference,
                     std::span<const Input3> others, double dt);

struct EkfCorrection
{
  EkfBelief belief;
  Eigen::VectorXd innovation;
  Eigen::MatrixXd innovationCovariance;  ///< S = H P H^T + R
  double logLikelihood = 0.0;            ///< log N(y; g(x_check), S)
  double likelihood = 0.0;
};

/// Joseph-form update with x_hat = x_check (+) K (y - g(x_check)).
/// Throws NumericalFailureError when S is not positive definite.
EkfCorrection ekfCorrect(const EkfBelief& belief, const RangeSnapshot& measurement,
                         const RobotTeam& team, const MeasurementGraph& graph);

// ---------------------------------------------------------------------------
// Gaussian-sum filter
// ---------------------------------------------------------------------------

struct GsfMode
{
  double weight = 0.0;
  EkfBelief belief;
};

struct GsfBelief
{
  std::vector<GsfMode> modes;
};

struct GsfOptions
{
  double weightFloor = 1e-12;
  bool prune = false;
  double pruneBelow = 1e-6;
};

struct GsfStepResult
{
  GsfBelief belief;
  bool weightsReset = false;  ///< every likelihood underflowed; weights set uniform
};

/// w_i <- w_i N_i / sum_j w_j N_j from log-likelihoods, then floor and renormalize.
/// Sets `reset` and returns uniform weights when no likelihood is representable.
std::vector<double> updateModeWeights(std::span<const double> priorWeights,
                                      std::span<const double> logLikelihoods,
                                      const GsfOptions& options, bool& reset);

GsfStepResult gsfStep(const GsfBelief& belief, const Input3& reference,
                      std::span<const Input3> others, double dt, const RangeSnapshot& measurement,
                      const RobotTeam& team, const MeasurementGraph& graph,
                      const GsfOptions& options = {});

struct GsfEstimate
{
  State3 mean;                  ///< tangent-space weighted mean anchored at the argmax mode
  Eigen::MatrixXd covariance;   ///< covariance of the max-weight mode
  std::size_t maxWeightIndex = 0;
  State3 maxWeightMean;
};

GsfEstimate gsfEstimate(const GsfBelief& belief);

GsfBelief initGsf(const GaussianMixture& mixture);

// ---------------------------------------------------------------------------
// Bootstrap particle filter
// ---------------------------------------------------------------------------

struct ParticleBelief
{
  std::vector<State3> particles;
  std::vector<double> weights;

  std::size_t size() const { return particles.size(); }
};

double effectiveSampleSize(std::span<const double> weights);

/// Systematic resampling: returns the source index of each of the `weights.size()` draws.
std::vector<std::size_t> systematicResample(std::span<const double> weights, Rng& rng);

struct BootstrapOutcome
{
  bool resampled = false;
  bool degenerate = false;  ///< every weight vanished; particles and weights untouched
};

/**
 * One generic bootstrap step: propagate each particle with `propagateFn(particle, rng)`,
 * reweight by `logLikelihoodFn(particle)`, and resample systematically when the effective
 * sample size drops below `threshold * count`.
 */
template<class Particle, class PropagateFn, class LogLikelihoodFn>
BootstrapOutcome bootstrapStep(std::vector<Particle>& particles, std::vector<double>& weights,
                               PropagateFn&& propagateFn, LogLikelihoodFn&& logLikelihoodFn,
                               Rng& rng, double threshold)
{
  BootstrapOutcome outcome;
  const std::size_t n = particles.size();
  std::vector<double> logW(n);
  for (std::size_t i = 0; i < n; ++i) {
    propagateFn(particles[i], rng);
    logW[i] = (weights[i] > 0.0 ? std::log(weights[i]) : -std::numeric_limits<double>::infinity()) +
              logLikelihoodFn(particles[i]);
  }
  std::vector<double> normalized(n);
  if (!normalizeLogWeights(logW, normalized)) {
    outcome.degenerate = true;
    return outcome;
  }
  weights = std::move(normalized);
  if (effectiveSampleSize(weights) < threshold * static_cast<double>(n)) {
    const std::vector<std::size_t> idx = systematicResample(weights, rng);
    std::vector<Particle> next;
    next.reserve(n);
    for (const std::size_t k : idx) {
      next.push_back(particles[k]);
    }
    particles = std::move(next);
    weights.assign(n, 1.0 / static_cast<double>(n));
    outcome.resampled = true;
  }
  return outcome;
}

struct PfOptions
{
  double resampleThreshold = 0.5;  ///< resample when ESS < threshold * count
};

struct PfStepResult
{
  ParticleBelief belief;
  bool resampled = false;
  bool recoveredFromPrior = false;  ///< all weights vanished; redrawn from the prior mixture
};

/// Sampled input noise from each input's Q, likelihood under R = diag(sigma^2).
PfStepResult pfStep(const ParticleBelief& belief, const Input3& reference,
                    std::span<const Input3> others, double dt, const RangeSnapshot& measurement,
                    const RobotTeam& team, const MeasurementGraph& graph,
                    const GaussianMixture& prior, Rng& rng, const PfOptions& options = {});

/// Count per mode proportional to weight (largest-remainder rounding), each particle
/// drawn from N(mean, P) in the tangent space of its mode.
ParticleBelief initParticles(const GaussianMixture& mixture, std::size_t count, Rng& rng);

struct PfEstimate
{
  State3 mean;
  Eigen::MatrixXd covariance;
};

PfEstimate pfEstimate(const ParticleBelief& belief);

}  // namespace relpose
