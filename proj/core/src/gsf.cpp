#include <algorithm>
#include <cmath>

#include "relpose/filters.hpp"

namespace relpose {

std::vector<double> updateModeWeights(std::span<const double> priorWeights,
                                      std::span<const double> logLikelihoods,
                                      const GsfOptions& options, bool& reset)
{
  const std::size_t n = priorWeights.size();
  std::vector<double> logW(n);
  for (std::size_t i = 0; i < n; ++i) {
    logW[i] = (priorWeights[i] > 0.0 ? std::log(priorWeights[i])
                                     : -std::numeric_limits<double>::infinity()) +
              logLikelihoods[i];
  }
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  reset = !normalizeLogWeights(logW, w);
  if (reset) {
    return w;
  }

  if (options.weightFloor > 0.0) {
    double sum = 0.0;
    for (double& v : w) {
      v = std::max(v, options.weightFloor);
      sum += v;
    }
    for (double& v : w) {
      v /= sum;
    }
  }
  return w;
}

GsfStepResult gsfStep(const GsfBelief& belief, const Input3& reference,
                      std::span<const Input3> others, double dt, const RangeSnapshot& measurement,
                      const RobotTeam& team, const MeasurementGraph& graph,
                      const GsfOptions& options)
{
  const std::size_t n = belief.modes.size();
  std::vector<double> prior(n);
  std::vector<double> logLik(n);
  GsfStepResult out;
  out.belief.modes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    prior[i] = belief.modes[i].weight;
    const EkfBelief predicted = ekfPredict(belief.modes[i].belief, reference, others, dt);
    EkfCorrection corrected = ekfCorrect(predicted, measurement, team, graph);
    logLik[i] = corrected.logLikelihood;
    out.belief.modes[i].belief = std::move(corrected.belief);
  }

  const std::vector<double> w = updateModeWeights(prior, logLik, options, out.weightsReset);
  for (std::size_t i = 0; i < n; ++i) {
    out.belief.modes[i].weight = w[i];
  }

  if (options.prune && n > 1) {
    const auto best = static_cast<std::size_t>(
        std::max_element(w.begin(), w.end()) - w.begin());
    std::vector<GsfMode> kept;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == best || w[i] >= options.pruneBelow) {
        sum += w[i];
        kept.push_back(std::move(out.belief.modes[i]));
      }
    }
    for (auto& m : kept) {
      m.weight /= sum;
    }
    out.belief.modes = std::move(kept);
  }
  return out;
}

GsfEstimate gsfEstimate(const GsfBelief& belief)
{
  if (belief.modes.empty()) {
    throw std::invalid_argument("gsfEstimate: empty belief");
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < belief.modes.size(); ++i) {
    if (belief.modes[i].weight > belief.modes[best].weight) {
      best = i;
    }
  }
  std::vector<State3> means;
  std::vector<double> weights;
  means.reserve(belief.modes.size());
  for (const auto& m : belief.modes) {
    means.push_back(m.belief.mean);
    weights.push_back(m.weight);
  }
  GsfEstimate out;
  out.maxWeightIndex = best;
  out.maxWeightMean = belief.modes[best].belief.mean;
  out.covariance = belief.modes[best].belief.covariance;
  out.mean = belief.modes.size() == 1 ? out.maxWeightMean
                                      : weightedTangentMean(means, weights, best);
  return out;
}

GsfBelief initGsf(const GaussianMixture& mixture)
{
  GsfBelief b;
  for (const auto& m : mixture.modes) {
    b.modes.push_back(GsfMode{m.weight, EkfBelief{m.mean, repairCovariance(m.covariance)}});
  }
  return b;
}

}  // namespace relpose
