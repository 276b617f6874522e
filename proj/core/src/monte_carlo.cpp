#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <random>
#include <string>
#include <thread>

#include "relpose/errors.hpp"
#include "relpose/sim.hpp"

namespace relpose {

namespace {

using Clock = std::chrono::steady_clock;

double seconds(Clock::time_point a, Clock::time_point b)
{
  return std::chrono::duration<double>(b - a).count();
}

int closestMode(const GaussianMixture& mixture, const State3& truth)
{
  int best = -1;
  double bestDist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mixture.modes.size(); ++i) {
    double d = std::numeric_limits<double>::infinity();
    try {
      d = tangentDifference<3>(truth, mixture.modes[i].mean).norm();
    } catch (const SingularRotationError&) {
    }
    if (best < 0 || d < bestDist) {
      best = static_cast<int>(i);
      bestDist = d;
    }
  }
  return best;
}

int pickWrongMode(std::size_t modes, int trueMode, Rng& rng)
{
  if (modes <= 1 || trueMode < 0) {
    std::uniform_int_distribution<std::size_t> any(0, modes - 1);
    return static_cast<int>(any(rng));
  }
  std::uniform_int_distribution<std::size_t> pick(0, modes - 2);
  auto idx = static_cast<int>(pick(rng));
  if (idx >= trueMode) {
    ++idx;
  }
  return idx;
}

void record(FilterTrace& trace, double t, const State3& estimate, const Eigen::MatrixXd& cov,
            const SensorStream& stream, std::size_t k, double dtWall)
{
  trace.times.push_back(t);
  trace.stepSeconds.push_back(dtWall);
  if (stream.hasTruth()) {
    const State3& truth = stream.truth[k + 1];
    trace.errors.push_back(poseErrors(estimate, truth));
    trace.nees.push_back(nees(estimate, cov, truth));
  }
  trace.estimates.push_back(estimate);
}

void runEkf(FilterTrace& trace, const SensorStream& stream, const RobotTeam& team,
            const MeasurementGraph& graph, const GaussianMode& start)
{
  EkfBelief belief{start.mean, repairCovariance(start.covariance)};
  double prev = stream.startTime;
  for (std::size_t k = 0; k < stream.steps.size(); ++k) {
    const auto& step = stream.steps[k];
    const auto t0 = Clock::now();
    const std::span<const Input3> others(step.inputs.data() + 1, step.inputs.size() - 1);
    const EkfBelief predicted = ekfPredict(belief, step.inputs.front(), others, step.timestamp - prev);
    belief = ekfCorrect(predicted, step.ranges, team, graph).belief;
    const auto t1 = Clock::now();
    record(trace, step.timestamp, belief.mean, belief.covariance, stream, k, seconds(t0, t1));
    prev = step.timestamp;
  }
}

void runGsf(FilterTrace& trace, const SensorStream& stream, const RobotTeam& team,
            const MeasurementGraph& graph, const GaussianMixture& mixture,
            const GsfOptions& options)
{
  GsfBelief belief = initGsf(mixture);
  double prev = stream.startTime;
  for (std::size_t k = 0; k < stream.steps.size(); ++k) {
    const auto& step = stream.steps[k];
    const auto t0 = Clock::now();
    const std::span<const Input3> others(step.inputs.data() + 1, step.inputs.size() - 1);
    belief = gsfStep(belief, step.inputs.front(), others, step.timestamp - prev, step.ranges, team,
                     graph, options)
                 .belief;
    const GsfEstimate est = gsfEstimate(belief);
    const auto t1 = Clock::now();
    record(trace, step.timestamp, est.mean, est.covariance, stream, k, seconds(t0, t1));
    std::vector<double> w;
    for (const auto& m : belief.modes) {
      w.push_back(m.weight);
    }
    trace.weights.push_back(std::move(w));
    prev = step.timestamp;
  }
}

void runPf(FilterTrace& trace, const SensorStream& stream, const RobotTeam& team,
           const MeasurementGraph& graph, const GaussianMixture& mixture,
           const FilterSettings& settings, Rng& rng)
{
  ParticleBelief belief = initParticles(mixture, settings.particles, rng);
  double prev = stream.startTime;
  for (std::size_t k = 0; k < stream.steps.size(); ++k) {
    const auto& step = stream.steps[k];
    const auto t0 = Clock::now();
    const std::span<const Input3> others(step.inputs.data() + 1, step.inputs.size() - 1);
    belief = pfStep(belief, step.inputs.front(), others, step.timestamp - prev, step.ranges, team,
                    graph, mixture, rng, settings.pf)
                 .belief;
    const PfEstimate est = pfEstimate(belief);
    const auto t1 = Clock::now();
    record(trace, step.timestamp, est.mean, est.covariance, stream, k, seconds(t0, t1));
    prev = step.timestamp;
  }
}

}  // namespace

TrialResult runFilters(const SensorStream& stream, const RobotTeam& team,
                       const MeasurementGraph& graph, const FilterSettings& settings, int gamma,
                       std::uint64_t filterSeed)
{
  if (gamma < 1 || static_cast<std::size_t>(gamma) > stream.warmup.size()) {
    throw std::invalid_argument("runFilters: gamma exceeds the warmup window");
  }
  for (const auto& step : stream.steps) {
    if (step.inputs.size() != team.size()) {
      throw std::invalid_argument("runFilters: one input per robot is required at every step");
    }
  }
  TrialResult result;
  const std::span<const RangeSnapshot> window(stream.warmup.data() + stream.warmup.size() - gamma,
                                              static_cast<std::size_t>(gamma));
  const GilsResult gils = initializeMixture(team, graph, averageRanges(window), settings.gils);
  result.geometricModes = gils.geometric.size();
  result.mixtureModes = gils.mixture.modes.size();
  if (stream.hasTruth()) {
    result.trueMode = closestMode(gils.mixture, stream.truth.front());
  }

  Rng seedRng(filterSeed);
  const std::uint64_t ekfSeed = seedRng();
  const std::uint64_t pfSeed = seedRng();

  result.ok = true;
  for (const FilterKind kind : settings.selected) {
    FilterTrace trace;
    trace.kind = kind;
    try {
      switch (kind) {
        case FilterKind::Ekf: {
          Rng rng(ekfSeed);
          trace.initialMode = pickWrongMode(gils.mixture.modes.size(), result.trueMode, rng);
          runEkf(trace, stream, team, graph,
                 gils.mixture.modes[static_cast<std::size_t>(trace.initialMode)]);
          break;
        }
        case FilterKind::Gsf:
          runGsf(trace, stream, team, graph, gils.mixture, settings.gsf);
          break;
        case FilterKind::Pf: {
          Rng rng(pfSeed);
          runPf(trace, stream, team, graph, gils.mixture, settings, rng);
          break;
        }
      }
    } catch (const std::exception& e) {
      trace.failed = true;
      trace.failure = e.what();
      if (result.error.empty()) {
        result.error = std::string(filterName(kind)) + ": " + e.what();
      }
    }
    result.traces.push_back(std::move(trace));
  }
  return result;
}

TrialResult runTrial(const ScenarioConfig& cfg, const FilterSettings& settings,
                     std::uint64_t masterSeed, std::size_t trial)
{
  const TrialSeeds seeds = deriveSeeds(masterSeed, trial);
  const SensorStream stream = synthesizeStream(cfg, seeds.trajectory, seeds.noise);
  return runFilters(stream, cfg.team, cfg.graph, settings, cfg.gamma, seeds.filter);
}

std::vector<FilterSummary> summarize(const std::vector<TrialResult>& trials,
                                     const FilterSettings& settings, int stateDof,
                                     double startTime, double neesTransient)
{
  std::vector<FilterSummary> out;
  for (std::size_t f = 0; f < settings.selected.size(); ++f) {
    FilterSummary s;
    s.kind = settings.selected[f];
    std::vector<const FilterTrace*> good;
    for (const auto& t : trials) {
      const FilterTrace* trace = f < t.traces.size() ? &t.traces[f] : nullptr;
      if (!t.ok || trace == nullptr || trace->failed) {
        ++s.failures;
        continue;
      }
      good.push_back(trace);
    }
    std::vector<double> stepTimes;
    for (const auto* t : good) {
      stepTimes.insert(stepTimes.end(), t->stepSeconds.begin(), t->stepSeconds.end());
      if (!t->errors.empty()) {
        s.attitudeRmse.push_back(t->attitudeRmse());
        s.positionRmse.push_back(t->positionRmse());
      }
    }
    if (!stepTimes.empty()) {
      s.medianStepSeconds = median(stepTimes);
    }
    if (!s.attitudeRmse.empty()) {
      s.medianAttitudeRmse = median(s.attitudeRmse);
      s.medianPositionRmse = median(s.positionRmse);
    }
    if (!good.empty() && !good.front()->nees.empty()) {
      const std::size_t steps = good.front()->nees.size();
      s.averageNees.assign(steps, 0.0);
      for (const auto* t : good) {
        for (std::size_t k = 0; k < steps; ++k) {
          s.averageNees[k] += t->nees[k];
        }
      }
      for (double& v : s.averageNees) {
        v /= static_cast<double>(good.size());
      }
      s.neesBounds = averageNeesInterval(stateDof, static_cast<int>(good.size()));
      std::size_t counted = 0;
      std::size_t inside = 0;
      for (std::size_t k = 0; k < steps; ++k) {
        if (good.front()->times[k] - startTime <= neesTransient) {
          continue;
        }
        ++counted;
        const double v = s.averageNees[k];
        inside += (v >= s.neesBounds.lower && v <= s.neesBounds.upper) ? 1 : 0;
      }
      s.fractionInside = counted > 0 ? static_cast<double>(inside) / static_cast<double>(counted) : 0.0;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::size_t defaultThreadCount()
{
  if (const char* env = std::getenv("RELPOSE_MAX_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) {
      return static_cast<std::size_t>(v);
    }
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

MonteCarloReport runMonteCarlo(const ScenarioConfig& cfg, const FilterSettings& settings,
                               const MonteCarloOptions& options)
{
  if (options.trials < 1) {
    throw std::invalid_argument("runMonteCarlo: at least one trial is required");
  }
  cfg.validate();
  MonteCarloReport report;
  report.trials.resize(options.trials);

  std::size_t threads = options.threads > 0 ? options.threads : defaultThreadCount();
  if (std::getenv("RELPOSE_MAX_THREADS") != nullptr) {
    threads = std::min(threads, defaultThreadCount());
  }
  threads = std::min(threads, options.trials);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < options.trials; i = next++) {
      try {
        report.trials[i] = runTrial(cfg, settings, options.masterSeed, i);
      } catch (const std::exception& e) {
        report.trials[i] = TrialResult{};
        report.trials[i].error = e.what();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back(worker);
    }
  }

  for (const auto& t : report.trials) {
    report.failedTrials += t.ok ? 0 : 1;
  }
  const int stateDof = 6 * static_cast<int>(cfg.team.size() - 1);
  report.filters = summarize(report.trials, settings, stateDof, cfg.warmup, options.neesTransient);
  report.failureLimitExceeded = static_cast<double>(report.failedTrials) >
                                options.maxFailureFraction * static_cast<double>(options.trials);
  if (report.failureLimitExceeded && options.throwOnFailure) {
    throw RunFailureError("monte carlo: " + std::to_string(report.failedTrials) + " of " +
                          std::to_string(options.trials) + " trials failed");
  }
  return report;
}

}  // namespace relpose
