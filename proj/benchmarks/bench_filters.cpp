#include <benchmark/benchmark.h>

#include <cmath>

#include "relpose/ambiguity.hpp"
#include "relpose/filters.hpp"
#include "relpose/gils.hpp"
#include "relpose/sim.hpp"

using namespace relpose;

namespace {

// 3 robots, robot 2 at (1.5, 0) yaw 0, robot 3 at (2cos2, 2sin2) yaw 2; the GI-LS mixture has 8 modes
struct Scene
{
  RobotTeam team{standardTagLayout(3)};
  MeasurementGraph graph = interRobotGraph(team, 0.1);
  RelativeState<2> truth;
  AveragedRanges averaged;
  GaussianMixture mixture;
  std::vector<Input3> inputs;
  RangeSnapshot snapshot;

  Scene()
  {
    truth.poses = {Pose2(planarRotation(0.0), Eigen::Vector2d(1.5, 0.0)),
                   Pose2(planarRotation(2.0), Eigen::Vector2d(2.0 * std::cos(2.0), 2.0 * std::sin(2.0)))};
    averaged.mean = rangeStack<2>(truth, team, graph);
    averaged.count = 200;
    mixture = initializeMixture(team, graph, averaged).mixture;
    for (const auto& r : team.robots()) {
      Input3 in;
      in.robotId = r.robotId;
      in.u << 0.0, 0.0, 0.1, 0.3, 0.0, 0.0;
      in.q = inputNoiseCovariance(0.01, 0.05);
      inputs.push_back(in);
    }
    snapshot.timestamp = 0.02;
    snapshot.values = averaged.mean;
  }

  std::span<const Input3> others() const { return {inputs.data() + 1, inputs.size() - 1}; }
};

const Scene& scene()
{
  static const Scene s;
  return s;
}

void BM_GsfStep(benchmark::State& state)
{
  const Scene& s = scene();
  const GsfBelief belief = initGsf(s.mixture);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gsfStep(belief, s.inputs[0], s.others(), 0.02, s.snapshot, s.team, s.graph));
  }
  state.counters["modes"] = static_cast<double>(s.mixture.modes.size());
}
BENCHMARK(BM_GsfStep)->Unit(benchmark::kMicrosecond);

void BM_PfStep(benchmark::State& state)
{
  const Scene& s = scene();
  Rng rng(7);
  const ParticleBelief belief = initParticles(s.mixture, static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        pfStep(belief, s.inputs[0], s.others(), 0.02, s.snapshot, s.team, s.graph, s.mixture, rng));
  }
}
BENCHMARK(BM_PfStep)->Arg(1500)->Arg(500)->Unit(benchmark::kMicrosecond);

void BM_GilsInit(benchmark::State& state)
{
  const Scene& s = scene();
  for (auto _ : state) {
    benchmark::DoNotOptimize(initializeMixture(s.team, s.graph, s.averaged));
  }
}
BENCHMARK(BM_GilsInit)->Unit(benchmark::kMicrosecond);

void BM_GeometricCombinations(benchmark::State& state)
{
  const Scene& s = scene();
  for (auto _ : state) {
    benchmark::DoNotOptimize(geometricCombinations(s.team, s.graph, s.averaged.mean));
  }
}
BENCHMARK(BM_GeometricCombinations)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
