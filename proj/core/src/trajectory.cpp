#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "relpose/sim.hpp"

namespace relpose {

void ScenarioConfig::validate() const
{
  if (team.size() < 2) {
    throw std::invalid_argument("scenario: at least two robots are required");
  }
  team.validate(graph);
  if (!(rateHz > 0.0)) {
    throw std::invalid_argument("scenario: rate_hz must be positive");
  }
  if (!(warmup >= 0.0) || !(duration > warmup)) {
    throw std::invalid_argument("scenario: require duration > warmup >= 0");
  }
  if (!(rangeSigma > 0.0)) {
    throw std::invalid_argument("scenario: range_sigma must be positive");
  }
  if (gamma < 1 || gamma > warmupSnapshots()) {
    throw std::invalid_argument("scenario: gamma must lie in [1, warmup * rate] = [1, " +
                                std::to_string(warmupSnapshots()) + "]");
  }
  if (inputNoise.size() != team.size()) {
    throw std::invalid_argument("scenario: one input noise covariance per robot is required");
  }
  if (!(minSeparation >= 0.0) || !(maxSeparation > minSeparation)) {
    throw std::invalid_argument("scenario: invalid separation bounds");
  }
}

int ScenarioConfig::warmupSnapshots() const
{
  return static_cast<int>(std::llround(warmup * rateHz));
}

int ScenarioConfig::motionSteps() const
{
  return static_cast<int>(std::llround(duration * rateHz));
}

std::vector<RobotGeometry> standardTagLayout(int robots)
{
  std::vector<RobotGeometry> out;
  for (int p = 1; p <= robots; ++p) {
    out.push_back(RobotGeometry{p,
                                {TagMount{2 * p - 1, Eigen::Vector3d(0.17, 0.17, 0.0)},
                                 TagMount{2 * p, Eigen::Vector3d(0.17, -0.17, 0.0)}}});
  }
  return out;
}

TangentMatrix<3> inputNoiseCovariance(double gyroStd, double velocityStd)
{
  TangentMatrix<3> q = TangentMatrix<3>::Zero();
  q.diagonal().head<3>().setConstant(gyroStd * gyroStd);
  q.diagonal().tail<3>().setConstant(velocityStd * velocityStd);
  return q;
}

ScenarioConfig defaultScenario(int robots)
{
  ScenarioConfig cfg;
  cfg.team = RobotTeam(standardTagLayout(robots));
  cfg.graph = interRobotGraph(cfg.team, cfg.rangeSigma);
  cfg.inputNoise.assign(static_cast<std::size_t>(robots), inputNoiseCovariance(0.01, 0.05));
  return cfg;
}

State3 Trajectory::relative(std::size_t k) const
{
  const auto& g = global.at(k);
  const Pose3 refInv = g.front().inverse();
  State3 x;
  for (std::size_t p = 1; p < g.size(); ++p) {
    x.poses.push_back(refInv * g[p]);
  }
  return x;
}

namespace {

std::vector<Pose3> initialPlacement(const ScenarioConfig& cfg, Rng& rng)
{
  const auto& lo = cfg.motion.workspaceMin;
  const auto& hi = cfg.motion.workspaceMax;
  std::uniform_real_distribution<double> ux(lo.x() + 0.5, hi.x() - 0.5);
  std::uniform_real_distribution<double> uy(lo.y() + 0.5, hi.y() - 0.5);
  std::uniform_real_distribution<double> yaw(-std::numbers::pi, std::numbers::pi);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::vector<Pose3> poses;
    for (std::size_t r = 0; r < cfg.team.size(); ++r) {
      Eigen::Matrix3d c = Eigen::Matrix3d::Identity();
      c.topLeftCorner<2, 2>() = planarRotation(yaw(rng));
      const double x = ux(rng);
      const double y = uy(rng);
      poses.emplace_back(c, Eigen::Vector3d(x, y, lo.z()));
    }
    bool ok = true;
    for (std::size_t a = 0; a < poses.size() && ok; ++a) {
      for (std::size_t b = a + 1; b < poses.size() && ok; ++b) {
        const double dist = (poses[a].translation() - poses[b].translation()).norm();
        ok = dist >= cfg.minSeparation && dist <= cfg.maxSeparation;
      }
    }
    if (ok) {
      return poses;
    }
  }
  throw std::invalid_argument("generateTrajectory: cannot place robots within separation bounds");
}

struct MotionState
{
  Eigen::Vector3d bodyRate = Eigen::Vector3d::Zero();     // filtered roll/pitch/yaw noise
  Eigen::Vector3d worldVelocity = Eigen::Vector3d::Zero();
};

}  // namespace

Trajectory generateTrajectory(const ScenarioConfig& cfg, std::uint64_t seed, bool zeroVelocity)
{
  cfg.validate();
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& mp = cfg.motion;
  const int w = cfg.warmupSnapshots();
  const int k = cfg.motionSteps();
  const std::size_t robots = cfg.team.size();

  Trajectory traj;
  traj.times.reserve(static_cast<std::size_t>(k) + 1);
  for (int i = 0; i <= k; ++i) {
    traj.times.push_back(static_cast<double>(w + i) / cfg.rateHz);
  }
  traj.global.push_back(initialPlacement(cfg, rng));

  const Eigen::Vector3d rateStd(mp.tiltRateStd, mp.tiltRateStd, mp.yawRateStd);
  const Eigen::Vector3d velStd(mp.speedStd, mp.speedStd, mp.climbStd);
  std::vector<MotionState> motion(robots);
  for (int i = 0; i < k; ++i) {
    const double dt = traj.times[static_cast<std::size_t>(i) + 1] - traj.times[static_cast<std::size_t>(i)];
    const double a = std::exp(-2.0 * std::numbers::pi * mp.cutoffHz * dt);
    const double b = std::sqrt(1.0 - a * a);
    std::vector<Tangent<3>> u(robots, Tangent<3>::Zero());
    std::vector<Pose3> next;
    for (std::size_t r = 0; r < robots; ++r) {
      const Pose3& pose = traj.global.back()[r];
      auto& ms = motion[r];
      for (int j = 0; j < 3; ++j) {
        ms.bodyRate(j) = a * ms.bodyRate(j) + b * rateStd(j) * normal(rng);
        ms.worldVelocity(j) = a * ms.worldVelocity(j) + b * velStd(j) * normal(rng);
        const double p = pose.translation()(j);
        if (p <= mp.workspaceMin(j) && ms.worldVelocity(j) < 0.0) {
          ms.worldVelocity(j) = -ms.worldVelocity(j);
        } else if (p >= mp.workspaceMax(j) && ms.worldVelocity(j) > 0.0) {
          ms.worldVelocity(j) = -ms.worldVelocity(j);
        }
      }
      if (!zeroVelocity) {
        const Eigen::Vector3d upInBody = pose.rotation().transpose() * Eigen::Vector3d::UnitZ();
        const Eigen::Vector3d level = mp.tiltStiffness * Eigen::Vector3d::UnitZ().cross(upInBody);
        u[r].head<3>() = ms.bodyRate + level;
        u[r].tail<3>() = pose.rotation().transpose() * ms.worldVelocity;
      }
      next.push_back(pose * expMap<3>(dt * u[r]));
    }
    traj.velocities.push_back(std::move(u));
    traj.global.push_back(std::move(next));
  }
  return traj;
}

std::vector<RangeSnapshot> simulateRanges(std::span<const TimedState> truth, const RobotTeam& team,
                                          const MeasurementGraph& graph, double sigma,
                                          std::uint64_t seed)
{
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<RangeSnapshot> out;
  out.reserve(truth.size());
  for (const auto& t : truth) {
    RangeSnapshot s;
    s.timestamp = t.timestamp;
    s.values = rangeStack<3>(t.state, team, graph);
    for (Eigen::Index e = 0; e < s.values.size(); ++e) {
      s.values(e) += sigma * noise(rng);
    }
    out.push_back(std::move(s));
  }
  return out;
}

SensorStream synthesizeStream(const ScenarioConfig& cfg, std::uint64_t trajectorySeed,
                              std::uint64_t noiseSeed)
{
  const Trajectory traj = generateTrajectory(cfg, trajectorySeed);
  const int w = cfg.warmupSnapshots();
  const std::size_t robots = cfg.team.size();

  std::vector<TimedState> truth;
  truth.reserve(static_cast<std::size_t>(w) + traj.times.size());
  const State3 start = traj.relative(0);
  for (int i = 1; i <= w; ++i) {
    truth.push_back(TimedState{static_cast<double>(i) / cfg.rateHz, start});
  }
  for (std::size_t k = 1; k < traj.times.size(); ++k) {
    truth.push_back(TimedState{traj.times[k], traj.relative(k)});
  }
  const Rng::result_type rangeSeed = splitmix64(noiseSeed ^ 0x52414e4745ULL);
  const std::vector<RangeSnapshot> ranges =
      simulateRanges(truth, cfg.team, cfg.graph, cfg.rangeSigma, rangeSeed);

  SensorStream stream;
  stream.startTime = traj.times.front();
  stream.warmup.assign(ranges.begin(), ranges.begin() + w);
  stream.truth.push_back(start);
  stream.truthGlobal.push_back(traj.global.front());

  Rng inputRng(splitmix64(noiseSeed ^ 0x56454cULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::LLT<Eigen::Matrix<double, 6, 6>>> roots;
  for (const auto& q : cfg.inputNoise) {
    roots.emplace_back(q + 1e-300 * TangentMatrix<3>::Identity());
  }
  for (std::size_t k = 1; k < traj.times.size(); ++k) {
    SensorStep step;
    step.timestamp = traj.times[k];
    step.ranges = ranges[static_cast<std::size_t>(w) + k - 1];
    for (std::size_t r = 0; r < robots; ++r) {
      Input3 in;
      in.robotId = cfg.team.robot(r).robotId;
      in.timestamp = traj.times[k - 1];
      Tangent<3> z;
      for (int j = 0; j < 6; ++j) {
        z(j) = normal(inputRng);
      }
      in.u = traj.velocities[k - 1][r] + roots[r].matrixL() * z;
      in.q = cfg.inputNoise[r];
      step.inputs.push_back(std::move(in));
    }
    stream.steps.push_back(std::move(step));
    stream.truth.push_back(traj.relative(k));
    stream.truthGlobal.push_back(traj.global[k]);
  }
  return stream;
}

}  // namespace relpose
