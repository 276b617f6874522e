#pragma once

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "relpose/liegroup.hpp"
#include "relpose/models.hpp"
#include "relpose/sim.hpp"

namespace relpose::testing {

inline Eigen::VectorXd randomVector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0)
{
  std::normal_distribution<double> d(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    v(i) = d(rng);
  }
  return v;
}

template<int N>
Tangent<N> randomTangent(std::mt19937_64& rng, double scale = 1.0)
{
  return randomVector(rng, kDof<N>, scale);
}

/// Uniform-ish rotation angle below `maxAngle`, translation scaled by `spread`.
template<int N>
Pose<N> randomPose(std::mt19937_64& rng, double maxAngle = 3.0, double spread = 2.0)
{
  Tangent<N> v = randomTangent<N>(rng, spread);
  constexpr int r = kDof<N> - N;
  auto ang = v.template head<r>();
  std::uniform_real_distribution<double> u(0.0, maxAngle);
  if (ang.norm() > 0.0) {
    ang *= u(rng) / ang.norm();
  }
  return expMap<N>(v);
}

/// exp of a square matrix by truncated power series.
inline Eigen::MatrixXd seriesExp(const Eigen::MatrixXd& a, int terms = 30)
{
  Eigen::MatrixXd sum = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd term = sum;
  for (int k = 1; k < terms; ++k) {
    term = term * a / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

inline State3 randomState(std::mt19937_64& rng, std::size_t blocks, double maxAngle = 2.5)
{
  State3 x;
  for (std::size_t b = 0; b < blocks; ++b) {
    x.poses.push_back(randomPose<3>(rng, maxAngle, 2.0));
  }
  return x;
}

inline Input3 randomInput(std::mt19937_64& rng, int robotId, double scale = 0.5)
{
  Input3 in;
  in.robotId = robotId;
  in.u = randomTangent<3>(rng, scale);
  const Eigen::Matrix<double, 6, 6> a = Eigen::Matrix<double, 6, 6>::Random() * 0.05;
  in.q = a * a.transpose();
  return in;
}

/// Range between two tags computed from world-frame placements of every robot.
inline double globalRange(const std::vector<Pose3>& world, const RobotTeam& team, int tagA, int tagB)
{
  const auto& a = team.tag(tagA);
  const auto& b = team.tag(tagB);
  return (world[a.robotIndex].transformPoint(a.offset) - world[b.robotIndex].transformPoint(b.offset)).norm();
}

/// Places the reference robot at `reference` and the rest by composing the relative state.
inline std::vector<Pose3> toWorld(const Pose3& reference, const State3& x)
{
  std::vector<Pose3> out{reference};
  for (const auto& p : x.poses) {
    out.push_back(reference * p);
  }
  return out;
}

inline Pose3 planarPose3(double yaw, double x, double y)
{
  Eigen::Matrix3d c = Eigen::Matrix3d::Identity();
  c.topLeftCorner<2, 2>() = planarRotation(yaw);
  return Pose3(c, Eigen::Vector3d(x, y, 0.0));
}

/// Reference 3-robot scene used by the mode-reduction checks.
inline State3 referenceScene()
{
  State3 x;
  x.poses = {planarPose3(0.0, 1.5, 0.0), planarPose3(2.0, 2.0 * std::cos(2.0), 2.0 * std::sin(2.0))};
  return x;
}

inline RelativeState<2> toPlanar(const State3& x)
{
  RelativeState<2> out;
  for (const auto& p : x.poses) {
    const Eigen::Matrix3d& c = p.rotation();
    out.poses.emplace_back(planarRotation(std::atan2(c(1, 0), c(0, 0))), p.translation().head<2>());
  }
  return out;
}

inline double relativeError(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
  const double scale = std::max(1.0, b.norm());
  return (a - b).norm() / scale;
}

}  // namespace relpose::testing
