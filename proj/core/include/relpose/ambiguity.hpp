#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

#include "relpose/liegroup.hpp"
#include "relpose/models.hpp"

namespace relpose {

/**
 * Ranges between the reference robot's tags (tau_1, tau_2) and a target robot's tags
 * (tau_i, tau_j). tau_1/tau_2 are the first two tags of the reference robot, tau_i/tau_j
 * the first two tags of the target robot.
 */
struct PairRanges
{
  double y1i = 0.0;
  double y1j = 0.0;
  double y2i = 0.0;
  double y2j = 0.0;
};

struct PlanarMode
{
  int index = 0;  ///< 1..4; 1/2 are the circle-intersection branches, 3/4 their flips
  Pose2 pose;     ///< T_1p in SE(2)
  bool valid = false;
};

struct PlanarModeSet
{
  std::array<PlanarMode, 4> modes;

  int validCount() const;
};

/// One element of the Cartesian product of per-robot modes.
struct ModeCombination
{
  int index = 0;                ///< 1..M
  std::vector<int> modeIndices;  ///< chosen mode (1..4) per non-reference robot
  RelativeState<2> state;
};

/// Tolerance below which a negative circle discriminant is clamped to zero.
double discriminantTolerance(double y1Squared, double baselineSquared);

/**
 * Closed-form planar solutions for the pose of `target` relative to `reference`.
 * Modes whose circles fail to intersect beyond the clamp tolerance are marked invalid,
 * unless the ranges miss the triangle inequality by no more than `rangeSlack` meters, in
 * which case the circles are treated as tangent.
 * Throws std::invalid_argument for non-positive or non-finite ranges, or a degenerate
 * tag baseline on either robot.
 */
PlanarModeSet solvePair(const RobotGeometry& reference, const RobotGeometry& target,
                        const PairRanges& ranges, double rangeSlack = 0.0);

/// Cartesian product over valid modes, robot 2 varying fastest.
/// Throws NoSolutionError when some robot has no valid mode.
std::vector<ModeCombination> enumerateCombinations(const std::vector<PlanarModeSet>& perPair);

/// Reflection of `p` about the line through `anchor` with direction `axis`.
Eigen::Vector2d reflectAboutAxis(const Eigen::Vector2d& p, const Eigen::Vector2d& axis,
                                 const Eigen::Vector2d& anchor);

/// Pulls the four ranges between robot 1 and robot index `robotIndex` out of a range
/// vector stacked in `graph` order. Throws std::invalid_argument if an edge is missing.
PairRanges pairRangesFor(const RobotTeam& team, const MeasurementGraph& graph,
                         const Eigen::VectorXd& ranges, std::size_t robotIndex);

/// solvePair for every non-reference robot followed by enumerateCombinations.
std::vector<ModeCombination> geometricCombinations(const RobotTeam& team,
                                                   const MeasurementGraph& graph,
                                                   const Eigen::VectorXd& ranges,
                                                   double rangeSlack = 0.0);

}  // namespace relpose
