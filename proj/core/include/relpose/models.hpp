#pragma once

#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "relpose/liegroup.hpp"

namespace relpose {

/// A ranging tag rigidly mounted on a robot; offset is resolved in the robot body frame (m).
struct TagMount
{
  int tagId = 0;
  Eigen::Vector3d offset = Eigen::Vector3d::Zero();
};

struct RobotGeometry
{
  int robotId = 0;
  std::vector<TagMount> tags;
};

/// One measured tag pair. `sigma` is the range noise standard deviation (m).
struct RangeEdge
{
  int tagA = 0;
  int tagB = 0;
  double sigma = 0.1;
};

/// Ordered edge list; the order fixes the stacking order of every range vector.
struct MeasurementGraph
{
  std::vector<RangeEdge> edges;

  std::size_t size() const { return edges.size(); }
  /// R = diag(sigma_ij^2) in edge order.
  Eigen::VectorXd noiseVariances() const;
};

/**
 * The robots taking part in the estimate. Robot at index 0 is the reference robot;
 * robot at index p >= 1 owns state block p - 1.
 */
class RobotTeam
{
public:
  struct TagLocation
  {
    std::size_t robotIndex = 0;
    Eigen::Vector3d offset = Eigen::Vector3d::Zero();
  };

  RobotTeam() = default;
  /// Throws std::invalid_argument on fewer than two robots, fewer than two distinct tags
  /// per robot, duplicate tag or robot IDs, or coincident tag offsets.
  explicit RobotTeam(std::vector<RobotGeometry> robots);

  std::size_t size() const { return robots_.size(); }
  const std::vector<RobotGeometry>& robots() const { return robots_; }
  const RobotGeometry& robot(std::size_t index) const { return robots_.at(index); }
  std::size_t indexOfRobot(int robotId) const;
  const TagLocation& tag(int tagId) const;
  bool hasTag(int tagId) const { return tags_.count(tagId) != 0; }

  /// Throws std::invalid_argument if an edge names an unknown tag or has sigma <= 0.
  void validate(const MeasurementGraph& graph) const;

private:
  std::vector<RobotGeometry> robots_;
  std::unordered_map<int, TagLocation> tags_;
};

/// All inter-robot tag pairs in deterministic order: robot pairs (p < q) lexicographic,
/// then tags of p, then tags of q. Three two-tag robots give 12 edges.
MeasurementGraph interRobotGraph(const RobotTeam& team, double sigma);

/// x = (T_12, ..., T_1N).
template<int N>
struct RelativeState
{
  std::vector<Pose<N>> poses;

  static RelativeState Identity(std::size_t blocks)
  {
    return RelativeState{std::vector<Pose<N>>(blocks, Pose<N>::Identity())};
  }
  std::size_t size() const { return poses.size(); }
  Eigen::Index dof() const { return static_cast<Eigen::Index>(poses.size()) * kDof<N>; }
};

/// Body-frame input u_p = [omega; v] with additive noise covariance Q_p.
template<int N>
struct VelocityInput
{
  int robotId = 0;
  double timestamp = 0.0;
  Tangent<N> u = Tangent<N>::Zero();
  TangentMatrix<N> q = TangentMatrix<N>::Zero();
};

struct RangeSnapshot
{
  double timestamp = 0.0;
  Eigen::VectorXd values;
};

/// Right perturbation: block p-1 becomes T_1p exp(dx_p^).
template<int N>
RelativeState<N> oplus(const RelativeState<N>& x, const Eigen::VectorXd& dx);

/// Blockwise log(from_p^-1 to_p), so that to = from (+) result.
template<int N>
Eigen::VectorXd tangentDifference(const RelativeState<N>& from, const RelativeState<N>& to);

/// T_1p,k = exp(-dt u_1^) T_1p,k-1 exp(dt u_p^).
template<int N>
Pose<N> propagatePose(const Pose<N>& relative, const Tangent<N>& uReference,
                      const Tangent<N>& uRobot, double dt);

/// Propagates every block. `others[p-2]` is the input of robot p.
template<int N>
RelativeState<N> propagate(const RelativeState<N>& previous, const VelocityInput<N>& reference,
                           std::span<const VelocityInput<N>> others, double dt);

/// Block-diagonal A with block p-1 = Ad(exp(-dt u_p^)).
template<int N>
Eigen::MatrixXd processJacobian(std::span<const VelocityInput<N>> others, double dt);

/// First-order map from input noise (w_1, w_p) to the right-perturbation state error.
struct InputJacobians
{
  Eigen::MatrixXd reference;            ///< m(N-1) x m, w.r.t. w_1
  std::vector<Eigen::MatrixXd> robots;  ///< one m(N-1) x m matrix per robot 2..N
};

template<int N>
InputJacobians inputJacobians(const RelativeState<N>& previous, const VelocityInput<N>& reference,
                              std::span<const VelocityInput<N>> others, double dt);

/// Q_state = L_1 Q_1 L_1^T + sum_p L_p Q_p L_p^T.
template<int N>
Eigen::MatrixXd processNoise(const RelativeState<N>& previous, const VelocityInput<N>& reference,
                             std::span<const VelocityInput<N>> others, double dt);

/// Position of a tag resolved in the reference robot frame.
template<int N>
Vector<N> tagPosition(const RelativeState<N>& x, const RobotTeam& team, int tagId);

/// Noiseless range for one edge.
template<int N>
double rangeOne(const RelativeState<N>& x, const RobotTeam& team, const RangeEdge& edge);

template<int N>
Eigen::VectorXd rangeStack(const RelativeState<N>& x, const RobotTeam& team,
                           const MeasurementGraph& graph);

/// |E| x m(N-1) measurement Jacobian (right perturbation).
/// Throws DegenerateGeometryError when an edge has coincident tag positions.
template<int N>
Eigen::MatrixXd measJacobian(const RelativeState<N>& x, const RobotTeam& team,
                             const MeasurementGraph& graph);

#define RELPOSE_MODELS_EXTERN(N)                                                              \
  extern template RelativeState<N> oplus<N>(const RelativeState<N>&, const Eigen::VectorXd&); \
  extern template Eigen::VectorXd tangentDifference<N>(const RelativeState<N>&,               \
                                                       const RelativeState<N>&);              \
  extern template Pose<N> propagatePose<N>(const Pose<N>&, const Tangent<N>&,                 \
                                           const Tangent<N>&, double);                        \
  extern template RelativeState<N> propagate<N>(const RelativeState<N>&,                      \
                                                const VelocityInput<N>&,                      \
                                                std::span<const VelocityInput<N>>, double);   \
  extern template Eigen::MatrixXd processJacobian<N>(std::span<const VelocityInput<N>>,       \
                                                     double);                                 \
  extern template InputJacobians inputJacobians<N>(const RelativeState<N>&,                   \
                                                   const VelocityInput<N>&,                   \
                                                   std::span<const VelocityInput<N>>, double); \
  extern template Eigen::MatrixXd processNoise<N>(const RelativeState<N>&,                    \
                                                  const VelocityInput<N>&,                    \
                                                  std::span<const VelocityInput<N>>, double); \
  extern template Vector<N> tagPosition<N>(const RelativeState<N>&, const RobotTeam&, int);   \
  extern template double rangeOne<N>(const RelativeState<N>&, const RobotTeam&,               \
                                     const RangeEdge&);                                       \
  extern template Eigen::VectorXd rangeStack<N>(const RelativeState<N>&, const RobotTeam&,    \
                                                const MeasurementGraph&);                     \
  extern template Eigen::MatrixXd measJacobian<N>(const RelativeState<N>&, const RobotTeam&,  \
                                                  const MeasurementGraph&);

RELPOSE_MODELS_EXTERN(2)
RELPOSE_MODELS_EXTERN(3)
#undef RELPOSE_MODELS_EXTERN

}  // namespace relpose
