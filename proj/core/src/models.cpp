#include "relpose/models.hpp"

#include <set>
#include <stdexcept>
#include <string>

#include "relpose/errors.hpp"

namespace relpose {

Eigen::VectorXd MeasurementGraph::noiseVariances() const
{
  Eigen::VectorXd r(static_cast<Eigen::Index>(edges.size()));
  for (std::size_t i = 0; i < edges.size(); ++i) {
    r(static_cast<Eigen::Index>(i)) = edges[i].sigma * edges[i].sigma;
  }
  return r;
}

RobotTeam::RobotTeam(std::vector<RobotGeometry> robots) : robots_(std::move(robots))
{
  if (robots_.size() < 2) {
    throw std::invalid_argument("RobotTeam: at least two robots are required");
  }
  std::set<int> robotIds;
  for (std::size_t r = 0; r < robots_.size(); ++r) {
    const auto& robot = robots_[r];
    if (!robotIds.insert(robot.robotId).second) {
      throw std::invalid_argument("RobotTeam: duplicate robot id " + std::to_string(robot.robotId));
    }
    if (robot.tags.size() < 2) {
      throw std::invalid_argument("RobotTeam: robot " + std::to_string(robot.robotId) +
                                  " needs at least two tags");
    }
    for (std::size_t a = 0; a < robot.tags.size(); ++a) {
      if (!robot.tags[a].offset.allFinite()) {
        throw std::invalid_argument("RobotTeam: non-finite tag offset");
      }
      for (std::size_t b = a + 1; b < robot.tags.size(); ++b) {
        if ((robot.tags[a].offset - robot.tags[b].offset).norm() <= 0.0) {
          throw std::invalid_argument("RobotTeam: robot " + std::to_string(robot.robotId) +
                                      " has coincident tag offsets");
        }
      }
      const auto [it, inserted] = tags_.emplace(robot.tags[a].tagId, TagLocation{r, robot.tags[a].offset});
      if (!inserted) {
        throw std::invalid_argument("RobotTeam: duplicate tag id " +
                                    std::to_string(robot.tags[a].tagId));
      }
    }
  }
}

std::size_t RobotTeam::indexOfRobot(int robotId) const
{
  for (std::size_t r = 0; r < robots_.size(); ++r) {
    if (robots_[r].robotId == robotId) {
      return r;
    }
  }
  throw std::invalid_argument("RobotTeam: unknown robot id " + std::to_string(robotId));
}

const RobotTeam::TagLocation& RobotTeam::tag(int tagId) const
{
  const auto it = tags_.find(tagId);
  if (it == tags_.end()) {
    throw std::invalid_argument("RobotTeam: unknown tag id " + std::to_string(tagId));
  }
  return it->second;
}

void RobotTeam::validate(const MeasurementGraph& graph) const
{
  for (const auto& edge : graph.edges) {
    tag(edge.tagA);
    tag(edge.tagB);
    if (edge.tagA == edge.tagB) {
      throw std::invalid_argument("MeasurementGraph: self edge on tag " + std::to_string(edge.tagA));
    }
    if (!(edge.sigma > 0.0)) {
      throw std::invalid_argument("MeasurementGraph: edge sigma must be positive");
    }
  }
}

MeasurementGraph interRobotGraph(const RobotTeam& team, double sigma)
{
  MeasurementGraph graph;
  for (std::size_t p = 0; p < team.size(); ++p) {
    for (std::size_t q = p + 1; q < team.size(); ++q) {
      for (const auto& a : team.robot(p).tags) {
        for (const auto& b : team.robot(q).tags) {
          graph.edges.push_back(RangeEdge{a.tagId, b.tagId, sigma});
        }
      }
    }
  }
  return graph;
}

template<int N>
RelativeState<N> oplus(const RelativeState<N>& x, const Eigen::VectorXd& dx)
{
  if (dx.size() != x.dof()) {
    throw std::invalid_argument("oplus: perturbation length " + std::to_string(dx.size()) +
                                " does not match state dimension " + std::to_string(x.dof()));
  }
  RelativeState<N> out = x;
  for (std::size_t b = 0; b < x.size(); ++b) {
    const Tangent<N> d = dx.segment<kDof<N>>(static_cast<Eigen::Index>(b) * kDof<N>);
    if (!d.isZero(0.0)) {
      out.poses[b] = x.poses[b] * expMap<N>(d);
    }
  }
  return out;
}

template<int N>
Eigen::VectorXd tangentDifference(const RelativeState<N>& from, const RelativeState<N>& to)
{
  if (from.size() != to.size()) {
    throw std::invalid_argument("tangentDifference: states have different block counts");
  }
  Eigen::VectorXd d(from.dof());
  for (std::size_t b = 0; b < from.size(); ++b) {
    d.segment<kDof<N>>(static_cast<Eigen::Index>(b) * kDof<N>) =
        logMap<N>(from.poses[b].inverse() * to.poses[b]);
  }
  return d;
}

template<int N>
Pose<N> propagatePose(const Pose<N>& relative, const Tangent<N>& uReference,
                      const Tangent<N>& uRobot, double dt)
{
  return expMap<N>(-dt * uReference) * relative * expMap<N>(dt * uRobot);
}

namespace {

template<int N>
void checkInputs(std::size_t blocks, std::size_t inputs, double dt)
{
  if (!(dt > 0.0)) {
    throw std::invalid_argument("propagate: dt must be positive");
  }
  if (inputs != blocks) {
    throw std::invalid_argument("propagate: expected " + std::to_string(blocks) +
                                " non-reference robot inputs, got " + std::to_string(inputs));
  }
}

}  // namespace

template<int N>
RelativeState<N> propagate(const RelativeState<N>& previous, const VelocityInput<N>& reference,
                           std::span<const VelocityInput<N>> others, double dt)
{
  checkInputs<N>(previous.size(), others.size(), dt);
  RelativeState<N> next;
  next.poses.reserve(previous.size());
  const Pose<N> left = expMap<N>(-dt * reference.u);
  for (std::size_t b = 0; b < previous.size(); ++b) {
    next.poses.push_back(left * previous.poses[b] * expMap<N>(dt * others[b].u));
  }
  return next;
}

template<int N>
Eigen::MatrixXd processJacobian(std::span<const VelocityInput<N>> others, double dt)
{
  if (!(dt > 0.0)) {
    throw std::invalid_argument("processJacobian: dt must be positive");
  }
  constexpr int m = kDof<N>;
  const auto dim = static_cast<Eigen::Index>(others.size()) * m;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t b = 0; b < others.size(); ++b) {
    const auto o = static_cast<Eigen::Index>(b) * m;
    a.block<m, m>(o, o) = adjoint<N>(expMap<N>(-dt * others[b].u));
  }
  return a;
}

template<int N>
InputJacobians inputJacobians(const RelativeState<N>& previous, const VelocityInput<N>& reference,
                              std::span<const VelocityInput<N>> others, double dt)
{
  checkInputs<N>(previous.size(), others.size(), dt);
  constexpr int m = kDof<N>;
  const Eigen::Index dim = previous.dof();
  InputJacobians out;
  out.reference = Eigen::MatrixXd::Zero(dim, m);
  const TangentMatrix<N> refJr = rightJacobian<N>(Tangent<N>(-dt * reference.u));
  for (std::size_t b = 0; b < previous.size(); ++b) {
    const auto o = static_cast<Eigen::Index>(b) * m;
    const Pose<N> moved = previous.poses[b] * expMap<N>(dt * others[b].u);
    out.reference.block<m, m>(o, 0) = -dt * adjoint<N>(moved.inverse()) * refJr;

    Eigen::MatrixXd lp = Eigen::MatrixXd::Zero(dim, m);
    lp.block<m, m>(o, 0) = dt * rightJacobian<N>(Tangent<N>(dt * others[b].u));
    out.robots.push_back(std::move(lp));
  }
  return out;
}

template<int N>
Eigen::MatrixXd processNoise(const RelativeState<N>& previous, const VelocityInput<N>& reference,
                             std::span<const VelocityInput<N>> others, double dt)
{
  const InputJacobians l = inputJacobians<N>(previous, reference, others, dt);
  Eigen::MatrixXd q = l.reference * reference.q * l.reference.transpose();
  for (std::size_t b = 0; b < others.size(); ++b) {
    q.noalias() += l.robots[b] * others[b].q * l.robots[b].transpose();
  }
  return 0.5 * (q + q.transpose());
}

namespace {

template<int N>
Vector<N> bodyOffset(const Eigen::Vector3d& offset)
{
  return offset.head<N>();
}

}  // namespace

template<int N>
Vector<N> tagPosition(const RelativeState<N>& x, const RobotTeam& team, int tagId)
{
  const auto& loc = team.tag(tagId);
  const Vector<N> r = bodyOffset<N>(loc.offset);
  if (loc.robotIndex == 0) {
    return r;
  }
  if (loc.robotIndex > x.size()) {
    throw std::invalid_argument("tagPosition: tag belongs to a robot outside the state");
  }
  return x.poses[loc.robotIndex - 1].transformPoint(r);
}

template<int N>
double rangeOne(const RelativeState<N>& x, const RobotTeam& team, const RangeEdge& edge)
{
  return (tagPosition<N>(x, team, edge.tagA) - tagPosition<N>(x, team, edge.tagB)).norm();
}

template<int N>
Eigen::VectorXd rangeStack(const RelativeState<N>& x, const RobotTeam& team,
                           const MeasurementGraph& graph)
{
  Eigen::VectorXd y(static_cast<Eigen::Index>(graph.size()));
  for (std::size_t e = 0; e < graph.size(); ++e) {
    y(static_cast<Eigen::Index>(e)) = rangeOne<N>(x, team, graph.edges[e]);
  }
  return y;
}

template<int N>
Eigen::MatrixXd measJacobian(const RelativeState<N>& x, const RobotTeam& team,
                             const MeasurementGraph& graph)
{
  constexpr int m = kDof<N>;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(graph.size()), x.dof());
  for (std::size_t e = 0; e < graph.size(); ++e) {
    const auto& edge = graph.edges[e];
    const auto& a = team.tag(edge.tagA);
    const auto& b = team.tag(edge.tagB);
    const Vector<N> diff = tagPosition<N>(x, team, edge.tagA) - tagPosition<N>(x, team, edge.tagB);
    const double range = diff.norm();
    if (!(range > 1e-12)) {
      throw DegenerateGeometryError("measJacobian: coincident tag positions on edge (" +
                                    std::to_string(edge.tagA) + ", " +
                                    std::to_string(edge.tagB) + ")");
    }
    const Eigen::Matrix<double, 1, N> rho = diff.transpose() / range;
    const auto row = static_cast<Eigen::Index>(e);

    auto addBlock = [&](const RobotTeam::TagLocation& loc, double sign) {
      if (loc.robotIndex == 0) {
        return;
      }
      const Pose<N>& pose = x.poses[loc.robotIndex - 1];
      HomogeneousPoint<N> p;
      p.template head<N>() = bodyOffset<N>(loc.offset);
      p(N) = 1.0;
      const Eigen::Matrix<double, N, m> dPos =
          pose.rotation() * odot<N>(p).template topRows<N>();
      h.block<1, m>(row, static_cast<Eigen::Index>(loc.robotIndex - 1) * m) += sign * rho * dPos;
    };
    addBlock(a, 1.0);
    addBlock(b, -1.0);
  }
  return h;
}

#define RELPOSE_MODELS_INSTANTIATE(N)                                                          \
  template RelativeState<N> oplus<N>(const RelativeState<N>&, const Eigen::VectorXd&);         \
  template Eigen::VectorXd tangentDifference<N>(const RelativeState<N>&,                       \
                                                const RelativeState<N>&);                      \
  template Pose<N> propagatePose<N>(const Pose<N>&, const Tangent<N>&, const Tangent<N>&,      \
                                    double);                                                   \
  template RelativeState<N> propagate<N>(const RelativeState<N>&, const VelocityInput<N>&,     \
                                         std::span<const VelocityInput<N>>, double);           \
  template Eigen::MatrixXd processJacobian<N>(std::span<const VelocityInput<N>>, double);      \
  template InputJacobians inputJacobians<N>(const RelativeState<N>&, const VelocityInput<N>&,  \
                                            std::span<const VelocityInput<N>>, double);        \
  template Eigen::MatrixXd processNoise<N>(const RelativeState<N>&, const VelocityInput<N>&,   \
                                           std::span<const VelocityInput<N>>, double);         \
  template Vector<N> tagPosition<N>(const RelativeState<N>&, const RobotTeam&, int);           \
  template double rangeOne<N>(const RelativeState<N>&, const RobotTeam&, const RangeEdge&);    \
  template Eigen::VectorXd rangeStack<N>(const RelativeState<N>&, const RobotTeam&,            \
                                         const MeasurementGraph&);                             \
  template Eigen::MatrixXd measJacobian<N>(const RelativeState<N>&, const RobotTeam&,          \
                                           const MeasurementGraph&);

RELPOSE_MODELS_INSTANTIATE(2)
RELPOSE_MODELS_INSTANTIATE(3)

}  // namespace relpose
