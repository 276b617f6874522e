#include "relpose/ambiguity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "relpose/errors.hpp"

namespace relpose {

namespace {

Eigen::Vector2d perpendicular(const Eigen::Vector2d& v)
{
  return Eigen::Vector2d(-v.y(), v.x());
}

void requirePositiveRange(double y, const char* name)
{
  if (!std::isfinite(y) || !(y > 0.0)) {
    throw std::invalid_argument(std::string("solvePair: range ") + name +
                                " must be positive and finite");
  }
}

struct TagOnCircle
{
  double along = 0.0;   // e_mu
  double across = 0.0;  // h_mu
  bool valid = false;
};

TagOnCircle intersectCircles(double y1, double y2, double d, double slack)
{
  const double y1s = y1 * y1;
  const double e = (y1s - y2 * y2 + d * d) / (2.0 * d);
  const double disc = y1s - e * e;
  TagOnCircle out;
  out.along = e;
  if (disc < -discriminantTolerance(y1s, d * d)) {
    const double miss = std::max(std::abs(y1 - y2) - d, d - y1 - y2);
    if (!(miss <= slack)) {
      return out;
    }
    out.along = std::clamp(e, -y1, y1);
  }
  out.across = std::sqrt(std::max(disc, 0.0));
  out.valid = true;
  return out;
}

}  // namespace

int PlanarModeSet::validCount() const
{
  return static_cast<int>(
      std::count_if(modes.begin(), modes.end(), [](const PlanarMode& m) { return m.valid; }));
}

double discriminantTolerance(double y1Squared, double baselineSquared)
{
  return std::max(1e-9 * std::max(y1Squared, baselineSquared), 1e-12);
}

Eigen::Vector2d reflectAboutAxis(const Eigen::Vector2d& p, const Eigen::Vector2d& axis,
                                 const Eigen::Vector2d& anchor)
{
  const double n2 = axis.squaredNorm();
  if (!(n2 > 0.0)) {
    throw std::invalid_argument("reflectAboutAxis: axis must be nonzero");
  }
  // With axis = [b; a]: ([b^2 - a^2, 2ab; 2ab, a^2 - b^2] (p - anchor)) / (a^2 + b^2) + anchor.
  const double b = axis.x();
  const double a = axis.y();
  Eigen::Matrix2d m;
  m << b * b - a * a, 2.0 * a * b, 2.0 * a * b, a * a - b * b;
  return anchor + m * (p - anchor) / n2;
}

PlanarModeSet solvePair(const RobotGeometry& reference, const RobotGeometry& target,
                        const PairRanges& ranges, double rangeSlack)
{
  if (reference.tags.size() != 2 || target.tags.size() != 2) {
    throw std::invalid_argument("solvePair: exactly two tags per robot are supported");
  }
  requirePositiveRange(ranges.y1i, "y1i");
  requirePositiveRange(ranges.y1j, "y1j");
  requirePositiveRange(ranges.y2i, "y2i");
  requirePositiveRange(ranges.y2j, "y2j");

  const Eigen::Vector2d tag1 = reference.tags[0].offset.head<2>();
  const Eigen::Vector2d tag2 = reference.tags[1].offset.head<2>();
  const double d = (tag2 - tag1).norm();
  if (!(d > 0.0)) {
    throw std::invalid_argument("solvePair: reference tag baseline has zero length");
  }
  const Eigen::Vector2d n1 = (tag2 - tag1) / d;
  const Eigen::Vector2d n1Perp = perpendicular(n1);

  const Eigen::Vector2d offI = target.tags[0].offset.head<2>();
  const Eigen::Vector2d offJ = target.tags[1].offset.head<2>();
  const Eigen::Vector2d bodyIJ = offI - offJ;
  if (!(bodyIJ.norm() > 0.0)) {
    throw std::invalid_argument("solvePair: target tags coincide in the plane");
  }
  const double headingInBody = std::atan2(bodyIJ.y(), bodyIJ.x());

  const TagOnCircle ci = intersectCircles(ranges.y1i, ranges.y2i, d, rangeSlack);
  const TagOnCircle cj = intersectCircles(ranges.y1j, ranges.y2j, d, rangeSlack);
  const bool valid = ci.valid && cj.valid;

  // tau_j may sit on the other side of the reference baseline; pick the sign whose tag
  // separation best matches the body baseline
  const double bodyLen = bodyIJ.norm();
  auto separation = [&](double sj) {
    const Eigen::Vector2d i = ci.along * n1 + ci.across * n1Perp;
    const Eigen::Vector2d j = cj.along * n1 + sj * cj.across * n1Perp;
    return std::abs((i - j).norm() - bodyLen);
  };
  const double jSign = separation(-1.0) < separation(1.0) ? -1.0 : 1.0;

  PlanarModeSet out;
  if (!valid) {
    for (int alpha = 0; alpha < 4; ++alpha) {
      out.modes[alpha] = PlanarMode{alpha + 1, Pose2(), false};
    }
    return out;
  }
  for (int alpha = 0; alpha < 2; ++alpha) {
    const double side = alpha == 0 ? 1.0 : -1.0;
    const Eigen::Vector2d tagI = tag1 + ci.along * n1 + side * ci.across * n1Perp;
    const Eigen::Vector2d tagJ = tag1 + cj.along * n1 + side * jSign * cj.across * n1Perp;
    const Eigen::Vector2d ij = tagI - tagJ;
    const double headingInRef = std::atan2(ij.y(), ij.x());
    const Eigen::Matrix2d c = planarRotation(headingInRef - headingInBody);
    const Eigen::Vector2d origin = tagI - c * offI;

    out.modes[alpha] = PlanarMode{alpha + 1, Pose2(c, origin), valid};

    // Flip: tau_i and tau_j trade places. Reflecting the origin about the tag axis and then
    // about the perpendicular through the tag midpoint places the swapped tags exactly.
    Eigen::Vector2d flipped = tagI + tagJ - origin;
    if (ij.norm() > 0.0) {
      flipped = reflectAboutAxis(reflectAboutAxis(origin, -ij, tagI), perpendicular(ij),
                                 0.5 * (tagI + tagJ));
    }
    const Eigen::Matrix2d cFlip = planarRotation(std::numbers::pi) * c;
    out.modes[alpha + 2] = PlanarMode{alpha + 3, Pose2(cFlip, flipped), valid};
  }
  return out;
}

std::vector<ModeCombination> enumerateCombinations(const std::vector<PlanarModeSet>& perPair)
{
  if (perPair.empty()) {
    throw std::invalid_argument("enumerateCombinations: no robot pairs");
  }
  std::vector<std::vector<const PlanarMode*>> choices;
  for (std::size_t p = 0; p < perPair.size(); ++p) {
    std::vector<const PlanarMode*> valid;
    for (const auto& mode : perPair[p].modes) {
      if (mode.valid) {
        valid.push_back(&mode);
      }
    }
    if (valid.empty()) {
      throw NoSolutionError("enumerateCombinations: robot " + std::to_string(p + 2) +
                            " has no valid geometric mode");
    }
    choices.push_back(std::move(valid));
  }

  std::size_t total = 1;
  for (const auto& c : choices) {
    total *= c.size();
  }
  std::vector<ModeCombination> out;
  out.reserve(total);
  std::vector<std::size_t> digit(choices.size(), 0);
  for (std::size_t k = 0; k < total; ++k) {
    ModeCombination combo;
    combo.index = static_cast<int>(k + 1);
    for (std::size_t p = 0; p < choices.size(); ++p) {
      const PlanarMode* mode = choices[p][digit[p]];
      combo.modeIndices.push_back(mode->index);
      combo.state.poses.push_back(mode->pose);
    }
    out.push_back(std::move(combo));
    for (std::size_t p = 0; p < choices.size(); ++p) {
      if (++digit[p] < choices[p].size()) {
        break;
      }
      digit[p] = 0;
    }
  }
  return out;
}

PairRanges pairRangesFor(const RobotTeam& team, const MeasurementGraph& graph,
                         const Eigen::VectorXd& ranges, std::size_t robotIndex)
{
  if (robotIndex == 0 || robotIndex >= team.size()) {
    throw std::invalid_argument("pairRangesFor: robot index out of range");
  }
  if (ranges.size() != static_cast<Eigen::Index>(graph.size())) {
    throw std::invalid_argument("pairRangesFor: range vector does not match graph");
  }
  const auto& ref = team.robot(0).tags;
  const auto& tgt = team.robot(robotIndex).tags;

  auto lookup = [&](int a, int b) {
    for (std::size_t e = 0; e < graph.size(); ++e) {
      const auto& edge = graph.edges[e];
      if ((edge.tagA == a && edge.tagB == b) || (edge.tagA == b && edge.tagB == a)) {
        return ranges(static_cast<Eigen::Index>(e));
      }
    }
    throw std::invalid_argument("pairRangesFor: graph lacks edge (" + std::to_string(a) + ", " +
                                std::to_string(b) + ")");
  };
  return PairRanges{lookup(ref[0].tagId, tgt[0].tagId), lookup(ref[0].tagId, tgt[1].tagId),
                    lookup(ref[1].tagId, tgt[0].tagId), lookup(ref[1].tagId, tgt[1].tagId)};
}

std::vector<ModeCombination> geometricCombinations(const RobotTeam& team,
                                                   const MeasurementGraph& graph,
                                                   const Eigen::VectorXd& ranges,
                                                   double rangeSlack)
{
  std::vector<PlanarModeSet> perPair;
  for (std::size_t p = 1; p < team.size(); ++p) {
    perPair.push_back(
        solvePair(team.robot(0), team.robot(p), pairRangesFor(team, graph, ranges, p), rangeSlack));
  }
  return enumerateCombinations(perPair);
}

}  // namespace relpose
