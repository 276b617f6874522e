#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "relpose/ambiguity.hpp"
#include "relpose/models.hpp"

namespace relpose {

/// Element-wise mean of a window of static range snapshots.
struct AveragedRanges
{
  Eigen::VectorXd mean;
  int count = 0;
  double tStart = 0.0;
  double tEnd = 0.0;
};

/// Throws std::invalid_argument on an empty window or inconsistent snapshot lengths.
AveragedRanges averageRanges(std::span<const RangeSnapshot> snapshots);

struct RefineOptions
{
  double stepSize = 1.0;        ///< lambda
  int maxHalvings = 5;          ///< backtracking halvings of lambda when the cost rises
  int maxIterations = 50;
  double stepTolerance = 1e-8;  ///< stop when ||dx|| falls below this
  int divergenceLimit = 5;      ///< consecutive cost increases before giving up
};

enum class RefineStatus
{
  Converged,
  MaxIterations,
  Diverged,
  Degenerate,  ///< only reported by initializeMixture; refineMode throws instead
};

struct RefineResult
{
  RelativeState<2> state;
  int iterations = 0;
  double initialCost = 0.0;  ///< 0.5 ||g(x0) - ybar||^2
  double cost = 0.0;
  RefineStatus status = RefineStatus::Converged;
};

/// Gauss-Newton on SE(2)^(N-1): x <- x (+) (lambda dx), dx = -(H^T H)^-1 H^T e.
/// Throws DegenerateGeometryError when H^T H is rank deficient.
RefineResult refineMode(const RelativeState<2>& initial, const AveragedRanges& ranges,
                        const RobotTeam& team, const MeasurementGraph& graph,
                        const RefineOptions& options = {});

struct ModeCovariance
{
  Eigen::MatrixXd covariance;  ///< P = scale (H^T H)^-1
  double scale = 0.0;          ///< e^T e / L, L = |E| - (N - 2)
};

ModeCovariance modeCovariance(const RelativeState<2>& estimate, const AveragedRanges& ranges,
                              const RobotTeam& team, const MeasurementGraph& graph);

struct RefinedMode
{
  RelativeState<2> state;
  Eigen::MatrixXd covariance;
  double cost = 0.0;
  int combination = 0;  ///< index of the geometric combination it came from
};

/// Blockwise tangent distance; infinite when the relative rotation is near pi.
double modeDistance(const RelativeState<2>& a, const RelativeState<2>& b);

/// Merges modes closer than `mergeTolerance`, keeping the lower-cost member. Survivors keep
/// their input order.
std::vector<RefinedMode> deduplicateModes(const std::vector<RefinedMode>& modes,
                                          double mergeTolerance = 0.1);

struct LiftOptions
{
  double tiltVariance = 0.05 * 0.05;    ///< roll and pitch, rad^2
  double heightVariance = 0.05 * 0.05;  ///< z, m^2
};

struct LiftedMode
{
  RelativeState<3> state;
  Eigen::MatrixXd covariance;
};

/// Planar pose (yaw, x, y) -> SE(3) with zero roll, pitch and height.
LiftedMode liftToSE3(const RelativeState<2>& planar, const Eigen::MatrixXd& planarCovariance,
                     const LiftOptions& options = {});

struct GaussianMode
{
  double weight = 0.0;
  RelativeState<3> mean;
  Eigen::MatrixXd covariance;
  double cost = 0.0;  ///< least-squares residual cost of the source mode
};

struct GaussianMixture
{
  std::vector<GaussianMode> modes;

  double totalWeight() const;
};

/// Equal weights over the given modes. Throws NoSolutionError when empty.
GaussianMixture buildMixture(std::vector<GaussianMode> modes);

struct GilsOptions
{
  RefineOptions refine;
  double mergeTolerance = 0.1;
  /// Triangle-inequality slack for the geometric step, in standard deviations of the
  /// difference of two averaged ranges. 0 restores the strict tangency clamp.
  double slackSigmas = 4.0;
  LiftOptions lift;
};

struct GilsResult
{
  std::vector<ModeCombination> geometric;
  std::vector<RefineResult> refined;  ///< parallel to `geometric`
  std::vector<RefinedMode> survivors;
  GaussianMixture mixture;
};

/// Geometric enumeration, per-combination refinement, covariance, dedup, lift, mixture.
/// Combinations whose refinement diverges or turns degenerate are dropped; throws
/// NoSolutionError when nothing survives.
GilsResult initializeMixture(const RobotTeam& team, const MeasurementGraph& graph,
                             const AveragedRanges& ranges, const GilsOptions& options = {});

}  // namespace relpose
