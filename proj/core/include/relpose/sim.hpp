#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "relpose/filters.hpp"
#include "relpose/gils.hpp"
#include "relpose/models.hpp"

namespace relpose {

/// More than the allowed fraction of Monte-Carlo trials failed.
class RunFailureError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Band-limited random motion: first-order low-pass filtered white noise, with velocity
/// components reflected at the workspace walls.
struct MotionProfile
{
  double yawRateStd = 0.3;     ///< rad/s
  double tiltRateStd = 0.1;    ///< rad/s, roll and pitch
  double tiltStiffness = 2.0;  ///< 1/s, pulls the body z axis back to vertical
  double speedStd = 0.5;       ///< m/s, horizontal
  double climbStd = 0.25;      ///< m/s, vertical
  double cutoffHz = 0.5;
  Eigen::Vector3d workspaceMin = Eigen::Vector3d(0.0, 0.0, 0.0);
  Eigen::Vector3d workspaceMax = Eigen::Vector3d(6.0, 6.0, 3.0);
};

struct ScenarioConfig
{
  RobotTeam team;
  MeasurementGraph graph;
  double rateHz = 50.0;
  double rangeSigma = 0.1;
  double duration = 30.0;  ///< motion phase (s), filtered after initialization
  double warmup = 4.0;     ///< static phase before motion (s); supplies the GI-LS window
  int gamma = 200;         ///< snapshots averaged for GI-LS, taken from the end of the warmup
  std::vector<TangentMatrix<3>> inputNoise;  ///< Q_p per robot, team order
  MotionProfile motion;
  double minSeparation = 1.0;  ///< initial robot spacing bounds (m)
  double maxSeparation = 5.0;

  /// Throws std::invalid_argument on rate <= 0, duration <= warmup or warmup < 0,
  /// sigma <= 0, gamma outside [1, warmup * rate], or a Q count mismatch.
  void validate() const;
  int warmupSnapshots() const;
  int motionSteps() const;
};

/// Two tags per robot at [0.17, +-0.17, 0] m, tag IDs 2p-1 and 2p for robot p.
std::vector<RobotGeometry> standardTagLayout(int robots);

/// Q = diag(gyro^2 I3, velocity^2 I3).
TangentMatrix<3> inputNoiseCovariance(double gyroStd, double velocityStd);

/// Standard layout, all inter-robot edges, 50 Hz, sigma 0.1 m, gyro 0.01 rad/s and
/// velocity 0.05 m/s input noise.
ScenarioConfig defaultScenario(int robots);

// ---------------------------------------------------------------------------
// Data generation
// ---------------------------------------------------------------------------

struct Trajectory
{
  /// times[0] is the end of the warmup; times[k] = (W + k) / rate.
  std::vector<double> times;
  /// global[k][r]: pose of robot r in the world frame at times[k].
  std::vector<std::vector<Pose3>> global;
  /// velocities[k][r]: true body input held over (times[k], times[k+1]].
  std::vector<std::vector<Tangent<3>>> velocities;

  /// T_g1^-1 T_gp for every robot p >= 2 at times[k].
  State3 relative(std::size_t k) const;
};

Trajectory generateTrajectory(const ScenarioConfig& cfg, std::uint64_t seed,
                              bool zeroVelocity = false);

struct TimedState
{
  double timestamp = 0.0;
  State3 state;
};

/// rangeStack(truth) plus i.i.d. N(0, sigma^2) per edge.
std::vector<RangeSnapshot> simulateRanges(std::span<const TimedState> truth, const RobotTeam& team,
                                          const MeasurementGraph& graph, double sigma,
                                          std::uint64_t seed);

/// One filter step: ranges at `timestamp` and the inputs held since the previous step.
struct SensorStep
{
  double timestamp = 0.0;
  RangeSnapshot ranges;
  std::vector<Input3> inputs;  ///< team order, index 0 is the reference robot
};

/// Everything a filter run consumes; produced by simulation or by log replay.
struct SensorStream
{
  std::vector<RangeSnapshot> warmup;  ///< static snapshots, the GI-LS window is taken from the end
  double startTime = 0.0;             ///< filters are initialized here
  std::vector<SensorStep> steps;
  /// Ground truth at startTime followed by one entry per step; empty when unknown.
  std::vector<State3> truth;
  /// Global ground-truth poses parallel to `truth` (team order); may be empty.
  std::vector<std::vector<Pose3>> truthGlobal;

  bool hasTruth() const { return !truth.empty(); }
};

SensorStream synthesizeStream(const ScenarioConfig& cfg, std::uint64_t trajectorySeed,
                              std::uint64_t noiseSeed);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct PairError
{
  double attitude = 0.0;  ///< rad
  double position = 0.0;  ///< m
};

std::vector<PairError> poseErrors(const State3& estimate, const State3& truth);

/// sqrt(mean(e^2)); throws std::invalid_argument on empty input.
double rmse(std::span<const double> errors);

/// e^T P^-1 e with e = log(truth^-1 estimate) blockwise.
/// Throws NumericalFailureError for singular P.
double nees(const State3& estimate, const Eigen::MatrixXd& covariance, const State3& truth);

struct ChiSquareInterval
{
  double lower = 0.0;
  double upper = 0.0;
};

/// Two-sided bounds for the average NEES of `trials` runs with `dof` degrees of freedom each.
ChiSquareInterval averageNeesInterval(int dof, int trials, double confidence = 0.99);

double median(std::vector<double> values);

// ---------------------------------------------------------------------------
// Trials
// ---------------------------------------------------------------------------

enum class FilterKind
{
  Ekf,
  Gsf,
  Pf,
};

const char* filterName(FilterKind kind);
/// Throws std::invalid_argument for names other than ekf, gsf, pf.
FilterKind parseFilterKind(const std::string& name);

struct FilterSettings
{
  std::vector<FilterKind> selected{FilterKind::Ekf, FilterKind::Gsf, FilterKind::Pf};
  std::size_t particles = 1500;
  GsfOptions gsf;
  PfOptions pf;
  GilsOptions gils;
};

struct FilterTrace
{
  FilterKind kind = FilterKind::Gsf;
  std::vector<double> times;
  std::vector<std::vector<PairError>> errors;  ///< per step, per pair; empty without truth
  std::vector<double> nees;                    ///< per step; empty without truth
  std::vector<double> stepSeconds;             ///< wall clock per predict + correct
  std::vector<std::vector<double>> weights;    ///< GSF mode weights per step
  std::vector<State3> estimates;
  int initialMode = -1;  ///< EKF: index of the mixture mode it starts from
  bool failed = false;
  std::string failure;

  double attitudeRmse() const;
  double positionRmse() const;
};

struct TrialResult
{
  bool ok = false;  ///< GI-LS succeeded; per-filter failures live in the traces
  std::string error;
  std::size_t geometricModes = 0;
  std::size_t mixtureModes = 0;
  int trueMode = -1;  ///< mixture mode closest to the truth, when known
  std::vector<FilterTrace> traces;
};

/// Per-trial seeds derived from a master seed with splitmix64.
struct TrialSeeds
{
  std::uint64_t trajectory = 0;
  std::uint64_t noise = 0;
  std::uint64_t filter = 0;
};

std::uint64_t splitmix64(std::uint64_t x);
TrialSeeds deriveSeeds(std::uint64_t masterSeed, std::size_t trial);

/// GI-LS on the stream's warmup window, then every selected filter over the steps.
/// The EKF starts from a mixture mode chosen by `filterSeed`; when truth is present the
/// mode closest to the truth is excluded (unless it is the only one).
TrialResult runFilters(const SensorStream& stream, const RobotTeam& team,
                       const MeasurementGraph& graph, const FilterSettings& settings,
                       int gamma, std::uint64_t filterSeed);

TrialResult runTrial(const ScenarioConfig& cfg, const FilterSettings& settings,
                     std::uint64_t masterSeed, std::size_t trial);

struct FilterSummary
{
  FilterKind kind = FilterKind::Gsf;
  std::vector<double> attitudeRmse;  ///< per successful trial
  std::vector<double> positionRmse;
  double medianAttitudeRmse = 0.0;
  double medianPositionRmse = 0.0;
  std::vector<double> averageNees;  ///< per step over successful trials
  ChiSquareInterval neesBounds;
  double fractionInside = 0.0;  ///< of steps after the transient
  double medianStepSeconds = 0.0;
  int failures = 0;
};

struct MonteCarloOptions
{
  std::size_t trials = 100;
  std::uint64_t masterSeed = 1;
  std::size_t threads = 0;  ///< 0: RELPOSE_MAX_THREADS or hardware concurrency
  double neesTransient = 2.0;  ///< seconds after start excluded from the inside fraction
  double maxFailureFraction = 0.2;
  bool throwOnFailure = true;  ///< false: report failureLimitExceeded instead of throwing
};

struct MonteCarloReport
{
  std::vector<TrialResult> trials;
  std::vector<FilterSummary> filters;
  int failedTrials = 0;
  bool failureLimitExceeded = false;
};

/// Runs trials in parallel and aggregates. Throws RunFailureError when more than
/// `maxFailureFraction` of trials fail.
MonteCarloReport runMonteCarlo(const ScenarioConfig& cfg, const FilterSettings& settings,
                               const MonteCarloOptions& options);

/// Summaries over already-computed trials.
std::vector<FilterSummary> summarize(const std::vector<TrialResult>& trials,
                                     const FilterSettings& settings, int stateDof,
                                     double startTime, double neesTransient);

/// Worker count from RELPOSE_MAX_THREADS, else hardware concurrency (at least 1).
std::size_t defaultThreadCount();

}  // namespace relpose
