#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "log_io.hpp"
#include "relpose/errors.hpp"

namespace relpose::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void writeText(const fs::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError(path.string() + ": cannot write");
  }
  out << text;
}

void prepareOutput(const fs::path& dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("output directory " + dir.string() + " cannot be created");
  }
}

std::string fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json num(double v)
{
  return std::isfinite(v) ? json(v) : json(nullptr);
}

json poseJson(int robotId, const Pose3& pose)
{
  const Eigen::Matrix3d& c = pose.rotation();
  const Eigen::Vector3d& r = pose.translation();
  json rot = json::array();
  for (int i = 0; i < 3; ++i) {
    rot.push_back(json::array({c(i, 0), c(i, 1), c(i, 2)}));
  }
  return {{"robot", robotId},
          {"yaw", std::atan2(c(1, 0), c(0, 0))},
          {"x", r.x()},
          {"y", r.y()},
          {"z", r.z()},
          {"rotation", rot}};
}

json matrixJson(const Eigen::MatrixXd& m)
{
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      row.push_back(m(i, j));
    }
    rows.push_back(row);
  }
  return rows;
}

std::string traceName(const fs::path& dir, const char* prefix, FilterKind kind, std::size_t trial)
{
  return (dir / (std::string(prefix) + "_" + filterName(kind) + "_trial" + std::to_string(trial) + ".csv"))
      .string();
}

void writeTimeSeries(const fs::path& path, const FilterTrace& trace, const RobotTeam& team)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError(path.string() + ": cannot write");
  }
  const bool truth = !trace.errors.empty();
  const std::size_t modes = trace.weights.empty() ? 0 : trace.weights.front().size();
  out << "t";
  if (truth) {
    for (std::size_t p = 1; p < team.size(); ++p) {
      const std::string id = std::to_string(team.robot(p).robotId);
      out << ",att_err_" << id << ",pos_err_" << id;
    }
    out << ",nees";
  }
  for (std::size_t i = 0; i < modes; ++i) {
    out << ",w" << i;
  }
  out << '\n';
  for (std::size_t k = 0; k < trace.times.size(); ++k) {
    out << fmt(trace.times[k]);
    if (truth) {
      for (const auto& e : trace.errors[k]) {
        out << ',' << fmt(e.attitude) << ',' << fmt(e.position);
      }
      out << ',' << fmt(trace.nees[k]);
    }
    for (std::size_t i = 0; i < modes; ++i) {
      out << ',' << fmt(i < trace.weights[k].size() ? trace.weights[k][i] : 0.0);
    }
    out << '\n';
  }
}

void writeEstimates(const fs::path& path, const FilterTrace& trace, const RobotTeam& team)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError(path.string() + ": cannot write");
  }
  out << "t,robotId,x,y,z,r00,r01,r02,r10,r11,r12,r20,r21,r22\n";
  for (std::size_t k = 0; k < trace.estimates.size(); ++k) {
    const State3& x = trace.estimates[k];
    for (std::size_t b = 0; b < x.size(); ++b) {
      out << fmt(trace.times[k]) << ',' << team.robot(b + 1).robotId;
      const Eigen::Vector3d& r = x.poses[b].translation();
      out << ',' << fmt(r.x()) << ',' << fmt(r.y()) << ',' << fmt(r.z());
      const Eigen::Matrix3d& c = x.poses[b].rotation();
      for (int i = 0; i < 9; ++i) {
        out << ',' << fmt(c(i / 3, i % 3));
      }
      out << '\n';
    }
  }
}

void writeTraces(const fs::path& dir, const TrialResult& trial, std::size_t index, const RobotTeam& team)
{
  for (const auto& trace : trial.traces) {
    writeTimeSeries(traceName(dir, "timeseries", trace.kind, index), trace, team);
    writeEstimates(traceName(dir, "estimates", trace.kind, index), trace, team);
  }
}

json summaryJson(const RunConfig& cfg, const std::vector<TrialResult>& trials,
                 const std::vector<std::size_t>& trialIndices, const std::vector<FilterSummary>& filters,
                 int failedTrials, bool complete, int stateDof)
{
  json out;
  out["complete"] = complete;
  out["mode"] = modeName(cfg.mode);
  out["seed"] = cfg.seed.value_or(0);
  out["trials"] = trials.size();
  out["failed_trials"] = failedTrials;
  out["state_dof"] = stateDof;
  json list = json::array();
  for (std::size_t f = 0; f < filters.size(); ++f) {
    const FilterSummary& s = filters[f];
    json entry;
    entry["filter"] = filterName(s.kind);
    entry["failures"] = s.failures;
    const bool truth = !s.attitudeRmse.empty();
    if (truth) {
      entry["median_attitude_rmse"] = num(s.medianAttitudeRmse);
      entry["median_position_rmse"] = num(s.medianPositionRmse);
    }
    if (!s.averageNees.empty()) {
      entry["nees"] = {{"dof", stateDof},
                       {"lower", s.neesBounds.lower},
                       {"upper", s.neesBounds.upper},
                       {"fraction_inside", s.fractionInside}};
    }
    json per = json::array();
    for (std::size_t t = 0; t < trials.size(); ++t) {
      const TrialResult& tr = trials[t];
      json item;
      item["trial"] = trialIndices[t];
      item["ok"] = tr.ok;
      item["geometric_modes"] = tr.geometricModes;
      item["mixture_modes"] = tr.mixtureModes;
      if (!tr.ok) {
        item["error"] = tr.error;
      } else if (f < tr.traces.size()) {
        const FilterTrace& trace = tr.traces[f];
        item["failed"] = trace.failed;
        if (trace.failed) {
          item["error"] = trace.failure;
        } else if (!trace.errors.empty()) {
          item["attitude_rmse"] = num(trace.attitudeRmse());
          item["position_rmse"] = num(trace.positionRmse());
        }
        if (trace.kind == FilterKind::Ekf) {
          item["initial_mode"] = trace.initialMode;
          item["true_mode"] = tr.trueMode;
        }
        if (!trace.weights.empty()) {
          item["final_weights"] = trace.weights.back();
        }
      }
      per.push_back(item);
    }
    entry["per_trial"] = per;
    list.push_back(entry);
  }
  out["filters"] = list;
  return out;
}

json timingJson(const std::vector<FilterSummary>& filters)
{
  json out = json::object();
  for (const auto& s : filters) {
    out[filterName(s.kind)] = {{"median_step_seconds", s.medianStepSeconds},
                               {"rate_hz", s.medianStepSeconds > 0.0 ? 1.0 / s.medianStepSeconds : 0.0}};
  }
  return out;
}

int stateDofOf(const RunConfig& cfg)
{
  return 6 * static_cast<int>(cfg.scenario.team.size() - 1);
}

}  // namespace

int cmdInit(const RunConfig& cfg, std::ostream& out)
{
  const auto rows = readRangeLog(cfg.logs.ranges);
  const auto snapshots = assembleSnapshots(rows, cfg.scenario.graph);
  const auto gamma = static_cast<std::size_t>(cfg.scenario.gamma);
  if (snapshots.size() < gamma) {
    throw DataError("range log: " + std::to_string(snapshots.size()) + " snapshots, gamma=" +
                    std::to_string(gamma) + " required");
  }
  const std::span<const RangeSnapshot> window(snapshots.data() + snapshots.size() - gamma, gamma);
  GilsResult gils;
  try {
    gils = initializeMixture(cfg.scenario.team, cfg.scenario.graph, averageRanges(window), cfg.filters.gils);
  } catch (const NoSolutionError& e) {
    throw NoSolutionError(std::string("init: ") + e.what() + " (window " + std::to_string(window.front().timestamp) +
                          " to " + std::to_string(window.back().timestamp) + " s)");
  }

  prepareOutput(cfg.output);
  json modes = json::array();
  const RobotTeam& team = cfg.scenario.team;
  for (std::size_t i = 0; i < gils.mixture.modes.size(); ++i) {
    const GaussianMode& m = gils.mixture.modes[i];
    json poses = json::array();
    for (std::size_t b = 0; b < m.mean.size(); ++b) {
      poses.push_back(poseJson(team.robot(b + 1).robotId, m.mean.poses[b]));
    }
    modes.push_back({{"index", i},
                     {"weight", m.weight},
                     {"cost", m.cost},
                     {"combination", gils.survivors[i].combination},
                     {"poses", poses},
                     {"covariance", matrixJson(m.covariance)}});
  }
  const json report = {{"geometric_modes", gils.geometric.size()},
                       {"mode_count", gils.mixture.modes.size()},
                       {"gamma", gamma},
                       {"window", {window.front().timestamp, window.back().timestamp}},
                       {"modes", modes}};
  writeText(cfg.output / "mixture.json", report.dump(2) + "\n");

  out << "geometric combinations: " << gils.geometric.size() << "\n";
  out << "modes: " << gils.mixture.modes.size() << "\n";
  for (std::size_t i = 0; i < gils.mixture.modes.size(); ++i) {
    out << "  mode " << i << " cost " << fmt(gils.mixture.modes[i].cost) << "\n";
  }
  return kExitOk;
}

int cmdSim(const RunConfig& cfg, const SimOptions& options, std::ostream& out)
{
  prepareOutput(cfg.output);
  MonteCarloOptions mc;
  mc.trials = cfg.trials;
  mc.masterSeed = cfg.seed.value_or(0);
  mc.throwOnFailure = false;
  const MonteCarloReport report = runMonteCarlo(cfg.scenario, cfg.filters, mc);

  const RobotTeam& team = cfg.scenario.team;
  std::vector<std::size_t> indices;
  for (std::size_t k = 0; k < report.trials.size(); ++k) {
    indices.push_back(k);
    writeTraces(cfg.output, report.trials[k], k, team);
    if (options.exportLogs) {
      const TrialSeeds seeds = deriveSeeds(mc.masterSeed, k);
      const SensorStream stream = synthesizeStream(cfg.scenario, seeds.trajectory, seeds.noise);
      const std::string suffix = "_trial" + std::to_string(k) + ".csv";
      writeRangeLog(cfg.output / ("ranges" + suffix), stream, cfg.scenario.graph);
      writeVelocityLog(cfg.output / ("velocities" + suffix), stream);
      writeTruthLog(cfg.output / ("truth" + suffix), stream, team);
    }
  }
  const bool complete = !report.failureLimitExceeded;
  writeText(cfg.output / "summary.json",
            summaryJson(cfg, report.trials, indices, report.filters, report.failedTrials, complete,
                        stateDofOf(cfg))
                    .dump(2) +
                "\n");
  writeText(cfg.output / "timing.json", timingJson(report.filters).dump(2) + "\n");
  writeText(cfg.output / "config.json", emitConfig(cfg));

  for (const auto& s : report.filters) {
    out << filterName(s.kind) << ": median attitude RMSE " << fmt(s.medianAttitudeRmse) << " rad, position RMSE "
        << fmt(s.medianPositionRmse) << " m, NEES inside " << fmt(s.fractionInside) << ", failures " << s.failures
        << "\n";
  }
  if (!complete) {
    out << "run failed: " << report.failedTrials << " of " << report.trials.size()
        << " trials failed; outputs are partial (summary.json complete=false)\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int cmdReplay(const RunConfig& cfg, std::ostream& out)
{
  const auto ranges = readRangeLog(cfg.logs.ranges);
  const auto velocities = readVelocityLog(cfg.logs.velocities);
  std::vector<TruthRecord> truth;
  if (!cfg.logs.truth.empty()) {
    truth = readTruthLog(cfg.logs.truth);
  }
  const SensorStream stream = assembleStream(ranges, velocities, truth, cfg.scenario);
  prepareOutput(cfg.output);

  const TrialSeeds seeds = deriveSeeds(cfg.seed.value_or(0), cfg.trial);
  const TrialResult result =
      runFilters(stream, cfg.scenario.team, cfg.scenario.graph, cfg.filters, cfg.scenario.gamma, seeds.filter);
  const std::vector<TrialResult> trials{result};
  const std::vector<std::size_t> indices{cfg.trial};
  writeTraces(cfg.output, result, cfg.trial, cfg.scenario.team);
  const auto filters = summarize(trials, cfg.filters, stateDofOf(cfg), stream.startTime, 2.0);
  writeText(cfg.output / "summary.json",
            summaryJson(cfg, trials, indices, filters, result.ok ? 0 : 1, true, stateDofOf(cfg)).dump(2) + "\n");
  writeText(cfg.output / "timing.json", timingJson(filters).dump(2) + "\n");

  out << "replayed " << stream.steps.size() << " steps, " << result.mixtureModes << " modes\n";
  for (const auto& trace : result.traces) {
    out << filterName(trace.kind) << ": " << (trace.failed ? "failed: " + trace.failure : "ok") << "\n";
  }
  return kExitOk;
}

int reportError(std::ostream& err)
{
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const RunFailureError& e) {
    err << "run failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NumericalFailureError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NoSolutionError& e) {
    err << "no solution: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DegenerateGeometryError& e) {
    err << "degenerate geometry: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitOther;
  }
}

}  // namespace relpose::app
