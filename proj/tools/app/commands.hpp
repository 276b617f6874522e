#pragma once

#include <iosfwd>

#include "config.hpp"

namespace relpose::app {

/// Process exit codes.
enum ExitCode : int
{
  kExitOk = 0,
  kExitOther = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumerical = 4,
};

struct SimOptions
{
  bool exportLogs = false;  ///< also write ranges/velocities/truth logs per trial
};

/// GI-LS on the last gamma snapshots of the range log; writes mixture.json.
int cmdInit(const RunConfig& cfg, std::ostream& out);

/// Monte-Carlo run; writes time series, estimates, summary.json and timing.json.
int cmdSim(const RunConfig& cfg, const SimOptions& options, std::ostream& out);

/// Runs the selected filters over logged data; same report shape as cmdSim.
int cmdReplay(const RunConfig& cfg, std::ostream& out);

/// Maps an in-flight exception to an exit code and prints it to `err`.
int reportError(std::ostream& err);

}  // namespace relpose::app
