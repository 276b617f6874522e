#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace relpose;
using namespace relpose::app;

namespace {

struct Overrides
{
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  std::string filters;
  std::size_t trials = 0;
  std::size_t trial = 0;
  std::string ranges;
  std::string velocities;
  std::string truth;
  bool exportLogs = false;
};

void addCommon(CLI::App* cmd, Overrides& o)
{
  cmd->add_option("--config", o.config, "JSON run configuration")->required();
  cmd->add_option("--out", o.out, "output directory (overrides the config)");
}

bool given(const CLI::App* cmd, const std::string& name)
{
  const CLI::Option* opt = cmd->get_option_no_throw(name);
  return opt != nullptr && opt->count() > 0;
}

RunConfig load(const Overrides& o, const CLI::App* cmd, RunMode mode)
{
  RunConfig cfg = parseConfig(o.config);
  cfg.mode = mode;
  if (!o.out.empty()) {
    cfg.output = o.out;
  }
  if (given(cmd, "--seed")) {
    cfg.seed = o.seed;
  }
  if (given(cmd, "--trials")) {
    if (o.trials < 1) {
      throw ConfigError("--trials must be at least 1");
    }
    cfg.trials = o.trials;
  }
  if (given(cmd, "--trial")) {
    cfg.trial = o.trial;
  }
  if (!o.filters.empty()) {
    cfg.filters.selected.clear();
    std::stringstream in(o.filters);
    std::string name;
    while (std::getline(in, name, ',')) {
      try {
        cfg.filters.selected.push_back(parseFilterKind(name));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("--filters: ") + e.what());
      }
    }
    if (cfg.filters.selected.empty()) {
      throw ConfigError("--filters: at least one filter is required");
    }
  }
  if (!o.ranges.empty()) {
    cfg.logs.ranges = o.ranges;
  }
  if (!o.velocities.empty()) {
    cfg.logs.velocities = o.velocities;
  }
  if (!o.truth.empty()) {
    cfg.logs.truth = o.truth;
  }
  validateRunConfig(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Range-only relative pose estimation: GI-LS initialization, GSF, EKF and PF.\n"
               "Worker threads for sim are capped by RELPOSE_MAX_THREADS.\n"
               "Exit codes: 0 ok, 1 other, 2 config error, 3 data error, 4 numerical failure."};
  app.require_subcommand(1);
  Overrides o;

  CLI::App* init = app.add_subcommand("init", "GI-LS mixture from a static range log");
  addCommon(init, o);
  init->add_option("--ranges", o.ranges, "range log (overrides logs.ranges)");

  CLI::App* sim = app.add_subcommand("sim", "Monte-Carlo simulation");
  addCommon(sim, o);
  sim->add_option("--seed", o.seed, "master seed");
  sim->add_option("--trials", o.trials, "number of trials");
  sim->add_option("--filters", o.filters, "comma-separated subset of ekf,gsf,pf");
  sim->add_flag("--export-logs", o.exportLogs, "write range, velocity and truth logs per trial");

  CLI::App* replay = app.add_subcommand("replay", "run filters over recorded logs");
  addCommon(replay, o);
  replay->add_option("--seed", o.seed, "master seed (selects the filter seed)");
  replay->add_option("--trial", o.trial, "trial index whose filter seed is reused");
  replay->add_option("--filters", o.filters, "comma-separated subset of ekf,gsf,pf");
  replay->add_option("--ranges", o.ranges, "range log");
  replay->add_option("--velocities", o.velocities, "velocity log");
  replay->add_option("--truth", o.truth, "optional ground-truth log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (init->parsed()) {
      return cmdInit(load(o, init, RunMode::Init), std::cout);
    }
    if (sim->parsed()) {
      return cmdSim(load(o, sim, RunMode::Sim), SimOptions{o.exportLogs}, std::cout);
    }
    return cmdReplay(load(o, replay, RunMode::Replay), std::cout);
  } catch (...) {
    return reportError(std::cerr);
  }
}
