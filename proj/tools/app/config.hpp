#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "relpose/sim.hpp"

namespace relpose::app {

/// Bad or inconsistent configuration. Maps to exit code 2.
class ConfigError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (logs). Maps to exit code 3.
class DataError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

enum class RunMode
{
  Sim,
  Replay,
  Init,
};

const char* modeName(RunMode mode);

struct LogPaths
{
  std::filesystem::path ranges;
  std::filesystem::path velocities;
  std::filesystem::path truth;  ///< optional
};

struct RunConfig
{
  RunMode mode = RunMode::Sim;
  ScenarioConfig scenario;
  double gyroStd = 0.01;      ///< rad/s, same for every robot
  double velocityStd = 0.05;  ///< m/s
  FilterSettings filters;
  std::size_t trials = 1;
  std::optional<std::uint64_t> seed;
  std::size_t trial = 0;  ///< replay: which sim trial's filter seed to reuse
  LogPaths logs;
  std::filesystem::path output = "out";
};

/// Parses JSON text. Unknown keys, missing required fields and malformed values throw
/// ConfigError with the offending key path and, when locatable, the line.
RunConfig parseConfigText(const std::string& text, const std::filesystem::path& baseDir = {});
RunConfig parseConfig(const std::filesystem::path& path);

/// Emits a config that parseConfigText reads back to an equal RunConfig.
std::string emitConfig(const RunConfig& cfg);

/// Cross-field checks that depend on the mode (seed present for sim, log paths for
/// replay/init, scenario invariants). Throws ConfigError.
void validateRunConfig(const RunConfig& cfg);

}  // namespace relpose::app
