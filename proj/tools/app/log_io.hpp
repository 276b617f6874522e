#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "relpose/sim.hpp"

namespace relpose::app {

struct RangeRecord
{
  double t = 0.0;
  int tagA = 0;
  int tagB = 0;
  double range = 0.0;
  int line = 0;
};

struct VelocityRecord
{
  double t = 0.0;
  int robotId = 0;
  Tangent<3> u = Tangent<3>::Zero();  ///< [wx wy wz vx vy vz]
  int line = 0;
};

struct TruthRecord
{
  double t = 0.0;
  int robotId = 0;  ///< non-reference robot; pose relative to the reference robot
  Pose3 pose;
  int line = 0;
};

// Readers throw DataError naming the file and line on malformed rows or timestamp regression.
std::vector<RangeRecord> readRangeLog(const std::filesystem::path& path);
std::vector<VelocityRecord> readVelocityLog(const std::filesystem::path& path);
std::vector<TruthRecord> readTruthLog(const std::filesystem::path& path);

void writeRangeLog(const std::filesystem::path& path, const SensorStream& stream,
                   const MeasurementGraph& graph);
void writeVelocityLog(const std::filesystem::path& path, const SensorStream& stream);
void writeTruthLog(const std::filesystem::path& path, const SensorStream& stream,
                   const RobotTeam& team);

/// Groups range rows into snapshots in graph order. Every snapshot must hold each edge once.
std::vector<RangeSnapshot> assembleSnapshots(const std::vector<RangeRecord>& rows,
                                             const MeasurementGraph& graph);

/// Snapshots up to the end of the warmup feed GI-LS; every later snapshot is a filter step
/// whose inputs are the latest velocity records at or before the previous step
/// (zero-order hold). Truth, when given, must cover the start and every step.
SensorStream assembleStream(const std::vector<RangeRecord>& ranges,
                            const std::vector<VelocityRecord>& velocities,
                            const std::vector<TruthRecord>& truth, const ScenarioConfig& cfg);

}  // namespace relpose::app
