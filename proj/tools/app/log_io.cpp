#include "log_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <string_view>

#include "config.hpp"

namespace relpose::app {

namespace {

constexpr const char* kRangeHeader = "t,tagA,tagB,range_m";
constexpr const char* kVelocityHeader = "t,robotId,wx,wy,wz,vx,vy,vz";
constexpr const char* kTruthHeader = "t,robotId,x,y,z,r00,r01,r02,r10,r11,r12,r20,r21,r22";

struct Row
{
  int line = 0;
  std::vector<std::string_view> fields;
};

class CsvFile
{
public:
  CsvFile(const std::filesystem::path& path, std::string_view header, std::size_t columns)
      : path_(path), columns_(columns)
  {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw DataError(path.string() + ": cannot open");
    }
    std::string line;
    int number = 0;
    bool sawHeader = false;
    while (std::getline(in, line)) {
      ++number;
      if (!line.empty() && line.back() == '\r') {
        line.pop_back();
      }
      if (line.empty()) {
        continue;
      }
      if (!sawHeader) {
        if (line != header) {
          fail(number, "expected header '" + std::string(header) + "'");
        }
        sawHeader = true;
        continue;
      }
      lines_.emplace_back(number, std::move(line));
    }
    if (!sawHeader) {
      throw DataError(path.string() + ": empty file, expected header '" + std::string(header) + "'");
    }
  }

  template<class Fn>
  void forEach(Fn&& fn) const
  {
    for (const auto& [number, text] : lines_) {
      Row row{number, {}};
      std::string_view rest(text);
      while (true) {
        const std::size_t comma = rest.find(',');
        row.fields.push_back(rest.substr(0, comma));
        if (comma == std::string_view::npos) {
          break;
        }
        rest.remove_prefix(comma + 1);
      }
      if (row.fields.size() != columns_) {
        fail(number, "expected " + std::to_string(columns_) + " fields, found " +
                         std::to_string(row.fields.size()));
      }
      fn(row);
    }
  }

  [[noreturn]] void fail(int line, const std::string& message) const
  {
    throw DataError(path_.string() + ":" + std::to_string(line) + ": " + message);
  }

  double number(const Row& row, std::size_t i) const
  {
    const std::string_view f = row.fields[i];
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
      fail(row.line, "field " + std::to_string(i + 1) + " is not a finite number: '" + std::string(f) + "'");
    }
    return v;
  }

  int integer(const Row& row, std::size_t i) const
  {
    const std::string_view f = row.fields[i];
    int v = 0;
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || ptr != f.data() + f.size()) {
      fail(row.line, "field " + std::to_string(i + 1) + " is not an integer: '" + std::string(f) + "'");
    }
    return v;
  }

private:
  std::filesystem::path path_;
  std::size_t columns_;
  std::vector<std::pair<int, std::string>> lines_;
};

class Writer
{
public:
  Writer(const std::filesystem::path& path, const char* header) : out_(path, std::ios::binary)
  {
    if (!out_) {
      throw DataError(path.string() + ": cannot write");
    }
    out_ << header << '\n';
  }

  Writer& num(double v)
  {
    char buf[32];
    const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
    sep();
    out_.write(buf, n);
    return *this;
  }

  Writer& integer(int v)
  {
    sep();
    out_ << v;
    return *this;
  }

  void end()
  {
    out_ << '\n';
    first_ = true;
  }

private:
  void sep()
  {
    if (!first_) {
      out_ << ',';
    }
    first_ = false;
  }

  std::ofstream out_;
  bool first_ = true;
};

bool sameTime(double a, double b)
{
  return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a));
}

}  // namespace

std::vector<RangeRecord> readRangeLog(const std::filesystem::path& path)
{
  const CsvFile csv(path, kRangeHeader, 4);
  std::vector<RangeRecord> out;
  csv.forEach([&](const Row& row) {
    RangeRecord r{csv.number(row, 0), csv.integer(row, 1), csv.integer(row, 2), csv.number(row, 3), row.line};
    if (!out.empty() && r.t < out.back().t) {
      csv.fail(row.line, "timestamp regression");
    }
    out.push_back(r);
  });
  return out;
}

std::vector<VelocityRecord> readVelocityLog(const std::filesystem::path& path)
{
  const CsvFile csv(path, kVelocityHeader, 8);
  std::vector<VelocityRecord> out;
  std::map<int, double> last;
  csv.forEach([&](const Row& row) {
    VelocityRecord r;
    r.t = csv.number(row, 0);
    r.robotId = csv.integer(row, 1);
    r.line = row.line;
    for (int j = 0; j < 6; ++j) {
      r.u(j) = csv.number(row, static_cast<std::size_t>(2 + j));
    }
    const auto it = last.find(r.robotId);
    if (it != last.end() && r.t < it->second) {
      csv.fail(row.line, "timestamp regression for robot " + std::to_string(r.robotId));
    }
    last[r.robotId] = r.t;
    out.push_back(r);
  });
  return out;
}

std::vector<TruthRecord> readTruthLog(const std::filesystem::path& path)
{
  const CsvFile csv(path, kTruthHeader, 14);
  std::vector<TruthRecord> out;
  csv.forEach([&](const Row& row) {
    TruthRecord r;
    r.t = csv.number(row, 0);
    r.robotId = csv.integer(row, 1);
    r.line = row.line;
    const Eigen::Vector3d pos(csv.number(row, 2), csv.number(row, 3), csv.number(row, 4));
    Eigen::Matrix3d c;
    for (int i = 0; i < 9; ++i) {
      c(i / 3, i % 3) = csv.number(row, static_cast<std::size_t>(5 + i));
    }
    if (!out.empty() && r.t < out.back().t) {
      csv.fail(row.line, "timestamp regression");
    }
    Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
    t.topLeftCorner<3, 3>() = c;
    t.topRightCorner<3, 1>() = pos;
    try {
      r.pose = Pose3::fromMatrix(t);
    } catch (const std::invalid_argument& e) {
      csv.fail(row.line, e.what());
    }
    out.push_back(r);
  });
  return out;
}

void writeRangeLog(const std::filesystem::path& path, const SensorStream& stream,
                   const MeasurementGraph& graph)
{
  Writer w(path, kRangeHeader);
  auto emit = [&](const RangeSnapshot& s) {
    for (std::size_t e = 0; e < graph.size(); ++e) {
      w.num(s.timestamp).integer(graph.edges[e].tagA).integer(graph.edges[e].tagB)
          .num(s.values(static_cast<Eigen::Index>(e)));
      w.end();
    }
  };
  for (const auto& s : stream.warmup) {
    emit(s);
  }
  for (const auto& step : stream.steps) {
    emit(step.ranges);
  }
}

void writeVelocityLog(const std::filesystem::path& path, const SensorStream& stream)
{
  Writer w(path, kVelocityHeader);
  for (const auto& step : stream.steps) {
    for (const auto& in : step.inputs) {
      w.num(in.timestamp).integer(in.robotId);
      for (int j = 0; j < 6; ++j) {
        w.num(in.u(j));
      }
      w.end();
    }
  }
}

void writeTruthLog(const std::filesystem::path& path, const SensorStream& stream,
                   const RobotTeam& team)
{
  Writer w(path, kTruthHeader);
  for (std::size_t k = 0; k < stream.truth.size(); ++k) {
    const double t = k == 0 ? stream.startTime : stream.steps[k - 1].timestamp;
    const State3& x = stream.truth[k];
    for (std::size_t b = 0; b < x.size(); ++b) {
      w.num(t).integer(team.robot(b + 1).robotId);
      const Eigen::Vector3d& r = x.poses[b].translation();
      w.num(r.x()).num(r.y()).num(r.z());
      const Eigen::Matrix3d& c = x.poses[b].rotation();
      for (int i = 0; i < 9; ++i) {
        w.num(c(i / 3, i % 3));
      }
      w.end();
    }
  }
}

std::vector<RangeSnapshot> assembleSnapshots(const std::vector<RangeRecord>& rows,
                                             const MeasurementGraph& graph)
{
  std::map<std::pair<int, int>, std::size_t> index;
  for (std::size_t e = 0; e < graph.size(); ++e) {
    index[{graph.edges[e].tagA, graph.edges[e].tagB}] = e;
    index[{graph.edges[e].tagB, graph.edges[e].tagA}] = e;
  }
  std::vector<RangeSnapshot> out;
  std::vector<bool> filled;
  int groupLine = 0;
  auto close = [&]() {
    if (out.empty()) {
      return;
    }
    for (std::size_t e = 0; e < filled.size(); ++e) {
      if (!filled[e]) {
        throw DataError("range log line " + std::to_string(groupLine) + ": snapshot at t=" +
                        std::to_string(out.back().timestamp) + " lacks edge " +
                        std::to_string(graph.edges[e].tagA) + "-" + std::to_string(graph.edges[e].tagB));
      }
    }
  };
  for (const auto& r : rows) {
    if (out.empty() || r.t != out.back().timestamp) {
      close();
      out.push_back(RangeSnapshot{r.t, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(graph.size()))});
      filled.assign(graph.size(), false);
      groupLine = r.line;
    }
    const auto it = index.find({r.tagA, r.tagB});
    if (it == index.end()) {
      throw DataError("range log line " + std::to_string(r.line) + ": edge " + std::to_string(r.tagA) +
                      "-" + std::to_string(r.tagB) + " is not in the measurement graph");
    }
    if (filled[it->second]) {
      throw DataError("range log line " + std::to_string(r.line) + ": duplicate edge in one snapshot");
    }
    filled[it->second] = true;
    out.back().values(static_cast<Eigen::Index>(it->second)) = r.range;
  }
  close();
  return out;
}

SensorStream assembleStream(const std::vector<RangeRecord>& ranges,
                            const std::vector<VelocityRecord>& velocities,
                            const std::vector<TruthRecord>& truth, const ScenarioConfig& cfg)
{
  const RobotTeam& team = cfg.team;
  const std::vector<RangeSnapshot> snapshots = assembleSnapshots(ranges, cfg.graph);

  SensorStream stream;
  stream.startTime = static_cast<double>(cfg.warmupSnapshots()) / cfg.rateHz;
  std::size_t first = 0;
  while (first < snapshots.size() &&
         (snapshots[first].timestamp <= stream.startTime || sameTime(snapshots[first].timestamp, stream.startTime))) {
    ++first;
  }
  stream.warmup.assign(snapshots.begin(), snapshots.begin() + static_cast<std::ptrdiff_t>(first));
  if (stream.warmup.size() < static_cast<std::size_t>(cfg.gamma)) {
    throw DataError("range log: " + std::to_string(stream.warmup.size()) +
                    " snapshots before t=" + std::to_string(stream.startTime) + ", gamma=" +
                    std::to_string(cfg.gamma) + " required");
  }
  if (first == snapshots.size()) {
    throw DataError("range log: no snapshots after the warmup");
  }

  std::vector<std::vector<const VelocityRecord*>> perRobot(team.size());
  for (const auto& v : velocities) {
    std::size_t idx = 0;
    try {
      idx = team.indexOfRobot(v.robotId);
    } catch (const std::exception&) {
      throw DataError("velocity log line " + std::to_string(v.line) + ": unknown robot " +
                      std::to_string(v.robotId));
    }
    perRobot[idx].push_back(&v);
  }
  std::vector<std::size_t> cursor(team.size(), 0);
  double prev = stream.startTime;
  for (std::size_t s = first; s < snapshots.size(); ++s) {
    SensorStep step;
    step.timestamp = snapshots[s].timestamp;
    step.ranges = snapshots[s];
    for (std::size_t r = 0; r < team.size(); ++r) {
      const auto& recs = perRobot[r];
      std::size_t& c = cursor[r];
      while (c < recs.size() && recs[c]->t <= prev) {
        ++c;
      }
      if (c == 0) {
        throw DataError("velocity log: no record for robot " + std::to_string(team.robot(r).robotId) +
                        " at or before t=" + std::to_string(prev));
      }
      const VelocityRecord& v = *recs[c - 1];
      Input3 in;
      in.robotId = v.robotId;
      in.timestamp = v.t;
      in.u = v.u;
      in.q = cfg.inputNoise[r];
      step.inputs.push_back(in);
    }
    prev = step.timestamp;
    stream.steps.push_back(std::move(step));
  }

  if (!truth.empty()) {
    std::map<double, State3> byTime;
    for (const auto& row : truth) {
      std::size_t idx = 0;
      try {
        idx = team.indexOfRobot(row.robotId);
      } catch (const std::exception&) {
        idx = 0;
      }
      if (idx == 0) {
        throw DataError("truth log line " + std::to_string(row.line) + ": robot " +
                        std::to_string(row.robotId) + " is not a non-reference robot");
      }
      State3& x = byTime[row.t];
      if (x.poses.empty()) {
        x.poses.assign(team.size() - 1, Pose3::Identity());
      }
      x.poses[idx - 1] = row.pose;
    }
    auto lookup = [&](double t) -> const State3& {
      auto it = byTime.lower_bound(t - 1e-9 * std::max(1.0, std::abs(t)));
      if (it == byTime.end() || !sameTime(it->first, t)) {
        throw DataError("truth log: no ground truth at t=" + std::to_string(t));
      }
      return it->second;
    };
    stream.truth.push_back(lookup(stream.startTime));
    for (const auto& step : stream.steps) {
      stream.truth.push_back(lookup(step.timestamp));
    }
  }
  return stream;
}

}  // namespace relpose::app
