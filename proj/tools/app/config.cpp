#include "config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include <nlohmann/json.hpp>

namespace relpose::app {

using nlohmann::json;

const char* modeName(RunMode mode)
{
  switch (mode) {
    case RunMode::Sim: return "sim";
    case RunMode::Replay: return "replay";
    case RunMode::Init: return "init";
  }
  return "unknown";
}

namespace {

int lineAt(const std::string& text, std::size_t offset)
{
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

/// Best-effort source line of a key path: each component is searched after the previous one.
std::optional<int> locate(const std::string& text, const std::vector<std::string>& path)
{
  std::size_t pos = 0;
  bool found = false;
  for (const auto& part : path) {
    if (part.empty() || part.front() == '[') {
      continue;
    }
    const std::size_t at = text.find('"' + part + '"', pos);
    if (at == std::string::npos) {
      break;
    }
    pos = at + 1;
    found = true;
  }
  if (!found) {
    return std::nullopt;
  }
  return lineAt(text, pos);
}

class Node
{
public:
  Node(const json& value, std::vector<std::string> path, const std::string& text)
      : value_(value), path_(std::move(path)), text_(text)
  {
  }

  [[noreturn]] void fail(const std::string& message, const std::string& key = {}) const
  {
    std::vector<std::string> p = path_;
    if (!key.empty()) {
      p.push_back(key);
    }
    std::string name;
    for (const auto& part : p) {
      if (!name.empty() && part.front() != '[') {
        name += '.';
      }
      name += part;
    }
    std::string msg = "config: " + (name.empty() ? std::string("<root>") : name) + ": " + message;
    if (const auto line = locate(text_, p)) {
      msg += " (line " + std::to_string(*line) + ")";
    }
    throw ConfigError(msg);
  }

  const json& value() const { return value_; }

  Node child(const std::string& key) const
  {
    std::vector<std::string> p = path_;
    p.push_back(key);
    return Node(value_.at(key), std::move(p), text_);
  }

  Node element(std::size_t i) const
  {
    std::vector<std::string> p = path_;
    p.push_back("[" + std::to_string(i) + "]");
    return Node(value_.at(i), std::move(p), text_);
  }

  void expectObject() const
  {
    if (!value_.is_object()) {
      fail("expected an object");
    }
  }

  void expectArray() const
  {
    if (!value_.is_array()) {
      fail("expected an array");
    }
  }

  bool has(const std::string& key) const
  {
    seen_.insert(key);
    return value_.contains(key);
  }

  template<class T>
  T as() const
  {
    try {
      if constexpr (std::is_floating_point_v<T>) {
        if (!value_.is_number()) {
          fail("expected a number");
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!value_.is_boolean()) {
          fail("expected true or false");
        }
      } else if constexpr (std::is_integral_v<T>) {
        if (!value_.is_number_integer()) {
          fail("expected an integer");
        }
        if constexpr (std::is_unsigned_v<T>) {
          if (value_.is_number_integer() && !value_.is_number_unsigned() && value_.get<long long>() < 0) {
            fail("expected a non-negative integer");
          }
        }
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!value_.is_string()) {
          fail("expected a string");
        }
      }
      return value_.get<T>();
    } catch (const json::exception& e) {
      fail(e.what());
    }
  }

  template<class T>
  T get(const std::string& key, const T& fallback) const
  {
    return has(key) ? child(key).as<T>() : fallback;
  }

  template<class T>
  T require(const std::string& key) const
  {
    if (!has(key)) {
      fail("missing required field", key);
    }
    return child(key).as<T>();
  }

  Eigen::Vector3d vec3(const std::string& key, const Eigen::Vector3d& fallback) const
  {
    if (!has(key)) {
      return fallback;
    }
    const Node n = child(key);
    if (!n.value().is_array() || n.value().size() != 3) {
      n.fail("expected an array of 3 numbers");
    }
    return Eigen::Vector3d(n.element(0).as<double>(), n.element(1).as<double>(), n.element(2).as<double>());
  }

  /// Rejects keys that were never queried.
  void finish() const
  {
    for (const auto& item : value_.items()) {
      if (!seen_.count(item.key())) {
        fail("unknown key", item.key());
      }
    }
  }

private:
  const json& value_;
  std::vector<std::string> path_;
  const std::string& text_;
  mutable std::set<std::string> seen_;
};

std::vector<RobotGeometry> parseRobots(const Node& scenario)
{
  if (!scenario.has("robots")) {
    scenario.fail("missing required field", "robots");
  }
  const Node robots = scenario.child("robots");
  if (robots.value().is_number_integer()) {
    const int n = robots.as<int>();
    if (n < 2) {
      robots.fail("at least two robots are required");
    }
    return standardTagLayout(n);
  }
  robots.expectArray();
  std::vector<RobotGeometry> out;
  for (std::size_t i = 0; i < robots.value().size(); ++i) {
    const Node r = robots.element(i);
    r.expectObject();
    RobotGeometry g;
    g.robotId = r.require<int>("id");
    if (!r.has("tags")) {
      r.fail("missing required field", "tags");
    }
    const Node tags = r.child("tags");
    tags.expectArray();
    for (std::size_t t = 0; t < tags.value().size(); ++t) {
      const Node tag = tags.element(t);
      tag.expectObject();
      TagMount m;
      m.tagId = tag.require<int>("id");
      if (!tag.has("offset")) {
        tag.fail("missing required field", "offset");
      }
      m.offset = tag.vec3("offset", Eigen::Vector3d::Zero());
      tag.finish();
      g.tags.push_back(m);
    }
    r.finish();
    out.push_back(std::move(g));
  }
  return out;
}

MotionProfile parseMotion(const Node& n)
{
  n.expectObject();
  MotionProfile m;
  m.yawRateStd = n.get("yaw_rate_std", m.yawRateStd);
  m.tiltRateStd = n.get("tilt_rate_std", m.tiltRateStd);
  m.tiltStiffness = n.get("tilt_stiffness", m.tiltStiffness);
  m.speedStd = n.get("speed_std", m.speedStd);
  m.climbStd = n.get("climb_std", m.climbStd);
  m.cutoffHz = n.get("cutoff_hz", m.cutoffHz);
  m.workspaceMin = n.vec3("workspace_min", m.workspaceMin);
  m.workspaceMax = n.vec3("workspace_max", m.workspaceMax);
  n.finish();
  return m;
}

void parseScenario(const Node& n, RunConfig& cfg)
{
  n.expectObject();
  ScenarioConfig& s = cfg.scenario;
  std::vector<RobotGeometry> robots = parseRobots(n);
  try {
    s.team = RobotTeam(std::move(robots));
  } catch (const std::invalid_argument& e) {
    n.fail(e.what(), "robots");
  }
  s.rateHz = n.get("rate_hz", s.rateHz);
  s.rangeSigma = n.get("range_sigma", s.rangeSigma);
  s.duration = n.get("duration", s.duration);
  s.warmup = n.get("warmup", s.warmup);
  s.gamma = n.get("gamma", s.gamma);
  s.minSeparation = n.get("min_separation", s.minSeparation);
  s.maxSeparation = n.get("max_separation", s.maxSeparation);
  cfg.gyroStd = n.get("gyro_std", cfg.gyroStd);
  cfg.velocityStd = n.get("velocity_std", cfg.velocityStd);
  if (n.has("motion")) {
    s.motion = parseMotion(n.child("motion"));
  }
  if (!(s.rangeSigma > 0.0)) {
    n.fail("must be positive", "range_sigma");
  }
  if (n.has("edges")) {
    const Node edges = n.child("edges");
    edges.expectArray();
    s.graph.edges.clear();
    for (std::size_t i = 0; i < edges.value().size(); ++i) {
      const Node e = edges.element(i);
      e.expectObject();
      RangeEdge edge;
      edge.tagA = e.require<int>("a");
      edge.tagB = e.require<int>("b");
      edge.sigma = e.get("sigma", s.rangeSigma);
      e.finish();
      s.graph.edges.push_back(edge);
    }
  } else {
    s.graph = interRobotGraph(s.team, s.rangeSigma);
  }
  if (!(cfg.gyroStd >= 0.0) || !(cfg.velocityStd >= 0.0)) {
    n.fail("input noise standard deviations must be non-negative");
  }
  s.inputNoise.assign(s.team.size(), inputNoiseCovariance(cfg.gyroStd, cfg.velocityStd));
  n.finish();
}

void parseFilters(const Node& n, FilterSettings& f)
{
  n.expectObject();
  if (n.has("selected")) {
    const Node sel = n.child("selected");
    sel.expectArray();
    f.selected.clear();
    for (std::size_t i = 0; i < sel.value().size(); ++i) {
      const Node item = sel.element(i);
      try {
        f.selected.push_back(parseFilterKind(item.as<std::string>()));
      } catch (const std::invalid_argument& e) {
        item.fail(e.what());
      }
    }
    if (f.selected.empty()) {
      sel.fail("at least one filter must be selected");
    }
  }
  f.particles = n.get("particles", f.particles);
  if (n.has("gsf")) {
    const Node g = n.child("gsf");
    g.expectObject();
    f.gsf.weightFloor = g.get("weight_floor", f.gsf.weightFloor);
    f.gsf.prune = g.get("prune", f.gsf.prune);
    f.gsf.pruneBelow = g.get("prune_below", f.gsf.pruneBelow);
    g.finish();
  }
  if (n.has("pf")) {
    const Node p = n.child("pf");
    p.expectObject();
    f.pf.resampleThreshold = p.get("resample_threshold", f.pf.resampleThreshold);
    p.finish();
  }
  if (n.has("gils")) {
    const Node g = n.child("gils");
    g.expectObject();
    auto& o = f.gils;
    o.mergeTolerance = g.get("merge_tolerance", o.mergeTolerance);
    o.slackSigmas = g.get("slack_sigmas", o.slackSigmas);
    o.refine.stepSize = g.get("step_size", o.refine.stepSize);
    o.refine.maxHalvings = g.get("max_halvings", o.refine.maxHalvings);
    o.refine.maxIterations = g.get("max_iterations", o.refine.maxIterations);
    o.refine.stepTolerance = g.get("step_tolerance", o.refine.stepTolerance);
    o.refine.divergenceLimit = g.get("divergence_limit", o.refine.divergenceLimit);
    o.lift.tiltVariance = g.get("tilt_variance", o.lift.tiltVariance);
    o.lift.heightVariance = g.get("height_variance", o.lift.heightVariance);
    g.finish();
  }
  if (f.particles < 1) {
    n.fail("must be at least 1", "particles");
  }
  n.finish();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

json vec3Json(const Eigen::Vector3d& v)
{
  return json::array({v.x(), v.y(), v.z()});
}

}  // namespace

RunConfig parseConfigText(const std::string& text, const std::filesystem::path& baseDir)
{
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const int line = lineAt(text, e.byte > 0 ? e.byte - 1 : 0);
    std::istringstream in(text);
    std::string src;
    for (int i = 0; i < line && std::getline(in, src); ++i) {
    }
    throw ConfigError("config: parse error at line " + std::to_string(line) + ": " + src);
  }
  const Node n(root, {}, text);
  n.expectObject();

  RunConfig cfg;
  const std::string mode = n.require<std::string>("mode");
  if (mode == "sim") {
    cfg.mode = RunMode::Sim;
  } else if (mode == "replay") {
    cfg.mode = RunMode::Replay;
  } else if (mode == "init") {
    cfg.mode = RunMode::Init;
  } else {
    n.child("mode").fail("expected sim, replay or init");
  }
  if (n.has("seed")) {
    cfg.seed = n.child("seed").as<std::uint64_t>();
  }
  cfg.trials = n.get("trials", cfg.trials);
  cfg.trial = n.get("trial", cfg.trial);
  if (n.has("output")) {
    cfg.output = resolve(baseDir, n.child("output").as<std::string>());
  }
  if (!n.has("scenario")) {
    n.fail("missing required field", "scenario");
  }
  parseScenario(n.child("scenario"), cfg);
  if (n.has("filters")) {
    parseFilters(n.child("filters"), cfg.filters);
  }
  if (n.has("logs")) {
    const Node l = n.child("logs");
    l.expectObject();
    if (l.has("ranges")) {
      cfg.logs.ranges = resolve(baseDir, l.child("ranges").as<std::string>());
    }
    if (l.has("velocities")) {
      cfg.logs.velocities = resolve(baseDir, l.child("velocities").as<std::string>());
    }
    if (l.has("truth")) {
      cfg.logs.truth = resolve(baseDir, l.child("truth").as<std::string>());
    }
    l.finish();
  }
  if (cfg.trials < 1) {
    n.fail("must be at least 1", "trials");
  }
  n.finish();
  return cfg;
}

RunConfig parseConfig(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config: cannot open " + path.string());
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parseConfigText(buf.str(), path.parent_path());
}

std::string emitConfig(const RunConfig& cfg)
{
  const ScenarioConfig& s = cfg.scenario;
  json robots = json::array();
  for (const auto& r : s.team.robots()) {
    json tags = json::array();
    for (const auto& t : r.tags) {
      tags.push_back({{"id", t.tagId}, {"offset", vec3Json(t.offset)}});
    }
    robots.push_back({{"id", r.robotId}, {"tags", tags}});
  }
  json edges = json::array();
  for (const auto& e : s.graph.edges) {
    edges.push_back({{"a", e.tagA}, {"b", e.tagB}, {"sigma", e.sigma}});
  }
  const MotionProfile& m = s.motion;
  json scenario = {
      {"robots", robots},
      {"edges", edges},
      {"rate_hz", s.rateHz},
      {"range_sigma", s.rangeSigma},
      {"duration", s.duration},
      {"warmup", s.warmup},
      {"gamma", s.gamma},
      {"gyro_std", cfg.gyroStd},
      {"velocity_std", cfg.velocityStd},
      {"min_separation", s.minSeparation},
      {"max_separation", s.maxSeparation},
      {"motion",
       {{"yaw_rate_std", m.yawRateStd},
        {"tilt_rate_std", m.tiltRateStd},
        {"tilt_stiffness", m.tiltStiffness},
        {"speed_std", m.speedStd},
        {"climb_std", m.climbStd},
        {"cutoff_hz", m.cutoffHz},
        {"workspace_min", vec3Json(m.workspaceMin)},
        {"workspace_max", vec3Json(m.workspaceMax)}}},
  };
  json selected = json::array();
  for (const auto k : cfg.filters.selected) {
    selected.push_back(filterName(k));
  }
  const auto& f = cfg.filters;
  json filters = {
      {"selected", selected},
      {"particles", f.particles},
      {"gsf", {{"weight_floor", f.gsf.weightFloor}, {"prune", f.gsf.prune}, {"prune_below", f.gsf.pruneBelow}}},
      {"pf", {{"resample_threshold", f.pf.resampleThreshold}}},
      {"gils",
       {{"merge_tolerance", f.gils.mergeTolerance},
        {"slack_sigmas", f.gils.slackSigmas},
        {"step_size", f.gils.refine.stepSize},
        {"max_halvings", f.gils.refine.maxHalvings},
        {"max_iterations", f.gils.refine.maxIterations},
        {"step_tolerance", f.gils.refine.stepTolerance},
        {"divergence_limit", f.gils.refine.divergenceLimit},
        {"tilt_variance", f.gils.lift.tiltVariance},
        {"height_variance", f.gils.lift.heightVariance}}},
  };
  json root = {
      {"mode", modeName(cfg.mode)},
      {"trials", cfg.trials},
      {"trial", cfg.trial},
      {"output", cfg.output.string()},
      {"scenario", scenario},
      {"filters", filters},
  };
  if (cfg.seed) {
    root["seed"] = *cfg.seed;
  }
  json logs = json::object();
  if (!cfg.logs.ranges.empty()) {
    logs["ranges"] = cfg.logs.ranges.string();
  }
  if (!cfg.logs.velocities.empty()) {
    logs["velocities"] = cfg.logs.velocities.string();
  }
  if (!cfg.logs.truth.empty()) {
    logs["truth"] = cfg.logs.truth.string();
  }
  if (!logs.empty()) {
    root["logs"] = logs;
  }
  return root.dump(2) + "\n";
}

void validateRunConfig(const RunConfig& cfg)
{
  try {
    cfg.scenario.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  switch (cfg.mode) {
    case RunMode::Sim:
      if (!cfg.seed) {
        throw ConfigError("config: seed: required in sim mode (set it or pass --seed)");
      }
      break;
    case RunMode::Replay:
      if (cfg.logs.velocities.empty()) {
        throw ConfigError("config: logs.velocities: required in replay mode");
      }
      [[fallthrough]];
    case RunMode::Init:
      if (cfg.logs.ranges.empty()) {
        throw ConfigError("config: logs.ranges: required in " + std::string(modeName(cfg.mode)) + " mode");
      }
      for (const auto* p : {&cfg.logs.ranges, &cfg.logs.velocities, &cfg.logs.truth}) {
        if (!p->empty() && !std::filesystem::exists(*p)) {
          throw ConfigError("config: log file does not exist: " + p->string());
        }
      }
      break;
  }
}

}  // namespace relpose::app
