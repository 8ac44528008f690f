#include "rcp/scenario.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace rcp {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ScenarioError("scenario field '" + path + "': " + msg);
}

const json& require(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) {
    fail(path + "." + key, "missing required field");
  }
  return *it;
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) {
    fail(path, "expected a number");
  }
  return j.get<double>();
}

double opt_number(const json& j, const std::string& key, double fallback,
                  const std::string& path) {
  auto it = j.find(key);
  return it == j.end() ? fallback : as_number(*it, path + "." + key);
}

int opt_int(const json& j, const std::string& key, int fallback, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  if (!it->is_number_integer()) {
    fail(path + "." + key, "expected an integer");
  }
  return it->get<int>();
}

bool opt_bool(const json& j, const std::string& key, bool fallback, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) {
    return fallback;
  }
  if (!it->is_boolean()) {
    fail(path + "." + key, "expected a boolean");
  }
  return it->get<bool>();
}

Eigen::Vector3d as_vector(const json& j, SpaceType space, const std::string& path) {
  const std::size_t want = static_cast<std::size_t>(linear_dims(space));
  if (!j.is_array() || j.size() != want) {
    fail(path, "expected an array of " + std::to_string(want) + " numbers");
  }
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  for (std::size_t i = 0; i < want; ++i) {
    v[static_cast<int>(i)] = as_number(j[i], path + "[" + std::to_string(i) + "]");
  }
  return v;
}

Box as_box(const json& j, SpaceType space, const std::string& path) {
  if (!j.is_object()) {
    fail(path, "expected an object with min/max");
  }
  Box b;
  b.min = as_vector(require(j, "min", path), space, path + ".min");
  b.max = as_vector(require(j, "max", path), space, path + ".max");
  if (!b.valid()) {
    fail(path, "box min exceeds max");
  }
  return b;
}

Configuration as_configuration(const json& j, SpaceType space, const std::string& path) {
  if (!j.is_object()) {
    fail(path, "expected an object");
  }
  const Eigen::Vector3d t = as_vector(require(j, "t", path), space, path + ".t");
  if (space == SpaceType::SE2) {
    return Configuration::se2(t.x(), t.y(), opt_number(j, "yaw", 0.0, path));
  }
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  if (j.contains("q")) {
    const json& jq = j["q"];
    if (!jq.is_array() || jq.size() != 4) {
      fail(path + ".q", "expected [w, x, y, z]");
    }
    q = Eigen::Quaterniond(as_number(jq[0], path + ".q[0]"), as_number(jq[1], path + ".q[1]"),
                           as_number(jq[2], path + ".q[2]"), as_number(jq[3], path + ".q[3]"));
    if (q.norm() < 1e-9) {
      fail(path + ".q", "zero quaternion");
    }
  }
  return Configuration::se3(t, q);
}

/// Grid points over a box at most `spacing` apart, inclusive of both faces.
void fill_box_points(const Box& box, SpaceType space, double spacing, bool surface_only,
                     std::vector<Eigen::Vector3d>& out) {
  const int dims = linear_dims(space);
  int counts[3] = {1, 1, 1};
  for (int d = 0; d < dims; ++d) {
    const double extent = box.max[d] - box.min[d];
    counts[d] = extent > 1e-12 ? std::max(2, static_cast<int>(std::ceil(extent / spacing)) + 1)
                               : 1;
  }
  for (int i = 0; i < counts[0]; ++i) {
    for (int jj = 0; jj < counts[1]; ++jj) {
      for (int k = 0; k < counts[2]; ++k) {
        const int idx[3] = {i, jj, k};
        bool boundary = false;
        Eigen::Vector3d p = Eigen::Vector3d::Zero();
        for (int d = 0; d < dims; ++d) {
          if (counts[d] == 1) {
            p[d] = box.min[d];
            continue;
          }
          p[d] = box.min[d] +
                 (box.max[d] - box.min[d]) * (static_cast<double>(idx[d]) / (counts[d] - 1));
          boundary |= idx[d] == 0 || idx[d] == counts[d] - 1;
        }
        if (!surface_only || boundary) {
          out.push_back(p);
        }
      }
    }
  }
}

RobotModel parse_robot(const json& j, SpaceType space, const std::string& path) {
  if (!j.is_object()) {
    fail(path, "expected an object");
  }
  std::vector<Eigen::Vector3d> points;
  const double spacing = opt_number(j, "point_spacing", 0.0125, path);
  if (spacing <= 0.0) {
    fail(path + ".point_spacing", "must be positive");
  }
  if (j.contains("boxes")) {
    const json& boxes = j["boxes"];
    if (!boxes.is_array()) {
      fail(path + ".boxes", "expected an array");
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      const std::string bpath = path + ".boxes[" + std::to_string(i) + "]";
      const Box box = as_box(boxes[i], space, bpath);
      std::string fill = space == SpaceType::SE2 ? "volume" : "surface";
      if (boxes[i].contains("fill")) {
        fill = boxes[i]["fill"].get<std::string>();
        if (fill != "volume" && fill != "surface") {
          fail(bpath + ".fill", "expected 'volume' or 'surface'");
        }
      }
      fill_box_points(box, space, spacing, fill == "surface", points);
    }
  }
  if (j.contains("points")) {
    const json& jp = j["points"];
    if (!jp.is_array()) {
      fail(path + ".points", "expected an array");
    }
    for (std::size_t i = 0; i < jp.size(); ++i) {
      points.push_back(as_vector(jp[i], space, path + ".points[" + std::to_string(i) + "]"));
    }
  }
  if (points.empty()) {
    fail(path, "robot needs 'boxes' and/or 'points'");
  }
  // Deduplicate grid points shared between boxes.
  std::map<std::array<long long, 3>, bool> seen;
  std::vector<Eigen::Vector3d> unique_points;
  for (const Eigen::Vector3d& p : points) {
    const std::array<long long, 3> key = {static_cast<long long>(std::llround(p.x() * 1e8)),
                                          static_cast<long long>(std::llround(p.y() * 1e8)),
                                          static_cast<long long>(std::llround(p.z() * 1e8))};
    if (!seen.emplace(key, true).second) {
      continue;
    }
    unique_points.push_back(p);
  }

  std::vector<Eigen::Vector3d> centers;
  if (j.contains("actuation_centers")) {
    const json& jc = j["actuation_centers"];
    if (!jc.is_array()) {
      fail(path + ".actuation_centers", "expected an array");
    }
    for (std::size_t i = 0; i < jc.size(); ++i) {
      centers.push_back(
          as_vector(jc[i], space, path + ".actuation_centers[" + std::to_string(i) + "]"));
    }
  } else {
    centers.push_back(Eigen::Vector3d::Zero());  // body origin
  }
  return RobotModel::from_points(std::move(unique_points), std::move(centers));
}

}  // namespace

VoxelEnvironment Scenario::planning_environment() const {
  return build_environment(space, bounds, resolution, obstacles, regions, true);
}

VoxelEnvironment Scenario::execution_environment(
    const std::set<std::uint32_t>& blocked_regions) const {
  std::vector<Box> all = obstacles;
  all.insert(all.end(), extra_obstacles.begin(), extra_obstacles.end());
  for (const Blocker& b : blockers) {
    if (blocked_regions.count(b.region)) {
      all.push_back(b.box);
    }
  }
  return build_environment(space, bounds, resolution, all, regions, false);
}

Scenario parse_scenario(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) {
    throw ScenarioError("scenario root: expected an object");
  }

  Scenario s;
  s.name = j.contains("name") ? j["name"].get<std::string>() : "unnamed";
  const std::string space_str =
      require(j, "space", "").is_string() ? j["space"].get<std::string>() : "";
  if (space_str == "SE2") {
    s.space = SpaceType::SE2;
  } else if (space_str == "SE3") {
    s.space = SpaceType::SE3;
  } else {
    fail("space", "expected \"SE2\" or \"SE3\"");
  }

  const json& jw = require(j, "workspace", "");
  s.bounds = as_box(require(jw, "bounds", "workspace"), s.space, "workspace.bounds");
  s.resolution = opt_number(jw, "resolution", 0.02, "workspace");
  if (s.resolution <= 0.0) {
    fail("workspace.resolution", "must be positive");
  }

  if (j.contains("obstacles")) {
    const json& jo = j["obstacles"];
    if (!jo.is_array()) {
      fail("obstacles", "expected an array");
    }
    for (std::size_t i = 0; i < jo.size(); ++i) {
      s.obstacles.push_back(as_box(jo[i], s.space, "obstacles[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("regions")) {
    const json& jr = j["regions"];
    if (!jr.is_array()) {
      fail("regions", "expected an array");
    }
    for (std::size_t i = 0; i < jr.size(); ++i) {
      const std::string rpath = "regions[" + std::to_string(i) + "]";
      RegionBox r;
      r.id = static_cast<std::uint32_t>(opt_int(jr[i], "id", static_cast<int>(i), rpath));
      if (r.id >= 32) {
        fail(rpath + ".id", "region ids must be < 32");
      }
      r.box = as_box(jr[i], s.space, rpath);
      s.regions.push_back(r);
      s.region_names.push_back(jr[i].contains("name") ? jr[i]["name"].get<std::string>()
                                                      : "region_" + std::to_string(r.id));
    }
  }
  if (j.contains("extra_obstacles")) {
    const json& je = j["extra_obstacles"];
    if (!je.is_array()) {
      fail("extra_obstacles", "expected an array");
    }
    for (std::size_t i = 0; i < je.size(); ++i) {
      s.extra_obstacles.push_back(
          as_box(je[i], s.space, "extra_obstacles[" + std::to_string(i) + "]"));
    }
  }
  if (j.contains("blockers")) {
    const json& jb = j["blockers"];
    if (!jb.is_array()) {
      fail("blockers", "expected an array");
    }
    for (std::size_t i = 0; i < jb.size(); ++i) {
      const std::string bpath = "blockers[" + std::to_string(i) + "]";
      Scenario::Blocker blk;
      const int region = opt_int(jb[i], "region", -1, bpath);
      if (region < 0 || region >= 32) {
        fail(bpath + ".region", "expected a region id < 32");
      }
      blk.region = static_cast<std::uint32_t>(region);
      blk.box = as_box(jb[i], s.space, bpath);
      s.blockers.push_back(blk);
    }
  }
  if (j.contains("passage_regions")) {
    const json& jp = j["passage_regions"];
    if (!jp.is_array()) {
      fail("passage_regions", "expected an array of region ids");
    }
    for (const auto& v : jp) {
      s.passage_regions.push_back(v.get<std::uint32_t>());
    }
  }

  s.robot = parse_robot(require(j, "robot", ""), s.space, "robot");
  s.start = as_configuration(require(j, "start", ""), s.space, "start");
  s.goal = as_configuration(require(j, "goal", ""), s.space, "goal");

  s.eps_goal = opt_number(j, "eps_goal", 0.1, "");
  if (s.eps_goal <= 0.0) {
    fail("eps_goal", "must be positive");
  }
  s.metric.rotation_weight = opt_number(j, "rotation_weight", 1.0, "");
  if (s.metric.rotation_weight <= 0.0) {
    fail("rotation_weight", "must be positive");
  }

  if (j.contains("noise")) {
    const json& jn = j["noise"];
    const double gamma = opt_number(jn, "gamma", 0.0, "noise");
    if (gamma < 0.0) {
      fail("noise.gamma", "must be non-negative");
    }
    s.noise = NoiseModel::from_gamma(gamma);
    if (jn.contains("linear_bound")) {
      s.noise.linear_bound = as_number(jn["linear_bound"], "noise.linear_bound");
    }
    if (jn.contains("angular_bound")) {
      s.noise.angular_bound = as_number(jn["angular_bound"], "noise.angular_bound");
    }
  }

  if (j.contains("gains")) {
    const json& jg = j["gains"];
    s.gains.kp = opt_number(jg, "kp", s.gains.kp, "gains");
    s.gains.kd = opt_number(jg, "kd", s.gains.kd, "gains");
    s.gains.timestep = opt_number(jg, "timestep", s.gains.timestep, "gains");
    s.gains.t_simulate = opt_number(jg, "t_simulate", s.gains.t_simulate, "gains");
    s.gains.t_exec = opt_number(jg, "t_exec", s.gains.t_exec, "gains");
    if (s.gains.timestep <= 0.0) {
      fail("gains.timestep", "must be positive");
    }
  }
  if (j.contains("stuck")) {
    const json& js = j["stuck"];
    s.detector.window = opt_int(js, "window", s.detector.window, "stuck");
    s.detector.eps_stuck = opt_number(js, "eps_stuck", s.detector.eps_stuck, "stuck");
    s.detector.eps_adjust = opt_number(js, "eps_adjust", s.detector.eps_adjust, "stuck");
    if (s.detector.window < 2) {
      fail("stuck.window", "must be >= 2");
    }
    if (s.detector.eps_adjust <= 0.0 || s.detector.eps_adjust > 1.0) {
      fail("stuck.eps_adjust", "must be in (0, 1]");
    }
  }

  if (j.contains("planner")) {
    const json& jp = j["planner"];
    s.planner.n_particles = opt_int(jp, "n_particles", s.planner.n_particles, "planner");
    s.planner.alpha_p = opt_number(jp, "alpha_p", s.planner.alpha_p, "planner");
    s.planner.alpha_v = opt_number(jp, "alpha_v", s.planner.alpha_v, "planner");
    s.planner.p_goal = opt_number(jp, "p_goal", s.planner.p_goal, "planner");
    s.planner.n_attempt = opt_int(jp, "n_attempt", s.planner.n_attempt, "planner");
    s.planner.goal_bias = opt_number(jp, "goal_bias", s.planner.goal_bias, "planner");
    s.planner.t_planning = opt_number(jp, "t_planning", s.planner.t_planning, "planner");
    s.planner.max_iterations = opt_int(jp, "max_iterations", s.planner.max_iterations, "planner");
    s.planner.connect_cap = opt_int(jp, "connect_cap", s.planner.connect_cap, "planner");
    if (s.planner.n_particles < 1) {
      fail("planner.n_particles", "must be >= 1");
    }
    if (s.planner.alpha_p < 0.0 || s.planner.alpha_p > 1.0 || s.planner.alpha_v < 0.0 ||
        s.planner.alpha_v > 1.0) {
      fail("planner.alpha_p/alpha_v", "weights must be in [0, 1]");
    }
    if (s.planner.p_goal <= 0.0 || s.planner.p_goal > 1.0) {
      fail("planner.p_goal", "must be in (0, 1]");
    }
    if (s.planner.goal_bias < 0.0 || s.planner.goal_bias > 1.0) {
      fail("planner.goal_bias", "must be in [0, 1]");
    }
  }
  s.planner.eps_goal = s.eps_goal;

  if (j.contains("clustering")) {
    const json& jc = j["clustering"];
    if (jc.contains("method")) {
      try {
        s.clustering.method = cluster_method_from_string(jc["method"].get<std::string>());
      } catch (const std::invalid_argument& e) {
        fail("clustering.method", e.what());
      }
    }
    s.clustering.region_threshold =
        opt_number(jc, "region_threshold", s.clustering.region_threshold, "clustering");
    s.clustering.refine_threshold =
        opt_number(jc, "refine_threshold", s.clustering.refine_threshold, "clustering");
    if (s.clustering.region_threshold < 0.0 || s.clustering.region_threshold > 1.0) {
      fail("clustering.region_threshold", "must be in [0, 1]");
    }
  }

  if (j.contains("adaptation")) {
    const json& ja = j["adaptation"];
    s.adaptation.a_importance =
        opt_number(ja, "a_importance", s.adaptation.a_importance, "adaptation");
    s.adaptation.p_goal = opt_number(ja, "p_goal", s.adaptation.p_goal, "adaptation");
    s.adaptation.attempt_cap = opt_int(ja, "attempt_cap", s.adaptation.attempt_cap, "adaptation");
    if (s.adaptation.a_importance < 1.0) {
      fail("adaptation.a_importance", "must be >= 1");
    }
  } else {
    s.adaptation.attempt_cap = s.planner.n_attempt;
  }
  s.adaptation.p_goal = std::max(s.adaptation.p_goal, 0.0);

  s.sampling.space = s.space;
  s.sampling.min = s.bounds.min;
  s.sampling.max = s.bounds.max;
  if (s.space == SpaceType::SE3) {
    s.sampling.free_rotation = true;
  }
  if (j.contains("sampling")) {
    const json& js = j["sampling"];
    if (js.contains("min")) {
      s.sampling.min = as_vector(js["min"], s.space, "sampling.min");
    }
    if (js.contains("max")) {
      s.sampling.max = as_vector(js["max"], s.space, "sampling.max");
    }
    s.sampling.yaw_min = opt_number(js, "yaw_min", -kPi, "sampling");
    s.sampling.yaw_max = opt_number(js, "yaw_max", kPi, "sampling");
    s.sampling.free_rotation = opt_bool(js, "free_rotation", s.sampling.free_rotation, "sampling");
    if (js.contains("fixed_rotation")) {
      const json& jq = js["fixed_rotation"];
      if (!jq.is_array() || jq.size() != 4) {
        fail("sampling.fixed_rotation", "expected [w, x, y, z]");
      }
      s.sampling.fixed_rotation = Eigen::Quaterniond(
          jq[0].get<double>(), jq[1].get<double>(), jq[2].get<double>(), jq[3].get<double>());
      s.sampling.free_rotation = false;
    }
  }

  // Semantic validation: regions obstacle-free, start collision-free, goal
  // within bounds.
  VoxelEnvironment env = [&] {
    try {
      return s.planning_environment();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(std::string("workspace: ") + e.what());
    }
  }();
  if (!env.bounds().contains(s.goal.translation)) {
    fail("goal.t", "goal lies outside the workspace bounds");
  }
  if (!check_collision(env, s.robot, s.start).empty()) {
    fail("start", "start configuration is in collision");
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ScenarioError("cannot open scenario file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

}  // namespace rcp
