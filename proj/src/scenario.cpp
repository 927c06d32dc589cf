#include "synseg/scenario.hpp"

#include <cmath>
#include <map>
#include <optional>
#include <sstream>

#include "synseg/io.hpp"
#include "synseg/taxonomy.hpp"

namespace synseg::world {
namespace {

constexpr double kDegToRad = M_PI / 180.0;

// Advances a planar pose along a behaviour. Returns the new (x, y, yaw).
struct PlanarState {
  double x, y, yaw;
  std::size_t next_waypoint;
};

PlanarState Advance(const PlanarState& s, const Behaviour& b, double dt) {
  PlanarState out = s;
  switch (b.kind) {
    case Behaviour::Kind::kStationary:
      return out;
    case Behaviour::Kind::kStraight:
      out.x += b.speed * dt * std::cos(s.yaw);
      out.y += b.speed * dt * std::sin(s.yaw);
      return out;
    case Behaviour::Kind::kWaypoints: {
      double budget = b.speed * dt;
      while (budget > 0.0 && out.next_waypoint < b.waypoints.size()) {
        const Eigen::Vector2d& wp = b.waypoints[out.next_waypoint];
        const double dx = wp.x() - out.x, dy = wp.y() - out.y;
        const double dist = std::hypot(dx, dy);
        if (dist <= budget) {
          out.x = wp.x();
          out.y = wp.y();
          if (dist > 0.0) out.yaw = std::atan2(dy, dx);
          budget -= dist;
          ++out.next_waypoint;
        } else {
          out.yaw = std::atan2(dy, dx);
          out.x += budget * dx / dist;
          out.y += budget * dy / dist;
          budget = 0.0;
        }
      }
      return out;
    }
  }
  return out;
}

Solid Placed(const Solid& shape, double x, double y, double yaw) {
  Solid s = shape;
  s.x = x;
  s.y = y;
  s.yaw = yaw;
  return s;
}

std::vector<std::string> Words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

double ToDouble(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": expected number, got '" + s + "'");
  }
}

int ToInt(const std::string& s, const std::string& where) {
  const double v = ToDouble(s, where);
  if (v != std::floor(v)) throw DataError(where + ": expected integer, got '" + s + "'");
  return static_cast<int>(v);
}

}  // namespace

void ScenarioScript::Validate() const {
  if (duration < 1) throw InvalidArgument("scenario duration must be >= 1 frame");
  if (!(frame_rate > 0.0)) throw InvalidArgument("scenario frame_rate must be > 0");
  if (weather_id < 0 || weather_id >= kWeatherCount) throw InvalidArgument("scenario weather must be in [0,13]");
  if (ego.speed < 0.0) throw InvalidArgument("ego speed must be >= 0");
  ego.rig.lidar.Validate();
  std::map<std::string, int> names;
  for (const ActorSpec& a : actors) {
    if (a.name.empty()) throw InvalidArgument("actor without a name");
    if (names[a.name]++ > 0) throw InvalidArgument("duplicate actor name '" + a.name + "'");
    if (a.behaviour.speed < 0.0) throw InvalidArgument("actor '" + a.name + "' has negative speed");
  }
  for (const Trigger& t : triggers) {
    if (!(t.radius > 0.0)) throw InvalidArgument("trigger radius must be > 0");
    if (!names.count(t.actor)) throw InvalidArgument("trigger references unknown actor '" + t.actor + "'");
  }
}

SensorFrame CaptureFrame(const Scene& scene, const Pose& ego_pose, const SensorRig& rig, int weather_id) {
  SensorFrame f;
  f.weather_id = weather_id;
  f.ego_pose = ego_pose;
  f.lidar_pose = ego_pose * rig.lidar_mount;
  f.camera_pose = ego_pose * rig.camera_mount;
  f.intrinsics = rig.intrinsics;
  f.lidar = SimulateLidar(scene, f.lidar_pose, rig.lidar);
  f.camera = RenderCamera(scene, f.camera_pose, rig.intrinsics, weather_id);
  return f;
}

std::vector<SensorFrame> RunScenario(const ScenarioScript& script, const Scene& base) {
  script.Validate();
  const double dt = 1.0 / script.frame_rate;

  struct ActorState {
    Solid solid;
    PlanarState planar;
    bool active;
    bool stopped;
  };
  std::vector<ActorState> actors;
  std::map<std::string, std::size_t> index_of;
  std::vector<bool> triggered_actor(script.actors.size(), false);
  for (const Trigger& t : script.triggers) {
    for (std::size_t i = 0; i < script.actors.size(); ++i) {
      if (script.actors[i].name == t.actor) triggered_actor[i] = true;
    }
  }
  for (std::size_t i = 0; i < script.actors.size(); ++i) {
    const ActorSpec& spec = script.actors[i];
    Solid s = spec.shape;
    s.appearance = static_cast<std::uint32_t>(base.solids.size() + i);
    for (const Solid& other : base.solids) {
      if (SolidsOverlap(s, other)) throw SpawnCollisionError("actor '" + spec.name + "' spawns inside an existing solid");
    }
    for (const ActorState& other : actors) {
      if (SolidsOverlap(s, other.solid)) {
        throw SpawnCollisionError("actor '" + spec.name + "' spawns inside another actor");
      }
    }
    actors.push_back({s, {s.x, s.y, s.yaw, 0}, !triggered_actor[i], false});
    index_of[spec.name] = i;
  }
  std::vector<bool> trigger_fired(script.triggers.size(), false);

  Behaviour ego_behaviour{Behaviour::Kind::kWaypoints, script.ego.speed, script.ego.waypoints};
  PlanarState ego{script.ego.x, script.ego.y, script.ego.yaw * kDegToRad, 0};

  auto collides = [&](const Solid& s, std::size_t self, std::vector<std::size_t>* hit_actors) {
    bool any = false;
    for (const Solid& other : base.solids) {
      if (SolidsOverlap(s, other)) {
        any = true;
        if (!hit_actors) return true;
        break;
      }
    }
    for (std::size_t j = 0; j < actors.size(); ++j) {
      if (j == self || !SolidsOverlap(s, actors[j].solid)) continue;
      any = true;
      if (!hit_actors) return true;
      hit_actors->push_back(j);
    }
    return any;
  };

  std::vector<SensorFrame> frames;
  frames.reserve(static_cast<std::size_t>(script.duration));
  for (int k = 0; k < script.duration; ++k) {
    if (k > 0) {
      ego = Advance(ego, ego_behaviour, dt);
      for (std::size_t i = 0; i < actors.size(); ++i) {
        ActorState& a = actors[i];
        if (!a.active || a.stopped) continue;
        const PlanarState next = Advance(a.planar, script.actors[i].behaviour, dt);
        const Solid moved = Placed(a.solid, next.x, next.y, next.yaw);
        if (!collides(moved, i, nullptr)) {
          a.solid = moved;
          a.planar = next;
          continue;
        }
        // Stop on contact: largest fraction of the step that stays clear.
        double lo = 0.0, hi = 1.0;
        for (int it = 0; it < 50; ++it) {
          const double mid = 0.5 * (lo + hi);
          const Solid probe = Placed(a.solid, a.planar.x + mid * (next.x - a.planar.x),
                                     a.planar.y + mid * (next.y - a.planar.y), a.planar.yaw);
          (collides(probe, i, nullptr) ? hi : lo) = mid;
        }
        std::vector<std::size_t> hit;
        collides(Placed(a.solid, a.planar.x + hi * (next.x - a.planar.x), a.planar.y + hi * (next.y - a.planar.y),
                        a.planar.yaw),
                 i, &hit);
        a.planar.x += lo * (next.x - a.planar.x);
        a.planar.y += lo * (next.y - a.planar.y);
        a.solid = Placed(a.solid, a.planar.x, a.planar.y, a.planar.yaw);
        a.stopped = true;
        for (std::size_t j : hit) actors[j].stopped = true;
      }
    }
    for (std::size_t t = 0; t < script.triggers.size(); ++t) {
      const Trigger& trig = script.triggers[t];
      if (trigger_fired[t]) continue;
      if (std::hypot(ego.x - trig.point.x(), ego.y - trig.point.y()) <= trig.radius) {
        trigger_fired[t] = true;
        actors[index_of.at(trig.actor)].active = true;
      }
    }

    Scene scene = base;
    for (const ActorState& a : actors) scene.solids.push_back(a.solid);
    const Pose ego_pose = Pose::FromYawPitchRoll(ego.yaw, 0, 0, {ego.x, ego.y, kRoadElevation});
    SensorFrame f = CaptureFrame(scene, ego_pose, script.ego.rig, script.weather_id);
    f.index = k;
    for (const ActorState& a : actors) f.actors.push_back(a.solid);
    frames.push_back(std::move(f));
  }
  return frames;
}

ScenarioScript ParseScenario(std::string_view text) {
  ScenarioScript script;
  const Taxonomy& carla = builtin_taxonomies().carla12;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  std::map<std::string, std::size_t> actor_index;
  std::optional<std::array<double, 3>> camera;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = "scenario line " + std::to_string(line_no);
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (Words(line).empty()) continue;
    if (eq == std::string::npos) throw DataError(where + ": expected 'key = value'");
    const auto key_words = Words(line.substr(0, eq));
    if (key_words.size() != 1) throw DataError(where + ": bad key");
    const std::string key = key_words[0];
    const auto v = Words(line.substr(eq + 1));
    auto need = [&](std::size_t n) {
      if (v.size() != n) {
        throw DataError(where + ": '" + key + "' expects " + std::to_string(n) + " values, got " +
                        std::to_string(v.size()));
      }
    };
    auto num = [&](std::size_t i) { return ToDouble(v.at(i), where); };

    if (key == "duration") {
      need(1);
      script.duration = ToInt(v[0], where);
    } else if (key == "frame_rate") {
      need(1);
      script.frame_rate = num(0);
    } else if (key == "weather") {
      need(1);
      script.weather_id = ToInt(v[0], where);
    } else if (key == "ego.spawn") {
      need(3);
      script.ego.x = num(0);
      script.ego.y = num(1);
      script.ego.yaw = num(2) * kDegToRad;
    } else if (key == "ego.speed") {
      need(1);
      script.ego.speed = num(0);
    } else if (key == "ego.waypoint") {
      need(2);
      script.ego.waypoints.emplace_back(num(0), num(1));
    } else if (key == "ego.camera") {
      need(3);
      camera = std::array<double, 3>{num(0), num(1), num(2)};
    } else if (key == "ego.camera_mount") {
      need(3);
      script.ego.rig.camera_mount = Pose(CameraToVehicleRotation(), Eigen::Vector3d(num(0), num(1), num(2)));
    } else if (key == "ego.lidar") {
      need(5);
      script.ego.rig.lidar.channels = ToInt(v[0], where);
      script.ego.rig.lidar.points_per_channel = ToInt(v[1], where);
      script.ego.rig.lidar.lower_fov_deg = num(2);
      script.ego.rig.lidar.upper_fov_deg = num(3);
      script.ego.rig.lidar.max_range = num(4);
    } else if (key == "ego.lidar_mount") {
      need(3);
      script.ego.rig.lidar_mount = Pose::FromTranslation(num(0), num(1), num(2));
    } else if (key == "actor") {
      if (v.size() < 3) throw DataError(where + ": actor = <name> <box|cylinder> <label> ...");
      ActorSpec a;
      a.name = v[0];
      const auto label = carla.Find(v[2]);
      if (!label) throw DataError(where + ": unknown carla12 class '" + v[2] + "'");
      if (v[1] == "box") {
        need(9);
        a.shape = Solid::Box(*label, num(3), num(4), kRoadElevation, num(5) * kDegToRad, num(6), num(7), num(8));
      } else if (v[1] == "cylinder") {
        need(7);
        a.shape = Solid::Cylinder(*label, num(3), num(4), kRoadElevation, num(5), num(6));
      } else {
        throw DataError(where + ": unknown actor shape '" + v[1] + "'");
      }
      if (actor_index.count(a.name)) throw DataError(where + ": duplicate actor '" + a.name + "'");
      actor_index[a.name] = script.actors.size();
      script.actors.push_back(std::move(a));
    } else if (key == "trigger") {
      need(4);
      script.triggers.push_back({v[0], {num(1), num(2)}, num(3)});
    } else if (key.size() > 10 && key.substr(key.size() - 10) == ".behaviour") {
      const std::string name = key.substr(0, key.size() - 10);
      const auto it = actor_index.find(name);
      if (it == actor_index.end()) throw DataError(where + ": behaviour for undeclared actor '" + name + "'");
      if (v.empty()) throw DataError(where + ": empty behaviour");
      Behaviour b;
      if (v[0] == "stationary") {
        need(1);
      } else if (v[0] == "straight") {
        need(2);
        b.kind = Behaviour::Kind::kStraight;
        b.speed = num(1);
      } else if (v[0] == "waypoints") {
        if (v.size() < 4 || v.size() % 2 != 0) throw DataError(where + ": waypoints <speed> x1 y1 [x2 y2 ...]");
        b.kind = Behaviour::Kind::kWaypoints;
        b.speed = num(1);
        for (std::size_t i = 2; i < v.size(); i += 2) b.waypoints.emplace_back(num(i), num(i + 1));
      } else {
        throw DataError(where + ": unknown behaviour '" + v[0] + "'");
      }
      script.actors[it->second].behaviour = std::move(b);
    } else {
      throw DataError(where + ": unknown key '" + key + "'");
    }
  }
  if (camera) {
    script.ego.rig.intrinsics =
        CameraIntrinsics::FromHorizontalFov(static_cast<int>((*camera)[0]), static_cast<int>((*camera)[1]), (*camera)[2]);
  }
  try {
    script.Validate();
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("scenario: ") + e.what());
  }
  return script;
}

ScenarioScript ReadScenarioFile(const std::string& path) { return ParseScenario(io::ReadFile(path)); }

}  // namespace synseg::world
