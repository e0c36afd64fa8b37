#include "socnav/world.hpp"

#include <fstream>
#include <stdexcept>

namespace socnav::sim {

void SfmParams::validate() const {
  if (relaxation_time <= 0.0 || force_strength <= 0.0 || force_range <= 0.0 || v_max <= 0.0)
    throw std::invalid_argument("SfmParams: all fields must be strictly positive");
}

namespace {

Pedestrian advance_pedestrian(const Pedestrian& ped, double dt) {
  Pedestrian next = ped;
  if (ped.script.kind == PedScriptKind::Static) {
    next.vel = {0.0, 0.0};
    return next;
  }
  const Vec2 to_end = ped.script.end - ped.pos;
  const double remaining = to_end.norm();
  const double step = ped.script.speed * dt;
  if (remaining <= step || remaining < 1e-12) {
    next.pos = ped.script.end;
    next.vel = {0.0, 0.0};
    return next;
  }
  const Vec2 dir = to_end / remaining;
  next.vel = dir * ped.script.speed;
  next.pos = ped.pos + next.vel * dt;
  return next;
}

}  // namespace

StepResult step_world(const WorldState& state, Vec2 robot_cmd, double dt, double v_max) {
  if (dt <= 0.0) throw std::invalid_argument("step_world: dt must be > 0");
  if (!robot_cmd.finite()) return {state, true};

  WorldState next = state;
  next.robot_vel = clamp_norm(robot_cmd, v_max);
  next.robot_pos = state.robot_pos + next.robot_vel * dt;
  for (std::size_t i = 0; i < state.pedestrians.size(); ++i)
    next.pedestrians[i] = advance_pedestrian(state.pedestrians[i], dt);
  next.time = state.time + dt;
  return {next, false};
}

Vec2 sfm_command(const WorldState& state, Vec2 goal, const SfmParams& params, double dt,
                 bool* overlap_flag) {
  if (!goal.finite()) throw std::invalid_argument("sfm_command: goal must be finite");
  params.validate();

  const Vec2 goal_dir = (goal - state.robot_pos).normalized_or_zero();
  Vec2 force = (goal_dir * params.v_max - state.robot_vel) / params.relaxation_time;

  for (const auto& ped : state.pedestrians) {
    const Vec2 away = state.robot_pos - ped.pos;
    const double d = away.norm();
    Vec2 n;
    if (d < 1e-12) {
      n = {1.0, 0.0};  // degenerate overlap: deterministic +x
      if (overlap_flag != nullptr) *overlap_flag = true;
    } else {
      n = away / d;
    }
    force += n * (params.force_strength * std::exp(-d / params.force_range));
  }

  return clamp_norm(state.robot_vel + force * dt, params.v_max);
}

double min_pedestrian_distance(const WorldState& state) {
  double best = infinite_distance;
  for (const auto& ped : state.pedestrians)
    best = std::min(best, distance(state.robot_pos, ped.pos));
  return best;
}

double min_pedestrian_distance(Vec2 robot_pos, const std::vector<Vec2>& ped_positions) {
  double best = infinite_distance;
  for (const auto& p : ped_positions) best = std::min(best, distance(robot_pos, p));
  return best;
}

ProxemicsZone classify_zone(double dist) {
  if (dist < 0.0 || std::isnan(dist))
    throw std::domain_error("classify_zone: distance must be >= 0");
  if (dist < 0.5) return ProxemicsZone::Intimate;
  if (dist < 1.0) return ProxemicsZone::Personal;
  if (dist < 4.0) return ProxemicsZone::Social;
  if (dist < 8.0) return ProxemicsZone::Public;
  return ProxemicsZone::Beyond;
}

const char* zone_name(ProxemicsZone zone) {
  switch (zone) {
    case ProxemicsZone::Intimate:
      return "intimate";
    case ProxemicsZone::Personal:
      return "personal";
    case ProxemicsZone::Social:
      return "social";
    case ProxemicsZone::Public:
      return "public";
    case ProxemicsZone::Beyond:
      return "beyond";
  }
  return "beyond";
}

bool check_collision(const WorldState& state, double collision_radius) {
  if (collision_radius <= 0.0)
    throw std::invalid_argument("check_collision: radius must be > 0");
  return min_pedestrian_distance(state) < collision_radius;
}

WorldState Scenario::initial_state() const {
  WorldState state;
  state.time = 0.0;
  state.robot_pos = start;
  state.robot_vel = {0.0, 0.0};
  state.pedestrians = pedestrians;
  return state;
}

// --- scenario io --------------------------------------------------------------

namespace {

nlohmann::json vec_to_json(Vec2 v) { return nlohmann::json::array({v.x, v.y}); }

Vec2 vec_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

nlohmann::json ped_to_json(const Pedestrian& p) {
  nlohmann::json j;
  j["pos"] = vec_to_json(p.pos);
  if (p.script.kind == PedScriptKind::Static) {
    j["script"] = {{"kind", "static"}};
  } else {
    j["script"] = {{"kind", "linear"},
                   {"start", vec_to_json(p.script.start)},
                   {"end", vec_to_json(p.script.end)},
                   {"speed", p.script.speed}};
  }
  return j;
}

Pedestrian ped_from_json(const nlohmann::json& j) {
  Pedestrian p;
  p.pos = vec_from_json(j.at("pos"));
  const auto& s = j.at("script");
  const std::string kind = s.at("kind").get<std::string>();
  if (kind == "static") {
    p.script = PedScript::static_at();
  } else if (kind == "linear") {
    p.script = PedScript::linear(vec_from_json(s.at("start")), vec_from_json(s.at("end")),
                                 s.at("speed").get<double>());
  } else {
    throw std::runtime_error("scenario: unknown pedestrian script kind '" + kind + "'");
  }
  return p;
}

}  // namespace

nlohmann::json to_json(const Scenario& s) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["start"] = vec_to_json(s.start);
  j["goal"] = vec_to_json(s.goal);
  j["pedestrians"] = nlohmann::json::array();
  for (const auto& p : s.pedestrians) j["pedestrians"].push_back(ped_to_json(p));
  j["dt"] = s.dt;
  j["time_limit"] = s.time_limit;
  j["seed"] = s.seed;
  return j;
}

Scenario scenario_from_json(const nlohmann::json& j) {
  if (j.at("schema_version").get<int>() != 1)
    throw std::runtime_error("scenario: unsupported schema version");
  Scenario s;
  s.start = vec_from_json(j.at("start"));
  s.goal = vec_from_json(j.at("goal"));
  for (const auto& p : j.at("pedestrians")) s.pedestrians.push_back(ped_from_json(p));
  s.dt = j.at("dt").get<double>();
  s.time_limit = j.at("time_limit").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

void save_scenario(const std::string& path, const Scenario& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  out << to_json(s).dump(2);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return scenario_from_json(nlohmann::json::parse(in));
}

}  // namespace socnav::sim
