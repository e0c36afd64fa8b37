#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "socnav/geometry.hpp"

namespace socnav::sim {

/// Social Force Model constants (attraction via velocity relaxation,
/// exponential-decay repulsion from pedestrians).
struct SfmParams {
  double relaxation_time = 2.3;  // s
  double force_strength = 6.40;
  double force_range = 0.25;  // m
  double v_max = 2.5;         // m/s
  void validate() const;
};

enum class PedScriptKind { Static, LinearPath };

struct PedScript {
  PedScriptKind kind = PedScriptKind::Static;
  Vec2 start{};
  Vec2 end{};
  double speed = 0.0;  // m/s along start->end

  static PedScript static_at() { return {}; }
  static PedScript linear(Vec2 start, Vec2 end, double speed) {
    return {PedScriptKind::LinearPath, start, end, speed};
  }
};

struct Pedestrian {
  Vec2 pos{};
  Vec2 vel{};
  PedScript script{};
};

/// One simulation tick of the 2D kinematic world. Immutable value;
/// step_world returns a new state.
struct WorldState {
  double time = 0.0;
  Vec2 robot_pos{};
  Vec2 robot_vel{};
  std::vector<Pedestrian> pedestrians;
};

struct StepResult {
  WorldState state;
  bool command_rejected = false;
};

/// Euler step: robot_vel = clamp(cmd, v_max), robot_pos += vel*dt, scripted
/// pedestrians advance, time += dt. A non-finite command is rejected and
/// the state returned unchanged with the flag set.
StepResult step_world(const WorldState& state, Vec2 robot_cmd, double dt, double v_max = 2.5);

/// Velocity command toward goal under the SFM force law. With a pedestrian
/// exactly on the robot (d = 0) the repulsion direction falls back to +x
/// and *overlap_flag is set when provided.
Vec2 sfm_command(const WorldState& state, Vec2 goal, const SfmParams& params, double dt,
                 bool* overlap_flag = nullptr);

/// Euclidean distance to the nearest pedestrian; +inf when there are none.
double min_pedestrian_distance(const WorldState& state);
double min_pedestrian_distance(Vec2 robot_pos, const std::vector<Vec2>& ped_positions);

enum class ProxemicsZone { Intimate, Personal, Social, Public, Beyond };

/// Half-open bands [0,0.5) [0.5,1) [1,4) [4,8) [8,inf). Negative distance
/// is a domain error.
ProxemicsZone classify_zone(double dist);

const char* zone_name(ProxemicsZone zone);

bool check_collision(const WorldState& state, double collision_radius);

// --- scenario file (JSON) ---------------------------------------------------

struct Scenario {
  Vec2 start{};
  Vec2 goal{};
  std::vector<Pedestrian> pedestrians;
  double dt = 0.05;
  double time_limit = 40.0;
  std::uint64_t seed = 0;

  WorldState initial_state() const;
};

nlohmann::json to_json(const Scenario& s);
Scenario scenario_from_json(const nlohmann::json& j);
void save_scenario(const std::string& path, const Scenario& s);
Scenario load_scenario(const std::string& path);

}  // namespace socnav::sim
