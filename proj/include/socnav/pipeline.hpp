#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "socnav/cnp.hpp"
#include "socnav/dataset.hpp"
#include "socnav/failure.hpp"
#include "socnav/world.hpp"

namespace socnav::nav {

using cnp::CnpModel;
using data::SceneConfig;
using fpm::FailureMonitor;
using sim::Scenario;
using sim::WorldState;

struct PipelineConfig {
  int via_point_count = 10;
  double via_reach_tolerance = 0.2;  // m
  double goal_tolerance = 0.3;       // m
  double time_limit = 40.0;          // s
  int fallback_recovery_ticks = 10;  // consecutive in-distribution ticks
  int replan_stall_ticks = 100;      // ticks without via progress
  double dt = 0.05;                  // s
  double collision_radius = 0.3;     // m
  int global_query_points = 200;
  sim::SfmParams sfm{};

  void validate() const;
};

enum class ControllerMode { DataDriven, Fallback };
enum class Termination { GoalReached, Collision, Timeout };

const char* mode_name(ControllerMode mode);
const char* termination_name(Termination t);
int termination_exit_code(Termination t);

struct TickRecord {
  double t = 0.0;
  Vec2 robot_pos{};
  Vec2 robot_vel{};
  Vec2 cmd{};
  std::vector<Vec2> ped_positions;
  ControllerMode mode = ControllerMode::DataDriven;
  double novelty_score = 0.0;
};

struct ModeSwitchEvent {
  int tick = 0;
  ControllerMode to = ControllerMode::Fallback;
};

struct ReplanEvent {
  int tick = 0;
};

struct EpisodeLog {
  Vec2 start{};
  Vec2 goal{};
  double dt = 0.05;
  std::vector<TickRecord> ticks;  // state snapshots; last one is terminal
  Termination termination = Termination::Timeout;
  std::vector<ModeSwitchEvent> mode_switches;
  std::vector<ReplanEvent> replans;

  double duration() const { return ticks.empty() ? 0.0 : ticks.back().t; }
  bool has_fallback_interval() const;
};

/// Generates the global trajectory and samples n via-points uniform in
/// normalized time, the last one being the trajectory end.
std::vector<Vec2> plan_via_points(const CnpModel& global_model, const SceneConfig& config, int n,
                                  int trajectory_points = 200);

/// Full navigation state machine: global plan, via-point following by the
/// local CNP, per-tick OOD monitoring with SFM fallback and hysteresis
/// recovery, stall-triggered replanning. monitor may be null (no failure
/// prediction).
EpisodeLog run_episode(const Scenario& scenario, const CnpModel& global_model,
                       const CnpModel& local_model, const FailureMonitor* monitor,
                       const PipelineConfig& config);

/// Local controller driving straight at the scenario goal (no global
/// layer); used by the controller-comparison and scalability experiments.
EpisodeLog run_local_episode(const Scenario& scenario, const CnpModel& local_model,
                             const FailureMonitor* monitor, const PipelineConfig& config);

/// Pure SFM episode toward the goal (the expert / fallback controller on
/// its own).
EpisodeLog run_sfm_episode(const Scenario& scenario, const PipelineConfig& config);

// --- classical baseline ---------------------------------------------------------

struct OccupancyGrid {
  int width = 0;
  int height = 0;
  double resolution = 0.25;
  Vec2 origin{};  // world position of cell (0,0)'s corner
  std::vector<std::uint8_t> blocked;

  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  bool is_blocked(int x, int y) const {
    return blocked[static_cast<std::size_t>(y) * width + x] != 0;
  }
  Vec2 cell_center(int x, int y) const {
    return {origin.x + (x + 0.5) * resolution, origin.y + (y + 0.5) * resolution};
  }
  std::pair<int, int> world_to_cell(Vec2 p) const;
};

OccupancyGrid build_occupancy_grid(Vec2 lower, Vec2 upper, const std::vector<Vec2>& obstacles,
                                   double resolution, double inflation_radius);

struct GridPath {
  bool found = false;
  std::vector<std::pair<int, int>> cells;
  int straight_steps = 0;
  int diag_steps = 0;

  double cost() const;
};

/// 8-connected A* with unit/sqrt(2) step costs and the Euclidean heuristic.
/// Step counts are tracked as integers so the cost is exact.
GridPath astar_grid(const OccupancyGrid& grid, std::pair<int, int> start,
                    std::pair<int, int> goal);

/// Cell-center waypoints from start to goal; throws when either endpoint
/// is inside an inflated obstacle, returns empty when unreachable.
std::vector<Vec2> a_star(const SceneConfig& config, double grid_resolution,
                         double inflation_radius, Vec2 workspace_lower = {0.0, 0.0},
                         Vec2 workspace_upper = {10.0, 10.0});

/// Classical hybrid stack: A* waypoints followed by the SFM controller.
EpisodeLog baseline_episode(const Scenario& scenario, const PipelineConfig& config,
                            double grid_resolution = 0.25, double inflation_radius = 0.55,
                            Vec2 workspace_lower = {0.0, 0.0},
                            Vec2 workspace_upper = {10.0, 10.0});

// --- trace io (JSONL) -------------------------------------------------------------

void write_episode_trace(const std::string& path, const EpisodeLog& log);
EpisodeLog read_episode_trace(const std::string& path);

}  // namespace socnav::nav
