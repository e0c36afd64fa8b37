#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "socnav/geometry.hpp"
#include "socnav/nn.hpp"
#include "socnav/world.hpp"

namespace socnav::data {

using nn::Matrix;
using nn::Vector;

enum class TrajectorySource { SfmExpert, Ingested };

struct TrajectorySample {
  double t = 0.0;  // seconds
  Vec2 pos{};
};

/// Timestamped 2D waypoint sequence. Times strictly increasing, at least
/// two samples, finite coordinates.
struct Trajectory {
  std::vector<TrajectorySample> samples;
  TrajectorySource source = TrajectorySource::SfmExpert;

  double duration() const { return samples.back().t - samples.front().t; }
  double path_length() const;
  void validate() const;
};

/// Start, goal and up to k_max pedestrian positions defining one
/// navigation task. flatten() pads with the sentinel so every scene maps
/// to a fixed 10-real task parameter.
struct SceneConfig {
  static constexpr int k_max = 3;
  static constexpr Vec2 sentinel{100.0, 100.0};

  Vec2 start{};
  Vec2 goal{};
  std::vector<Vec2> pedestrians;  // real pedestrians only, size <= k_max

  Vector flatten() const;
  void validate() const;
};

/// Builds a SceneConfig from an arbitrary pedestrian set; when there are
/// more than k_max pedestrians the ones nearest the start-goal segment are
/// kept.
SceneConfig make_scene_config(Vec2 start, Vec2 goal, const std::vector<Vec2>& pedestrians);

/// Egocentric training sample for the local controller: goal offset,
/// closest-pedestrian offset (sentinel when none), expert velocity.
struct LocalSample {
  Vec2 d_goal{};
  Vec2 d_ped{};
  Vec2 v{};
};

struct DemoRecord {
  SceneConfig config;
  std::vector<sim::PedScript> scripts;  // parallel to config.pedestrians
  Trajectory trajectory;

  /// Pedestrian positions at time t, reconstructed from the scripts.
  std::vector<Vec2> pedestrian_positions(double t) const;
};

struct ScenarioDistribution {
  double workspace_min = 0.0;
  double workspace_max = 10.0;
  double min_start_goal_distance = 4.0;
  int min_pedestrians = 0;
  int max_pedestrians = SceneConfig::k_max;
  double ped_clearance = 1.0;  // min distance of a pedestrian from start and goal
  double moving_fraction = 0.35;
  double ped_speed = 1.0;
  double dt = 0.05;
  double time_limit = 20.0;
  double goal_tolerance = 0.3;
  double collision_radius = 0.3;
  sim::SfmParams sfm{};
};

struct DemoDataset {
  std::vector<DemoRecord> records;
  std::uint64_t seed = 0;
  ScenarioDistribution distribution{};

  int count() const { return static_cast<int>(records.size()); }
  void validate() const;
};

/// Draws a random scene from the distribution (start/goal/pedestrians with
/// scripts); shared by demo generation and the benchmark suites.
sim::Scenario sample_scenario(Rng& rng, const ScenarioDistribution& dist);

/// n collision-free SFM expert rollouts; episodes that collide or time out
/// are discarded and regenerated. Deterministic in seed. Throws after
/// 10*n consecutive rejections.
DemoDataset generate_demonstrations(int n, std::uint64_t seed,
                                    const ScenarioDistribution& dist = {});

/// Resamples the path at T points uniform in normalized time; endpoints
/// preserved exactly.
std::vector<Vec2> normalize_time(const Trajectory& traj, int T);

/// Per-tick egocentric conversion of a robot trajectory against pedestrian
/// trajectories with identical timestamps. The velocity is the forward
/// finite difference, so n samples yield n-1 LocalSamples.
std::vector<LocalSample> to_egocentric(const Trajectory& robot,
                                       const std::vector<Trajectory>& ped_trajs, Vec2 goal);

/// Replicates every sample under k rotations at angles 2*pi*j/k, rotating
/// d_goal, d_ped and v jointly. The no-pedestrian sentinel is kept fixed
/// so it keeps meaning "none".
std::vector<LocalSample> augment_rotations(const std::vector<LocalSample>& samples, int k);

// --- CSV ingestion ------------------------------------------------------------

struct IngestResult {
  SceneConfig config;
  Trajectory robot;
  std::vector<Trajectory> ped_trajs;  // may have fewer samples than the robot track
};

/// Schema: header "t,x_robot,y_robot[,x_ped1,y_ped1,...]" then numeric rows.
/// Empty pedestrian cells mean "not observed at this time". Parse errors
/// carry the file line number.
IngestResult ingest_trajectory_csv(const std::string& path);

/// LocalSamples from an ingested clip; pedestrian tracks are linearly
/// interpolated onto robot timestamps and treated as absent outside their
/// recorded span.
std::vector<LocalSample> local_samples_from_ingested(const IngestResult& ingested);

// --- persistence ----------------------------------------------------------------

void save_demo_dataset(const std::string& path, const DemoDataset& dataset);
DemoDataset load_demo_dataset(const std::string& path);

// --- training tuples --------------------------------------------------------------

/// One (input, task, target) observation for a CNP.
struct ObservationTuple {
  Vector x;
  Vector gamma;
  Vector y;
};

/// Column-major bundle of observations along one trajectory.
struct TupleTrajectory {
  Matrix x;      // input_dim  x m
  Matrix gamma;  // task_dim   x m
  Matrix y;      // output_dim x m

  int size() const { return static_cast<int>(x.cols()); }
  ObservationTuple tuple(int i) const { return {x.col(i), gamma.col(i), y.col(i)}; }
};

struct CnpTrainData {
  std::vector<TupleTrajectory> trajectories;

  int input_dim() const { return static_cast<int>(trajectories.front().x.rows()); }
  int task_dim() const { return static_cast<int>(trajectories.front().gamma.rows()); }
  int output_dim() const { return static_cast<int>(trajectories.front().y.rows()); }
};

/// Global-controller tuples: x = normalized time, gamma = flattened scene
/// config, y = position on the resampled trajectory.
CnpTrainData global_training_tuples(const DemoDataset& dataset, int resample_points = 200);

/// Local-controller tuples: x = d_goal, gamma = d_ped, y = expert velocity.
/// rotations > 1 applies rotation augmentation per demo.
CnpTrainData local_training_tuples(const DemoDataset& dataset, int rotations = 1);

TupleTrajectory tuples_from_local_samples(const std::vector<LocalSample>& samples);

}  // namespace socnav::data
