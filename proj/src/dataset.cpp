#include "socnav/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace socnav::data {

double Trajectory::path_length() const {
  double total = 0.0;
  for (std::size_t i = 1; i < samples.size(); ++i)
    total += distance(samples[i].pos, samples[i - 1].pos);
  return total;
}

void Trajectory::validate() const {
  if (samples.size() < 2) throw std::invalid_argument("Trajectory: needs at least 2 samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i].t) || !samples[i].pos.finite())
      throw std::invalid_argument("Trajectory: non-finite sample");
    if (i > 0 && samples[i].t <= samples[i - 1].t)
      throw std::invalid_argument("Trajectory: timestamps must be strictly increasing");
  }
}

Vector SceneConfig::flatten() const {
  validate();
  Vector v(2 + 2 + 2 * k_max);
  v[0] = start.x;
  v[1] = start.y;
  v[2] = goal.x;
  v[3] = goal.y;
  for (int i = 0; i < k_max; ++i) {
    const Vec2 p = i < static_cast<int>(pedestrians.size()) ? pedestrians[i] : sentinel;
    v[4 + 2 * i] = p.x;
    v[5 + 2 * i] = p.y;
  }
  return v;
}

void SceneConfig::validate() const {
  if (start.x == goal.x && start.y == goal.y)
    throw std::invalid_argument("SceneConfig: start must differ from goal");
  if (static_cast<int>(pedestrians.size()) > k_max)
    throw std::invalid_argument("SceneConfig: too many pedestrians");
  if (!start.finite() || !goal.finite())
    throw std::invalid_argument("SceneConfig: non-finite endpoint");
}

SceneConfig make_scene_config(Vec2 start, Vec2 goal, const std::vector<Vec2>& pedestrians) {
  SceneConfig config;
  config.start = start;
  config.goal = goal;
  if (static_cast<int>(pedestrians.size()) <= SceneConfig::k_max) {
    config.pedestrians = pedestrians;
  } else {
    // keep the k_max pedestrians nearest the direct corridor
    std::vector<std::pair<double, Vec2>> ranked;
    for (const auto& p : pedestrians)
      ranked.emplace_back(point_segment_distance(p, start, goal), p);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (int i = 0; i < SceneConfig::k_max; ++i) config.pedestrians.push_back(ranked[i].second);
  }
  return config;
}

std::vector<Vec2> DemoRecord::pedestrian_positions(double t) const {
  std::vector<Vec2> out;
  out.reserve(scripts.size());
  for (const auto& script : scripts) {
    if (script.kind == sim::PedScriptKind::Static) {
      out.push_back(script.start);
      continue;
    }
    const Vec2 to_end = script.end - script.start;
    const double len = to_end.norm();
    const double travelled = std::min(script.speed * t, len);
    out.push_back(len < 1e-12 ? script.start : script.start + to_end * (travelled / len));
  }
  return out;
}

void DemoDataset::validate() const {
  for (const auto& rec : records) {
    rec.trajectory.validate();
    rec.config.validate();
    if (distance(rec.trajectory.samples.front().pos, rec.config.start) > 1e-9)
      throw std::invalid_argument("DemoDataset: trajectory does not start at config start");
    if (distance(rec.trajectory.samples.back().pos, rec.config.goal) >
        distribution.goal_tolerance + 1e-9)
      throw std::invalid_argument("DemoDataset: trajectory does not end at the goal");
  }
}

sim::Scenario sample_scenario(Rng& rng, const ScenarioDistribution& dist) {
  sim::Scenario scenario;
  scenario.dt = dist.dt;
  scenario.time_limit = dist.time_limit;
  scenario.seed = rng.seed();

  auto draw_point = [&] {
    return Vec2{rng.uniform(dist.workspace_min, dist.workspace_max),
                rng.uniform(dist.workspace_min, dist.workspace_max)};
  };

  scenario.start = draw_point();
  do {
    scenario.goal = draw_point();
  } while (distance(scenario.start, scenario.goal) < dist.min_start_goal_distance);

  const int ped_count = rng.uniform_int(dist.min_pedestrians, dist.max_pedestrians);
  for (int i = 0; i < ped_count; ++i) {
    Vec2 pos;
    int tries = 0;
    do {
      pos = draw_point();
      if (++tries > 200)
        throw std::runtime_error("sample_scenario: cannot place pedestrian with clearance");
    } while (distance(pos, scenario.start) < dist.ped_clearance ||
             distance(pos, scenario.goal) < dist.ped_clearance);

    sim::Pedestrian ped;
    ped.pos = pos;
    if (rng.bernoulli(dist.moving_fraction)) {
      Vec2 end;
      int end_tries = 0;
      do {
        end = draw_point();
        if (++end_tries > 200) {
          end = pos;
          break;
        }
      } while (distance(end, pos) < 1.0);
      ped.script = sim::PedScript::linear(pos, end, dist.ped_speed);
    } else {
      ped.script = sim::PedScript::static_at();
      ped.script.start = pos;
    }
    scenario.pedestrians.push_back(ped);
  }
  return scenario;
}

namespace {

struct ExpertRollout {
  Trajectory trajectory;
  bool collided = false;
  bool reached_goal = false;
};

ExpertRollout run_sfm_expert(const sim::Scenario& scenario, const ScenarioDistribution& dist) {
  ExpertRollout rollout;
  rollout.trajectory.source = TrajectorySource::SfmExpert;

  sim::WorldState state = scenario.initial_state();
  rollout.trajectory.samples.push_back({state.time, state.robot_pos});
  if (sim::check_collision(state, dist.collision_radius)) {
    rollout.collided = true;
    return rollout;
  }

  const int max_ticks = static_cast<int>(std::ceil(scenario.time_limit / scenario.dt));
  for (int tick = 0; tick < max_ticks; ++tick) {
    const Vec2 cmd = sim::sfm_command(state, scenario.goal, dist.sfm, scenario.dt);
    state = sim::step_world(state, cmd, scenario.dt, dist.sfm.v_max).state;
    rollout.trajectory.samples.push_back({state.time, state.robot_pos});
    if (sim::check_collision(state, dist.collision_radius)) {
      rollout.collided = true;
      return rollout;
    }
    if (distance(state.robot_pos, scenario.goal) < dist.goal_tolerance) {
      rollout.reached_goal = true;
      return rollout;
    }
  }
  return rollout;  // timed out
}

}  // namespace

DemoDataset generate_demonstrations(int n, std::uint64_t seed,
                                    const ScenarioDistribution& dist) {
  if (n < 1) throw std::invalid_argument("generate_demonstrations: n must be >= 1");

  DemoDataset dataset;
  dataset.seed = seed;
  dataset.distribution = dist;

  Rng base(seed);
  int consecutive_rejections = 0;
  std::uint64_t attempt = 0;
  while (dataset.count() < n) {
    Rng episode_rng = base.fork(attempt++);
    const sim::Scenario scenario = sample_scenario(episode_rng, dist);
    const ExpertRollout rollout = run_sfm_expert(scenario, dist);
    if (!rollout.reached_goal) {
      if (++consecutive_rejections > 10 * n)
        throw std::runtime_error(
            "generate_demonstrations: scenario distribution looks infeasible (too many "
            "rejections)");
      continue;
    }
    consecutive_rejections = 0;

    DemoRecord record;
    std::vector<Vec2> ped_positions;
    for (const auto& ped : scenario.pedestrians) {
      ped_positions.push_back(ped.pos);
      record.scripts.push_back(ped.script);
    }
    record.config = make_scene_config(scenario.start, scenario.goal, ped_positions);
    record.trajectory = rollout.trajectory;
    dataset.records.push_back(std::move(record));
  }
  return dataset;
}

std::vector<Vec2> normalize_time(const Trajectory& traj, int T) {
  traj.validate();
  if (T < 2) throw std::invalid_argument("normalize_time: T must be >= 2");
  if (traj.path_length() == 0.0)
    throw std::invalid_argument("normalize_time: degenerate zero-length trajectory");

  const double t0 = traj.samples.front().t;
  const double t1 = traj.samples.back().t;
  std::vector<Vec2> out(static_cast<std::size_t>(T));
  std::size_t seg = 0;
  for (int j = 0; j < T; ++j) {
    if (j == 0) {
      out[0] = traj.samples.front().pos;
      continue;
    }
    if (j == T - 1) {
      out[static_cast<std::size_t>(T - 1)] = traj.samples.back().pos;
      continue;
    }
    const double t = t0 + (t1 - t0) * (static_cast<double>(j) / (T - 1));
    while (seg + 2 < traj.samples.size() && traj.samples[seg + 1].t < t) ++seg;
    const auto& a = traj.samples[seg];
    const auto& b = traj.samples[seg + 1];
    const double u = (t - a.t) / (b.t - a.t);
    out[static_cast<std::size_t>(j)] = a.pos + (b.pos - a.pos) * u;
  }
  return out;
}

std::vector<LocalSample> to_egocentric(const Trajectory& robot,
                                       const std::vector<Trajectory>& ped_trajs, Vec2 goal) {
  robot.validate();
  if (robot.samples.size() < 2)
    throw std::invalid_argument("to_egocentric: need at least 2 ticks");
  for (const auto& ped : ped_trajs) {
    if (ped.samples.size() != robot.samples.size())
      throw std::invalid_argument("to_egocentric: trajectories are not synchronized");
    for (std::size_t k = 0; k < ped.samples.size(); ++k)
      if (std::abs(ped.samples[k].t - robot.samples[k].t) > 1e-9)
        throw std::invalid_argument("to_egocentric: timestamps differ; resample first");
  }

  std::vector<LocalSample> out;
  out.reserve(robot.samples.size() - 1);
  for (std::size_t k = 0; k + 1 < robot.samples.size(); ++k) {
    LocalSample s;
    const Vec2 pos = robot.samples[k].pos;
    s.d_goal = goal - pos;
    double best = infinite_distance;
    s.d_ped = SceneConfig::sentinel;
    for (const auto& ped : ped_trajs) {
      const Vec2 rel = ped.samples[k].pos - pos;
      if (rel.norm() < best) {
        best = rel.norm();
        s.d_ped = rel;
      }
    }
    const double dt = robot.samples[k + 1].t - robot.samples[k].t;
    s.v = (robot.samples[k + 1].pos - pos) / dt;
    out.push_back(s);
  }
  return out;
}

std::vector<LocalSample> augment_rotations(const std::vector<LocalSample>& samples, int k) {
  if (k < 1) throw std::invalid_argument("augment_rotations: k must be >= 1");
  std::vector<LocalSample> out;
  out.reserve(samples.size() * static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const double angle = 2.0 * std::numbers::pi * j / k;
    for (const auto& s : samples) {
      LocalSample r;
      r.d_goal = s.d_goal.rotated(angle);
      const bool is_sentinel =
          s.d_ped.x == SceneConfig::sentinel.x && s.d_ped.y == SceneConfig::sentinel.y;
      r.d_ped = is_sentinel ? s.d_ped : s.d_ped.rotated(angle);
      r.v = s.v.rotated(angle);
      out.push_back(r);
    }
  }
  return out;
}

// --- CSV ingestion ------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

std::string trimmed(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double parse_cell(const std::string& cell, int line_number, const std::string& column) {
  try {
    std::size_t consumed = 0;
    const double v = std::stod(cell, &consumed);
    if (consumed != cell.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("csv parse error at line " + std::to_string(line_number) +
                             ": non-numeric value '" + cell + "' in column " + column);
  }
}

}  // namespace

IngestResult ingest_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);

  std::string line;
  int line_number = 0;

  if (!std::getline(in, line))
    throw std::runtime_error("csv parse error at line 1: missing header");
  ++line_number;
  auto header = split_csv_line(line);
  for (auto& h : header) h = trimmed(h);
  if (header.size() < 3 || header[0] != "t" || header[1] != "x_robot" || header[2] != "y_robot")
    throw std::runtime_error(
        "csv parse error at line 1: expected header t,x_robot,y_robot[,x_ped1,y_ped1,...]");
  if ((header.size() - 3) % 2 != 0)
    throw std::runtime_error("csv parse error at line 1: pedestrian columns must come in pairs");
  const int ped_count = static_cast<int>((header.size() - 3) / 2);

  IngestResult result;
  result.robot.source = TrajectorySource::Ingested;
  result.ped_trajs.assign(static_cast<std::size_t>(ped_count), Trajectory{});
  for (auto& p : result.ped_trajs) p.source = TrajectorySource::Ingested;

  double prev_t = -infinite_distance;
  while (std::getline(in, line)) {
    ++line_number;
    if (trimmed(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() < 3)
      throw std::runtime_error("csv parse error at line " + std::to_string(line_number) +
                               ": expected at least t,x_robot,y_robot");
    const double t = parse_cell(trimmed(cells[0]), line_number, "t");
    if (t <= prev_t)
      throw std::runtime_error("csv parse error at line " + std::to_string(line_number) +
                               ": time is not strictly increasing");
    prev_t = t;
    const double rx = parse_cell(trimmed(cells[1]), line_number, "x_robot");
    const double ry = parse_cell(trimmed(cells[2]), line_number, "y_robot");
    result.robot.samples.push_back({t, {rx, ry}});

    for (int p = 0; p < ped_count; ++p) {
      const std::size_t cx = 3 + 2 * static_cast<std::size_t>(p);
      const std::size_t cy = cx + 1;
      if (cy >= cells.size()) continue;  // short row: pedestrian absent
      const std::string sx = trimmed(cells[cx]);
      const std::string sy = trimmed(cells[cy]);
      if (sx.empty() || sy.empty()) continue;  // gap: pedestrian absent at this time
      const double px = parse_cell(sx, line_number, header[cx]);
      const double py = parse_cell(sy, line_number, header[cy]);
      result.ped_trajs[static_cast<std::size_t>(p)].samples.push_back({t, {px, py}});
    }
  }

  if (result.robot.samples.size() < 2)
    throw std::runtime_error("csv parse error: fewer than 2 data rows in " + path);

  // drop pedestrian tracks that never appear
  std::erase_if(result.ped_trajs, [](const Trajectory& p) { return p.samples.empty(); });

  std::vector<Vec2> first_positions;
  for (const auto& p : result.ped_trajs) first_positions.push_back(p.samples.front().pos);
  result.config = make_scene_config(result.robot.samples.front().pos,
                                    result.robot.samples.back().pos, first_positions);
  return result;
}

std::vector<LocalSample> local_samples_from_ingested(const IngestResult& ingested) {
  const auto& robot = ingested.robot;
  if (robot.samples.size() < 2)
    throw std::invalid_argument("local_samples_from_ingested: need at least 2 ticks");

  auto ped_at = [](const Trajectory& ped, double t, Vec2* out) {
    if (ped.samples.empty()) return false;
    if (t < ped.samples.front().t - 1e-9 || t > ped.samples.back().t + 1e-9) return false;
    if (ped.samples.size() == 1) {
      *out = ped.samples.front().pos;
      return true;
    }
    std::size_t seg = 0;
    while (seg + 2 < ped.samples.size() && ped.samples[seg + 1].t < t) ++seg;
    const auto& a = ped.samples[seg];
    const auto& b = ped.samples[seg + 1];
    const double u = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
    *out = a.pos + (b.pos - a.pos) * u;
    return true;
  };

  const Vec2 goal = robot.samples.back().pos;
  std::vector<LocalSample> out;
  for (std::size_t k = 0; k + 1 < robot.samples.size(); ++k) {
    LocalSample s;
    const Vec2 pos = robot.samples[k].pos;
    const double t = robot.samples[k].t;
    s.d_goal = goal - pos;
    s.d_ped = SceneConfig::sentinel;
    double best = infinite_distance;
    for (const auto& ped : ingested.ped_trajs) {
      Vec2 p;
      if (!ped_at(ped, t, &p)) continue;
      const Vec2 rel = p - pos;
      if (rel.norm() < best) {
        best = rel.norm();
        s.d_ped = rel;
      }
    }
    const double dt = robot.samples[k + 1].t - robot.samples[k].t;
    s.v = (robot.samples[k + 1].pos - pos) / dt;
    out.push_back(s);
  }
  return out;
}

// --- persistence ----------------------------------------------------------------

namespace {

nlohmann::json vec_to_json(Vec2 v) { return nlohmann::json::array({v.x, v.y}); }

Vec2 vec_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

nlohmann::json script_to_json(const sim::PedScript& s) {
  if (s.kind == sim::PedScriptKind::Static)
    return {{"kind", "static"}, {"pos", vec_to_json(s.start)}};
  return {{"kind", "linear"},
          {"start", vec_to_json(s.start)},
          {"end", vec_to_json(s.end)},
          {"speed", s.speed}};
}

sim::PedScript script_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "static") {
    sim::PedScript s = sim::PedScript::static_at();
    s.start = vec_from_json(j.at("pos"));
    return s;
  }
  if (kind == "linear")
    return sim::PedScript::linear(vec_from_json(j.at("start")), vec_from_json(j.at("end")),
                                  j.at("speed").get<double>());
  throw std::runtime_error("demo dataset: unknown script kind '" + kind + "'");
}

nlohmann::json distribution_to_json(const ScenarioDistribution& d) {
  return {{"workspace_min", d.workspace_min},
          {"workspace_max", d.workspace_max},
          {"min_start_goal_distance", d.min_start_goal_distance},
          {"min_pedestrians", d.min_pedestrians},
          {"max_pedestrians", d.max_pedestrians},
          {"ped_clearance", d.ped_clearance},
          {"moving_fraction", d.moving_fraction},
          {"ped_speed", d.ped_speed},
          {"dt", d.dt},
          {"time_limit", d.time_limit},
          {"goal_tolerance", d.goal_tolerance},
          {"collision_radius", d.collision_radius}};
}

ScenarioDistribution distribution_from_json(const nlohmann::json& j) {
  ScenarioDistribution d;
  d.workspace_min = j.at("workspace_min").get<double>();
  d.workspace_max = j.at("workspace_max").get<double>();
  d.min_start_goal_distance = j.at("min_start_goal_distance").get<double>();
  d.min_pedestrians = j.at("min_pedestrians").get<int>();
  d.max_pedestrians = j.at("max_pedestrians").get<int>();
  d.ped_clearance = j.at("ped_clearance").get<double>();
  d.moving_fraction = j.at("moving_fraction").get<double>();
  d.ped_speed = j.at("ped_speed").get<double>();
  d.dt = j.at("dt").get<double>();
  d.time_limit = j.at("time_limit").get<double>();
  d.goal_tolerance = j.at("goal_tolerance").get<double>();
  d.collision_radius = j.at("collision_radius").get<double>();
  return d;
}

}  // namespace

void save_demo_dataset(const std::string& path, const DemoDataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for write: " + path);

  nlohmann::json header;
  header["schema_version"] = 1;
  header["kind"] = "demo-dataset";
  header["seed"] = dataset.seed;
  header["count"] = dataset.count();
  header["distribution"] = distribution_to_json(dataset.distribution);
  out << header.dump() << '\n';

  for (const auto& rec : dataset.records) {
    nlohmann::json j;
    j["config"] = {{"start", vec_to_json(rec.config.start)},
                   {"goal", vec_to_json(rec.config.goal)}};
    j["config"]["peds"] = nlohmann::json::array();
    for (const auto& p : rec.config.pedestrians) j["config"]["peds"].push_back(vec_to_json(p));
    j["scripts"] = nlohmann::json::array();
    for (const auto& s : rec.scripts) j["scripts"].push_back(script_to_json(s));
    j["source"] =
        rec.trajectory.source == TrajectorySource::SfmExpert ? "sfm_expert" : "ingested";
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : rec.trajectory.samples)
      samples.push_back(nlohmann::json::array({s.t, s.pos.x, s.pos.y}));
    j["samples"] = std::move(samples);
    out << j.dump() << '\n';
  }
}

DemoDataset load_demo_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("demo dataset: empty file " + path);
  const nlohmann::json header = nlohmann::json::parse(line);
  if (header.at("schema_version").get<int>() != 1)
    throw std::runtime_error("demo dataset: unsupported schema version");
  if (header.at("kind").get<std::string>() != "demo-dataset")
    throw std::runtime_error("demo dataset: unexpected kind");

  DemoDataset dataset;
  dataset.seed = header.at("seed").get<std::uint64_t>();
  dataset.distribution = distribution_from_json(header.at("distribution"));

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line);
    DemoRecord rec;
    rec.config.start = vec_from_json(j.at("config").at("start"));
    rec.config.goal = vec_from_json(j.at("config").at("goal"));
    for (const auto& p : j.at("config").at("peds"))
      rec.config.pedestrians.push_back(vec_from_json(p));
    for (const auto& s : j.at("scripts")) rec.scripts.push_back(script_from_json(s));
    rec.trajectory.source = j.at("source").get<std::string>() == "sfm_expert"
                                ? TrajectorySource::SfmExpert
                                : TrajectorySource::Ingested;
    for (const auto& s : j.at("samples"))
      rec.trajectory.samples.push_back(
          {s.at(0).get<double>(), {s.at(1).get<double>(), s.at(2).get<double>()}});
    dataset.records.push_back(std::move(rec));
  }
  if (dataset.count() != header.at("count").get<int>())
    throw std::runtime_error("demo dataset: record count mismatch");
  return dataset;
}

// --- training tuples --------------------------------------------------------------

CnpTrainData global_training_tuples(const DemoDataset& dataset, int resample_points) {
  if (dataset.records.empty())
    throw std::invalid_argument("global_training_tuples: empty dataset");
  CnpTrainData out;
  out.trajectories.reserve(dataset.records.size());
  for (const auto& rec : dataset.records) {
    const auto points = normalize_time(rec.trajectory, resample_points);
    const Vector gamma = rec.config.flatten();
    TupleTrajectory traj;
    traj.x.resize(1, resample_points);
    traj.gamma.resize(gamma.size(), resample_points);
    traj.y.resize(2, resample_points);
    for (int j = 0; j < resample_points; ++j) {
      traj.x(0, j) = static_cast<double>(j) / (resample_points - 1);
      traj.gamma.col(j) = gamma;
      traj.y(0, j) = points[static_cast<std::size_t>(j)].x;
      traj.y(1, j) = points[static_cast<std::size_t>(j)].y;
    }
    out.trajectories.push_back(std::move(traj));
  }
  return out;
}

TupleTrajectory tuples_from_local_samples(const std::vector<LocalSample>& samples) {
  TupleTrajectory traj;
  const int m = static_cast<int>(samples.size());
  traj.x.resize(2, m);
  traj.gamma.resize(2, m);
  traj.y.resize(2, m);
  for (int j = 0; j < m; ++j) {
    const auto& s = samples[static_cast<std::size_t>(j)];
    traj.x(0, j) = s.d_goal.x;
    traj.x(1, j) = s.d_goal.y;
    traj.gamma(0, j) = s.d_ped.x;
    traj.gamma(1, j) = s.d_ped.y;
    traj.y(0, j) = s.v.x;
    traj.y(1, j) = s.v.y;
  }
  return traj;
}

CnpTrainData local_training_tuples(const DemoDataset& dataset, int rotations) {
  if (dataset.records.empty())
    throw std::invalid_argument("local_training_tuples: empty dataset");
  CnpTrainData out;
  for (const auto& rec : dataset.records) {
    // rebuild synchronized pedestrian trajectories from the scripts
    std::vector<Trajectory> ped_trajs(rec.scripts.size());
    for (auto& p : ped_trajs) p.source = rec.trajectory.source;
    for (const auto& sample : rec.trajectory.samples) {
      const auto positions = rec.pedestrian_positions(sample.t);
      for (std::size_t p = 0; p < positions.size(); ++p)
        ped_trajs[p].samples.push_back({sample.t, positions[p]});
    }
    const auto samples = to_egocentric(rec.trajectory, ped_trajs, rec.config.goal);
    if (rotations <= 1) {
      out.trajectories.push_back(tuples_from_local_samples(samples));
      continue;
    }
    // each rotated copy is its own demonstration: contexts never mix frames
    for (int j = 0; j < rotations; ++j) {
      const double angle = 2.0 * std::numbers::pi * j / rotations;
      std::vector<LocalSample> rotated;
      rotated.reserve(samples.size());
      for (const auto& s : samples) {
        LocalSample r;
        r.d_goal = s.d_goal.rotated(angle);
        const bool is_sentinel =
            s.d_ped.x == SceneConfig::sentinel.x && s.d_ped.y == SceneConfig::sentinel.y;
        r.d_ped = is_sentinel ? s.d_ped : s.d_ped.rotated(angle);
        r.v = s.v.rotated(angle);
        rotated.push_back(r);
      }
      out.trajectories.push_back(tuples_from_local_samples(rotated));
    }
  }
  return out;
}

}  // namespace socnav::data
