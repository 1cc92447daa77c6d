#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dyad/wayfind.hpp"
#include "json.hpp"

namespace dyad {

struct Scenario {
  std::string name;
  std::shared_ptr<const OccupancyWorld> world;
  Pose2 start;
  std::vector<Cue> cues;
  ErrorInjection errors;
  RewardParams reward;
  int max_steps = 100;
};

/// Scenario file:
/// {"world": path | inline JSON world, "start": [x, y, theta],
///  "cues": [{"step": n, "cue": "forward"}, ...],
///  "errors": {"orientation_deg": e, "timing_steps": k},
///  "reward": {"a", "b_deg", "c_collide", "lambda"}, "max_steps": n}
/// Relative world paths resolve against the scenario file's directory.
Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

/// Straight corridor along +x with its left end at x = 0.25 (inside the
/// wall). The floor spans y in [0.25, 0.25 + width].
OccupancyWorld corridor_world(double length, double width);

/// Horizontal corridor along +x meeting a perpendicular branch. The branch
/// opens upward (+y) when `left_branch`, downward otherwise; `tee` keeps the
/// horizontal corridor running past the junction.
struct JunctionLayout {
  double approach = 6.0;  // start wall to junction center
  double width = 2.0;
  double branch_length = 5.0;
  bool left_branch = true;
  bool tee = false;
};
OccupancyWorld junction_world(const JunctionLayout& layout);
/// y of the branch-side wall line of the horizontal corridor (the plane the
/// human must cross to be inside the branch).
double junction_plane(const JunctionLayout& layout);
/// x of the junction center.
double junction_center_x(const JunctionLayout& layout);
/// y of the horizontal corridor's center line.
double corridor_center_y(const JunctionLayout& layout);

/// Forward cue with a 20 degree orientation error in a 2 m wide corridor.
Scenario orientation_error_scenario();
/// Left cue issued 5 steps early before a T-junction.
Scenario early_turn_scenario();
JunctionLayout early_turn_layout();

/// 25 fixed scenarios: straight corridors with obstacles, left and right
/// turns, T-junctions with timing errors, and cluttered rooms.
std::vector<Scenario> ablation_suite();
/// Corridors with turns used for the train/test model comparison and for
/// policy training.
std::vector<Scenario> corridor_suite();
/// A single obstacle-free straight corridor.
std::vector<Scenario> single_corridor_suite();

/// Resolves "ablation", "corridor", "single", "orientation_error", "early_turn", or a path to
/// a scenario JSON file.
std::vector<Scenario> load_suite(const std::string& name_or_path);

struct EpisodeSetup {
  std::optional<SensorNoise> noise;  // seed is overridden per episode
  bool jitter = true;                // perturb the start pose per episode
  LidarConfig lidar;
  double robot_radius = 0.35;
  double human_radius = 0.30;
};

/// Environment for one episode of `scenario`. With jitter, the start pose is
/// shifted by up to 0.1 m and 5 degrees (falling back to the nominal pose if
/// the shifted one is not collision free).
EnvConfig make_env_config(const Scenario& scenario, const InteractionModel& model, const EpisodeSetup& setup,
                          std::uint64_t episode_seed);

}  // namespace dyad
