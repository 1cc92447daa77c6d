#include "dyad/scenarios.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dyad/rng.hpp"

namespace dyad {

namespace fs = std::filesystem;

namespace {

constexpr double kWall = 0.25;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Pose2 pose_array(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + " must be [x, y, theta]", 0, 0);
  return {j[0].get<double>(), j[1].get<double>(), wrap_angle(j[2].get<double>())};
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ParseError("scenario must be a JSON object", 0, 0);
  Scenario s;
  try {
    s.name = j.value("name", std::string("scenario"));
    if (!j.contains("world")) throw ParseError("scenario is missing \"world\"", 0, 0);
    const auto& w = j.at("world");
    if (w.is_string()) {
      fs::path p(w.get<std::string>());
      if (p.is_relative()) p = fs::path(base_dir) / p;
      s.world = std::make_shared<const OccupancyWorld>(load_world(p.string()));
    } else {
      s.world = std::make_shared<const OccupancyWorld>(world_from_json(w.dump()));
    }
    if (j.contains("start")) {
      s.start = pose_array(j.at("start"), "start");
    } else if (s.world->start_marker()) {
      s.start = {s.world->start_marker()->x, s.world->start_marker()->y, 0.0};
    } else {
      throw ParseError("scenario is missing \"start\"", 0, 0);
    }
    for (const auto& c : j.value("cues", nlohmann::json::array()))
      s.cues.push_back({parse_cue(c.at("cue").get<std::string>()), c.at("step").get<int>()});
    if (j.contains("errors")) {
      const auto& e = j.at("errors");
      s.errors.orientation_error = deg2rad(e.value("orientation_deg", 0.0));
      s.errors.timing_error = e.value("timing_steps", 0);
    }
    if (j.contains("reward")) {
      const auto& r = j.at("reward");
      s.reward.a = r.value("a", s.reward.a);
      s.reward.b = deg2rad(r.value("b_deg", rad2deg(s.reward.b)));
      s.reward.c_collide = r.value("c_collide", s.reward.c_collide);
      s.reward.lambda = r.value("lambda", s.reward.lambda);
    }
    s.max_steps = j.value("max_steps", s.max_steps);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("invalid scenario: ") + e.what(), 0, 0);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid scenario: ") + e.what(), 0, 0);
  }
  if (s.max_steps < 1) throw ParseError("max_steps must be >= 1", 0, 0);
  return s;
}

Scenario load_scenario(const std::string& path) {
  const std::string text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed scenario JSON: ") + e.what(), 0, static_cast<int>(e.byte));
  }
  const fs::path dir = fs::path(path).parent_path();
  return scenario_from_json(j, dir.empty() ? "." : dir.string());
}

OccupancyWorld corridor_world(double length, double width) {
  return WorldBuilder(length + 2 * kWall, width + 2 * kWall).border(kWall).build();
}

namespace {

// Horizontal corridor center line y.
double center_y(const JunctionLayout& l, bool down_branch) {
  return kWall + (down_branch ? l.branch_length : 0.0) + l.width / 2;
}

OccupancyWorld junction(const JunctionLayout& l, bool up, bool down, bool through) {
  const double xc = kWall + l.approach;
  const double x_end = xc + l.width / 2 + (through ? 3.0 : 0.0);
  const double yc = center_y(l, down);
  const double height = 2 * kWall + l.width + (up ? l.branch_length : 0.0) + (down ? l.branch_length : 0.0);
  WorldBuilder b(x_end + kWall, height);
  b.box(0.0, 0.0, x_end + kWall, height);
  b.clear(kWall, yc - l.width / 2, x_end, yc + l.width / 2);
  if (up) b.clear(xc - l.width / 2, yc, xc + l.width / 2, yc + l.width / 2 + l.branch_length);
  if (down) b.clear(xc - l.width / 2, yc - l.width / 2 - l.branch_length, xc + l.width / 2, yc);
  return b.build();
}

std::shared_ptr<const OccupancyWorld> share(OccupancyWorld w) {
  return std::make_shared<const OccupancyWorld>(std::move(w));
}

Scenario make(std::string name, std::shared_ptr<const OccupancyWorld> world, Pose2 start, std::vector<Cue> cues,
              ErrorInjection err = {}, int max_steps = 80) {
  Scenario s;
  s.name = std::move(name);
  s.world = std::move(world);
  s.start = start;
  s.cues = std::move(cues);
  s.errors = err;
  s.max_steps = max_steps;
  return s;
}

// Straight corridor with rectangular obstacles given relative to the floor
// origin (kWall, kWall).
Scenario corridor_case(std::string name, double length, double width,
                       std::vector<std::array<double, 4>> boxes, ErrorInjection err = {}) {
  WorldBuilder b(length + 2 * kWall, width + 2 * kWall);
  b.border(kWall);
  for (const auto& bx : boxes) b.box(kWall + bx[0], kWall + bx[1], kWall + bx[2], kWall + bx[3]);
  return make(std::move(name), share(b.build()), {1.5, kWall + width / 2, 0.0}, {{CueKind::Forward, 0}}, err);
}

// The robot covers the approach at one step per 0.25 m, so the on-time turn
// cue lands when the robot reaches the junction center.
int on_time_step(const JunctionLayout& l) { return static_cast<int>(std::lround((kWall + l.approach - 1.5) / 0.25)); }

Scenario junction_case(std::string name, JunctionLayout l, bool up, bool down, bool through, CueKind cue,
                       int timing = 0) {
  auto world = share(junction(l, up, down, through));
  const Pose2 start{1.5, center_y(l, down), 0.0};
  std::vector<Cue> cues{{CueKind::Forward, 0}};
  if (cue != CueKind::Forward) cues.push_back({cue, on_time_step(l)});
  ErrorInjection err;
  err.timing_error = timing;
  return make(std::move(name), std::move(world), start, std::move(cues), err);
}

Scenario room_case(std::string name, std::vector<std::array<double, 4>> boxes, double orientation_deg) {
  WorldBuilder b(8.0, 8.0);
  b.border(kWall);
  for (const auto& bx : boxes) b.box(bx[0], bx[1], bx[2], bx[3]);
  ErrorInjection err;
  err.orientation_error = deg2rad(orientation_deg);
  return make(std::move(name), share(b.build()), {1.5, 4.0, 0.0}, {{CueKind::Forward, 0}}, err);
}

}  // namespace

OccupancyWorld junction_world(const JunctionLayout& l) {
  return junction(l, l.left_branch || l.tee, !l.left_branch || l.tee, false);
}

double junction_plane(const JunctionLayout& l) {
  const bool down = !l.left_branch || l.tee;
  const double yc = center_y(l, down);
  return l.left_branch ? yc + l.width / 2 : yc - l.width / 2;
}

double junction_center_x(const JunctionLayout& l) { return kWall + l.approach; }

double corridor_center_y(const JunctionLayout& l) { return center_y(l, !l.left_branch || l.tee); }

Scenario orientation_error_scenario() {
  ErrorInjection err;
  err.orientation_error = deg2rad(20.0);
  auto s = make("orientation_error", share(corridor_world(12.0, 2.0)), {1.5, kWall + 1.0, 0.0},
                {{CueKind::Forward, 0}}, err, 60);
  return s;
}

JunctionLayout early_turn_layout() {
  JunctionLayout l;
  l.approach = 6.0;
  l.width = 2.0;
  l.branch_length = 5.0;
  l.left_branch = true;
  l.tee = true;
  return l;
}

Scenario early_turn_scenario() {
  const auto l = early_turn_layout();
  auto s = junction_case("early_left", l, true, true, false, CueKind::Left, -5);
  s.max_steps = 70;
  return s;
}

std::vector<Scenario> ablation_suite() {
  JunctionLayout base;
  JunctionLayout wide = base;
  wide.width = 2.4;
  JunctionLayout narrow = base;
  narrow.width = 1.8;

  ErrorInjection ori20;
  ori20.orientation_error = deg2rad(20.0);
  ErrorInjection ori_m15;
  ori_m15.orientation_error = deg2rad(-15.0);

  std::vector<Scenario> s;
  s.push_back(corridor_case("straight_2.0", 12.0, 2.0, {}));
  s.push_back(corridor_case("straight_obstacle_left", 12.0, 1.8, {{4.5, 1.1, 5.1, 1.8}}));
  s.push_back(corridor_case("straight_obstacle_right", 12.0, 2.4, {{4.0, 0.0, 4.6, 1.0}}));
  s.push_back(corridor_case("straight_staggered", 12.0, 2.0, {{3.5, 1.2, 4.0, 2.0}, {6.5, 0.0, 7.0, 0.8}}));
  s.push_back(corridor_case("straight_pillar", 12.0, 3.0, {{5.5, 1.25, 6.0, 1.75}}));
  s.push_back(corridor_case("straight_orientation_+20", 12.0, 2.0, {}, ori20));
  s.push_back(corridor_case("straight_orientation_-15", 12.0, 2.4, {}, ori_m15));

  s.push_back(junction_case("left_turn", base, true, false, false, CueKind::Left));
  s.push_back(junction_case("left_turn_early3", base, true, false, false, CueKind::Left, -3));
  s.push_back(junction_case("left_turn_late3", base, true, false, false, CueKind::Left, 3));
  s.push_back(junction_case("left_turn_wide", wide, true, false, false, CueKind::Left));
  s.push_back(junction_case("left_turn_narrow", narrow, true, false, false, CueKind::Left));

  s.push_back(junction_case("right_turn", base, false, true, false, CueKind::Right));
  s.push_back(junction_case("right_turn_early3", base, false, true, false, CueKind::Right, -3));
  s.push_back(junction_case("right_turn_late3", base, false, true, false, CueKind::Right, 3));
  s.push_back(junction_case("right_turn_wide", wide, false, true, false, CueKind::Right));
  s.push_back(junction_case("right_turn_narrow", narrow, false, true, false, CueKind::Right));

  s.push_back(junction_case("tee_left_early5", base, true, true, false, CueKind::Left, -5));
  s.push_back(junction_case("tee_right_early5", base, true, true, false, CueKind::Right, -5));
  s.push_back(junction_case("tee_left_late2", base, true, true, false, CueKind::Left, 2));
  s.push_back(junction_case("tee_right", base, true, true, false, CueKind::Right));

  s.push_back(junction_case("side_left", base, true, false, true, CueKind::Left));
  s.push_back(junction_case("side_through", base, true, false, true, CueKind::Forward));

  s.push_back(room_case("room_clutter", {{3.0, 3.5, 3.6, 4.6}, {5.0, 2.0, 5.5, 3.5}, {5.2, 5.0, 6.0, 5.6}}, 0.0));
  s.push_back(room_case("room_clutter_orientation", {{3.2, 2.8, 3.8, 3.8}, {4.8, 4.2, 5.6, 4.9}}, 10.0));
  return s;
}

std::vector<Scenario> corridor_suite() {
  JunctionLayout base;
  JunctionLayout narrow = base;
  narrow.width = 1.6;
  std::vector<Scenario> s;
  s.push_back(corridor_case("straight_1.6", 12.0, 1.6, {}));
  s.push_back(corridor_case("straight_obstacles", 12.0, 2.0, {{3.5, 1.2, 4.0, 2.0}, {6.5, 0.0, 7.0, 0.8}}));
  s.push_back(junction_case("left_turn", base, true, false, false, CueKind::Left));
  s.push_back(junction_case("right_turn", base, false, true, false, CueKind::Right));
  s.push_back(junction_case("left_turn_narrow", narrow, true, false, false, CueKind::Left));
  s.push_back(junction_case("right_turn_narrow", narrow, false, true, false, CueKind::Right));
  s.push_back(junction_case("tee_left", base, true, true, false, CueKind::Left));
  s.push_back(junction_case("tee_right", base, true, true, false, CueKind::Right));
  return s;
}

std::vector<Scenario> single_corridor_suite() { return {corridor_case("single_corridor", 12.0, 2.0, {})}; }

std::vector<Scenario> load_suite(const std::string& name) {
  if (name == "ablation") return ablation_suite();
  if (name == "corridor") return corridor_suite();
  if (name == "single") return single_corridor_suite();
  if (name == "orientation_error") return {orientation_error_scenario()};
  if (name == "early_turn") return {early_turn_scenario()};
  return {load_scenario(name)};
}

EnvConfig make_env_config(const Scenario& sc, const InteractionModel& model, const EpisodeSetup& setup,
                          std::uint64_t episode_seed) {
  EnvConfig cfg;
  cfg.world = sc.world;
  cfg.start = sc.start;
  cfg.model = model;
  cfg.cues = sc.cues;
  cfg.errors = sc.errors;
  cfg.reward = sc.reward;
  cfg.max_steps = sc.max_steps;
  cfg.lidar = setup.lidar;
  cfg.robot_radius = setup.robot_radius;
  cfg.human_radius = setup.human_radius;
  if (setup.noise) {
    SensorNoise n = *setup.noise;
    n.seed = derive_seed(episode_seed, 0x11DA);
    cfg.noise = n;
  }
  if (setup.jitter) {
    Rng rng(derive_seed(episode_seed, 0x57A7));
    const Pose2 shifted{sc.start.x + rng.uniform(-0.1, 0.1), sc.start.y + rng.uniform(-0.1, 0.1),
                        wrap_angle(sc.start.theta + deg2rad(rng.uniform(-5.0, 5.0)))};
    const DyadState s = initial_state(model, shifted);
    if (!sc.world->circle_collides(s.robot.translation(), cfg.robot_radius) &&
        !sc.world->circle_collides(s.human.translation(), cfg.human_radius))
      cfg.start = shifted;
  }
  return cfg;
}

}  // namespace dyad
