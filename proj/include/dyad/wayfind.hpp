#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dyad/geometry.hpp"
#include "dyad/interaction.hpp"
#include "dyad/world.hpp"

namespace dyad {

enum class CueKind { Forward = 0, Left = 1, Right = 2, Stop = 3 };

std::string_view cue_name(CueKind kind);
/// "forward", "left", "right", "stop" (case-insensitive). Throws
/// std::invalid_argument on anything else.
CueKind parse_cue(std::string_view name);
/// Target heading change implied by a cue: 0, +pi/2, -pi/2, 0.
double cue_target_offset(CueKind kind);

struct Cue {
  CueKind kind = CueKind::Forward;
  int issued_at = 0;
};

enum class Action : int {
  Stop = 0,
  Forward,
  TurnLeft10,
  TurnRight10,
  SidestepLeft,
  SidestepRight,
  DiagonalFrontLeft,
  DiagonalFrontRight,
};

inline constexpr int kNamedActions = 8;
inline constexpr int kMaxActions = 10;

struct ActionSpec {
  std::string name;
  Pose2 displacement;  // robot frame
};

/// The eight named actions plus up to two extra configurable slots.
class ActionCatalog {
 public:
  static ActionCatalog standard(double step_length = 0.25, double turn_deg = 10.0);

  /// Fills one of the reserved slots. Throws when both are taken.
  ActionCatalog& add(std::string name, const Pose2& displacement);

  int size() const { return static_cast<int>(specs_.size()); }
  const ActionSpec& operator[](int i) const { return specs_.at(static_cast<std::size_t>(i)); }
  const std::vector<ActionSpec>& specs() const { return specs_; }
  /// Index by name; throws std::invalid_argument when absent.
  int index_of(std::string_view name) const;
  int stop_index() const { return static_cast<int>(Action::Stop); }

 private:
  std::vector<ActionSpec> specs_;
};

std::string_view action_name(Action a);

struct RewardParams {
  double a = 1.0;
  double b = deg2rad(15.0);
  double c_collide = 1.0;
  double lambda = 0.01;
};

/// max(|wrap(theta_bar - theta)| - b, 0).
double heading_error_term(double theta_bar, double theta, double b);

/// One step of the human-centric reward:
/// (d_t - d_{t-1}) - a (e_t - e_{t-1}) - c [collided] - lambda, with d the
/// human's distance from `start` and e measured against `theta_bar`.
double compute_reward(const Vec2& start, const Pose2& human_prev, const Pose2& human_cur, double theta_bar,
                      bool collided, const RewardParams& params);

struct ErrorInjection {
  double orientation_error = 0.0;  // radians, added to every cue's target
  int timing_error = 0;            // steps, shifts cues issued after step 0
};

struct Observation {
  LidarScan scan;                     // raw ranges, robot frame
  std::vector<double> lidar;          // ranges / max_range
  Pose2 rel_from_start;               // robot pose in the start frame
  std::array<double, 4> cue_onehot{};
  int step = 0;
};

struct StepInfo {
  bool collided_human = false;
  bool collided_robot = false;
  double d_t = 0.0;        // human distance from its start point
  double theta_err = 0.0;  // wrap(theta_bar - human heading)
  CueKind cue = CueKind::Forward;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct TraceRecord {
  int step = 0;
  int action = 0;
  Pose2 robot;
  Pose2 human;
  double reward = 0.0;
  bool collided = false;
  bool collided_human = false;
  bool collided_robot = false;
  CueKind cue = CueKind::Forward;
  double theta_bar = 0.0;
};

struct EnvConfig {
  std::shared_ptr<const OccupancyWorld> world;
  Pose2 start;
  InteractionModel model = DelayedHarnessParams{};
  std::vector<Cue> cues;
  ErrorInjection errors;
  RewardParams reward;
  int max_steps = 200;
  double step_length = 0.25;
  double turn_deg = 10.0;
  double robot_radius = 0.35;
  double human_radius = 0.30;
  LidarConfig lidar;
  std::optional<SensorNoise> noise;  // empty means exact sensing
  std::vector<ActionSpec> extra_actions;
};

/// Effective cue schedule after timing error: cues issued after step 0 are
/// shifted and clamped to [1, max_steps - 1]; a Forward cue is implied at
/// step 0 when the schedule does not start there. When two cues land on the
/// same step the later one in the original order wins.
std::vector<Cue> effective_schedule(const std::vector<Cue>& cues, const ErrorInjection& errors, int max_steps);

class WayfindEnv {
 public:
  explicit WayfindEnv(EnvConfig cfg);

  /// Throws std::invalid_argument("invalid start") when either agent's disc
  /// collides at the start pose.
  Observation reset();
  /// Throws std::logic_error after the episode is done.
  StepResult step(int action);
  StepResult step(Action action) { return step(static_cast<int>(action)); }
  Observation observe() const;

  /// Schedules a cue at `at_step` (>= current step), replacing any cue
  /// already there. Used for live cueing.
  void issue_cue(CueKind kind, int at_step);

  const EnvConfig& config() const { return cfg_; }
  const ActionCatalog& catalog() const { return catalog_; }
  const DyadState& state() const { return state_; }
  int step_index() const { return step_; }
  bool done() const { return done_; }
  CueKind active_cue() const { return active_cue_; }
  double theta_bar() const { return theta_bar_; }
  Vec2 human_start() const { return human_start_; }
  const std::vector<Cue>& schedule() const { return schedule_; }
  const std::vector<TraceRecord>& trace() const { return trace_; }
  int collisions() const { return collisions_; }
  double total_reward() const { return total_reward_; }

  /// Robot and human discs free of obstacles at the given state.
  bool collision_free(const DyadState& s) const;

 private:
  void activate_cues();

  EnvConfig cfg_;
  ActionCatalog catalog_;
  std::vector<Cue> schedule_;
  DyadState state_;
  Vec2 human_start_;
  int step_ = 0;
  bool done_ = false;
  bool started_ = false;
  CueKind active_cue_ = CueKind::Forward;
  int active_cue_step_ = -1;
  double theta_bar_ = 0.0;
  int collisions_ = 0;
  double total_reward_ = 0.0;
  std::vector<TraceRecord> trace_;
};

void write_trace(std::ostream& out, const std::vector<TraceRecord>& trace, const ActionCatalog& catalog);

}  // namespace dyad
