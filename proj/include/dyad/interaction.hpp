#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dyad/geometry.hpp"

namespace dyad {

/// Rigid harness: human held at signed distance `d` along the robot heading,
/// facing the same way.
struct FixedHarnessParams {
  double d = -0.76;
};

/// Human pose relative to the robot relaxes toward `default_offset`; `alpha`
/// is the weight kept on the displaced (temporary) offset each step.
struct DelayedHarnessParams {
  Pose2 default_offset{-0.7, -0.3, 0.0};
  double alpha = 0.5;
};

/// Taut rod of fixed length from a pivot on the robot; the human is dragged
/// along the pivot-to-human line and faces the pivot.
struct RotatingRodParams {
  double rod_length = 0.76;
  Pose2 attach_offset{};
};

using InteractionModel = std::variant<FixedHarnessParams, DelayedHarnessParams, RotatingRodParams>;

enum class ModelKind { Fixed, Delayed, RotatingRod };

ModelKind kind_of(const InteractionModel& model);
std::string_view model_kind_name(ModelKind kind);
/// Accepts "fixed", "delayed", "rod" / "rotating_rod".
ModelKind parse_model_kind(std::string_view name);

/// Checks the parameter invariants (|dx|,|dy|,|d| <= 2 m, alpha in [0,1],
/// rod_length > 0). Throws std::invalid_argument.
void validate(const InteractionModel& model);

/// World-frame robot and human poses. `offset` is always the human pose in
/// the robot frame.
struct DyadState {
  Pose2 robot;
  Pose2 human;
  Pose2 offset;

  static DyadState from_poses(const Pose2& robot, const Pose2& human);
};

Pose2 step_fixed(const FixedHarnessParams& params, const Pose2& robot_next);
DyadState step_delayed(const DelayedHarnessParams& params, const DyadState& state, const Pose2& robot_next);
DyadState step_rotating_rod(const RotatingRodParams& params, const DyadState& state, const Pose2& robot_next);

DyadState step_model(const InteractionModel& model, const DyadState& state, const Pose2& robot_next);

/// Human placed where the model puts it at rest relative to `robot`.
DyadState initial_state(const InteractionModel& model, const Pose2& robot);

/// Human trajectory predicted from human_0 by iterating the model; same
/// length as `robot_traj` (which must be non-empty).
std::vector<Pose2> rollout_predict(const InteractionModel& model, std::span<const Pose2> robot_traj,
                                   const Pose2& human_0);

/// Position-only RMSE in millimetres. Throws on length mismatch or empty input.
double trajectory_rmse(std::span<const Pose2> pred, std::span<const Pose2> actual);

/// Heading RMSE in radians (wrapped differences).
double heading_rmse(std::span<const Pose2> pred, std::span<const Pose2> actual);

/// Synchronised robot/human recording.
struct DyadTrajectory {
  std::vector<double> t;
  std::vector<Pose2> robot;
  std::vector<Pose2> human;

  std::size_t size() const { return robot.size(); }
};

/// Mean over trajectories of the full-rollout position RMSE (mm).
double mean_rollout_rmse(const InteractionModel& model, std::span<const DyadTrajectory> data);

struct FitOptions {
  int starts = 8;
  std::uint64_t seed = 0;
  double tolerance = 1e-4;  // simplex diameter
  int max_evaluations = 4000;
};

struct FitStart {
  std::vector<double> point;
  std::vector<double> best_point;
  double best_value = 0.0;
  int iterations = 0;
};

struct FitReport {
  ModelKind kind = ModelKind::Delayed;
  InteractionModel params;
  double train_rmse_mm = 0.0;
  std::vector<double> per_trajectory_rmse_mm;
  int iterations = 0;
  std::vector<FitStart> starts;
  int best_start = 0;
};

/// Multi-start simplex search minimizing mean rollout RMSE over `data`.
/// Throws std::invalid_argument on empty data and on non-finite poses
/// (message names the trajectory index).
FitReport fit(ModelKind kind, std::span<const DyadTrajectory> data, const FitOptions& opts = {});

/// Delayed-harness parameters with alpha = 0 and the offset read off the
/// first frame of the first trajectory (no optimization).
DelayedHarnessParams unoptimized_fixed(std::span<const DyadTrajectory> data);

}  // namespace dyad
