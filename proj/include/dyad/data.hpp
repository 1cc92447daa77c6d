#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dyad/geometry.hpp"
#include "dyad/interaction.hpp"
#include "json.hpp"

namespace dyad {

enum class SegmentKind { Forward, InPlaceTurn, GradualTurn };

/// One leg of a scripted robot path. Turns are signed, CCW (left) positive.
struct Segment {
  SegmentKind kind = SegmentKind::Forward;
  double meters = 0.0;   // Forward
  double degrees = 0.0;  // turns
  double radius = 0.0;   // GradualTurn
};

struct ScriptedTrajectory {
  int id = 0;
  std::vector<Segment> segments;
};

inline constexpr double kGradualTurnRadius = 1.0;

/// The five robot paths used for interaction-data collection (ids 1..5).
const ScriptedTrajectory& scripted(int id);

/// Discretized robot poses, starting at the identity pose. Forward legs are
/// split into equal steps no longer than `step_length`; in-place turns into
/// equal rotations no larger than `turn_step_deg`; gradual turns into arc
/// steps no longer than `step_length`.
std::vector<Pose2> script_trajectory(int id, double step_length = 0.1, double turn_step_deg = 10.0);
std::vector<Pose2> discretize(const ScriptedTrajectory& traj, double step_length, double turn_step_deg);

/// Sum of translational segment lengths (arc length for gradual turns).
double path_length(const ScriptedTrajectory& traj);

struct SubjectProfile {
  std::string id;
  DelayedHarnessParams params;
  double noise_sigma = 0.0;  // meters, per-step Gaussian position noise
};

/// Human poses from a delayed-harness rollout (human starts at the default
/// offset) plus i.i.d. Gaussian x/y noise. Timestamps at `dt` spacing.
DyadTrajectory synthesize_dyad(const SubjectProfile& profile, std::span<const Pose2> robot_traj, std::uint64_t seed,
                               double dt = 0.1);

/// JSONL: one {"t", "robot": [x,y,theta], "human": [x,y,theta]} record per
/// line. An optional "traj" key groups records into separate trajectories;
/// `t` must be strictly increasing within a trajectory.
std::vector<DyadTrajectory> read_trajectories(std::istream& in);
std::vector<DyadTrajectory> load_trajectories(const std::string& path);

void write_trajectory(std::ostream& out, const DyadTrajectory& traj, int traj_index = -1);
void save_trajectories(const std::string& path, std::span<const DyadTrajectory> trajs);

std::vector<SubjectProfile> load_profiles(const std::string& path);

/// Three subjects differing in default offset and responsiveness.
std::vector<SubjectProfile> default_profiles();

/// Every third trajectory (indices 2, 5, 8, ...) goes to validation.
void split_train_val(std::span<const DyadTrajectory> all, std::vector<DyadTrajectory>& train,
                     std::vector<DyadTrajectory>& val);

struct ModelComparisonRow {
  std::string name;  // fixed_unopt, fixed_opt_ind, dh_opt_all, dh_opt_ind, rr_opt_ind
  double train_rmse_mm = 0.0;
  double val_rmse_mm = 0.0;  // mean over subjects of their validation RMSE
};

/// Per-subject and pooled fits on a 2:1 train/validation split of each
/// subject's trajectories. Throws when a subject has fewer than 3.
std::vector<ModelComparisonRow> compare_models(const std::vector<std::vector<DyadTrajectory>>& subjects,
                                               const FitOptions& opts = {});

/// {"kind": "fixed", "d"} | {"kind": "delayed", "offset": [dx, dy, dth], "alpha"}
/// | {"kind": "rod", "rod_length", "attach": [x, y, th]}
nlohmann::ordered_json to_json(const InteractionModel& model);
/// Missing fields take the defaults of their kind. Throws
/// std::invalid_argument on an unknown kind or invalid parameters.
InteractionModel model_from_json(const nlohmann::json& j);

}  // namespace dyad
