#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "dyad/geometry.hpp"
#include "dyad/interaction.hpp"
#include "dyad/wayfind.hpp"
#include "dyad/world.hpp"
#include "json.hpp"

namespace dyad {

enum class ShieldFallback { Stop, LeastUnsafe };

struct ShieldConfig {
  double beta = 0.0;  // 0 forbids unsafe actions, 1 disables shielding
  double robot_radius = 0.35;
  double human_radius = 0.30;
  int circle_samples = 32;
  /// Extra clearance added to both radii at t+1. Covers obstacles that slip
  /// between adjacent beams.
  double margin = 0.05;
  /// Applied when every action ends up with zero mass. Stop is kept only if
  /// it was not itself flagged (a settling human can still move during Stop);
  /// otherwise the action with the largest threshold margin is kept.
  ShieldFallback fallback = ShieldFallback::Stop;
};

void validate(const ShieldConfig& cfg);
std::string_view fallback_name(ShieldFallback f);
ShieldFallback parse_fallback(std::string_view name);

/// Dyad state after `displacement` (robot frame), no collision checks.
DyadState estimate_next(const InteractionModel& model, const DyadState& state, const Pose2& displacement);

/// Convex hull of the sampled footprints of both agents at t and t+1. The
/// t+1 radii are inflated by the margin; all discs are circumscribed, so the
/// polygon contains each true disc.
Polygon2 shield_zone(const DyadState& state_t, const DyadState& state_t1, const ShieldConfig& cfg);

/// Far-boundary distance of the zone along each beam from the robot
/// position; empty for beams that miss the zone.
std::vector<std::optional<double>> lidar_thresholds(const Polygon2& zone, std::span<const double> beam_angles,
                                                    const Pose2& robot_pose);

struct ActionShield {
  Polygon2 hull;
  std::vector<std::optional<double>> thresholds;
  bool unsafe = false;
  /// min over beams of (range - threshold); +inf when no beam has a threshold.
  double margin = 0.0;
};

struct ShieldReport {
  std::vector<ActionShield> actions;
  std::vector<double> modified_probs;
  bool fallback_used = false;
};

/// Scales unsafe actions by beta and renormalizes. An action whose predicted
/// next state equals the current one is safe (the current state is assumed
/// collision free).
ShieldReport apply_shield(std::span<const double> probs, const ActionCatalog& actions, const DyadState& state,
                          const LidarScan& scan, const InteractionModel& model, const ShieldConfig& cfg);

nlohmann::ordered_json to_json(const ShieldReport& report, const ActionCatalog& actions);

}  // namespace dyad
