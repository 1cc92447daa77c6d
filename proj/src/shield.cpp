#include "dyad/shield.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dyad/kernels.hpp"

namespace dyad {

void validate(const ShieldConfig& cfg) {
  if (!(cfg.beta >= 0.0 && cfg.beta <= 1.0)) throw std::invalid_argument("beta must be in [0, 1]");
  if (!(cfg.robot_radius > 0.0) || !(cfg.human_radius > 0.0)) throw std::invalid_argument("shield radii must be > 0");
  if (cfg.circle_samples < 12) throw std::invalid_argument("circle_samples must be >= 12");
  if (!(cfg.margin >= 0.0)) throw std::invalid_argument("shield margin must be >= 0");
}

std::string_view fallback_name(ShieldFallback f) { return f == ShieldFallback::Stop ? "stop" : "least_unsafe"; }

ShieldFallback parse_fallback(std::string_view name) {
  if (name == "stop") return ShieldFallback::Stop;
  if (name == "least_unsafe") return ShieldFallback::LeastUnsafe;
  throw std::invalid_argument("unknown shield fallback \"" + std::string(name) + "\"");
}

DyadState estimate_next(const InteractionModel& model, const DyadState& state, const Pose2& displacement) {
  return step_model(model, state, compose(state.robot, displacement));
}

Polygon2 shield_zone(const DyadState& s0, const DyadState& s1, const ShieldConfig& cfg) {
  const int n = cfg.circle_samples;
  const double rr0 = circumscribing_radius(cfg.robot_radius, n);
  const double rh0 = circumscribing_radius(cfg.human_radius, n);
  const double rr1 = circumscribing_radius(cfg.robot_radius + cfg.margin, n);
  const double rh1 = circumscribing_radius(cfg.human_radius + cfg.margin, n);
  std::vector<Vec2> pts;
  pts.reserve(4 * static_cast<std::size_t>(n));
  for (const auto& [c, r] : {std::pair{s0.robot.translation(), rr0}, std::pair{s0.human.translation(), rh0},
                             std::pair{s1.robot.translation(), rr1}, std::pair{s1.human.translation(), rh1}}) {
    const auto ring = circle_points(c, r, n);
    pts.insert(pts.end(), ring.begin(), ring.end());
  }
  return convex_hull(pts);
}

namespace {

std::vector<double> world_angles(std::span<const double> beam_angles, double heading) {
  std::vector<double> out(beam_angles.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = beam_angles[i] + heading;
  return out;
}

}  // namespace

std::vector<std::optional<double>> lidar_thresholds(const Polygon2& zone, std::span<const double> beam_angles,
                                                    const Pose2& robot_pose) {
  std::vector<std::optional<double>> out(beam_angles.size());
  const Vec2 origin = robot_pose.translation();
  if (zone.is_point() || zone.is_segment()) {
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = ray_polygon_exit_distance(Ray{origin, wrap_angle(beam_angles[i] + robot_pose.theta)}, zone);
    return out;
  }
  const auto planes = kernels::HalfPlanes::from_polygon(zone);
  const auto angles = world_angles(beam_angles, robot_pose.theta);
  const auto fan = kernels::BeamFan::from_angles(origin, angles);
  std::vector<double> enter(fan.size()), exit(fan.size());
  kernels::clip_beams(planes, fan, enter, exit);
  for (std::size_t i = 0; i < out.size(); ++i)
    if (enter[i] <= exit[i] && exit[i] >= 0.0) out[i] = exit[i];
  return out;
}

ShieldReport apply_shield(std::span<const double> probs, const ActionCatalog& actions, const DyadState& state,
                          const LidarScan& scan, const InteractionModel& model, const ShieldConfig& cfg) {
  validate(cfg);
  const int n = actions.size();
  if (static_cast<int>(probs.size()) != n) throw std::invalid_argument("probability vector does not match actions");
  if (scan.ranges.size() != scan.angles.size()) throw std::invalid_argument("malformed lidar scan");

  ShieldReport rep;
  rep.actions.resize(static_cast<std::size_t>(n));
  rep.modified_probs.assign(probs.begin(), probs.end());
  std::vector<double> thr(scan.ranges.size());
  for (int i = 0; i < n; ++i) {
    auto& a = rep.actions[static_cast<std::size_t>(i)];
    const Pose2& disp = actions[i].displacement;
    const DyadState next = estimate_next(model, state, disp);
    a.hull = shield_zone(state, next, cfg);
    a.thresholds = lidar_thresholds(a.hull, scan.angles, state.robot);
    const bool moves = !(next.robot == state.robot && next.human == state.human);
    for (std::size_t k = 0; k < thr.size(); ++k)
      thr[k] = a.thresholds[k] ? *a.thresholds[k] : std::numeric_limits<double>::quiet_NaN();
    a.margin = kernels::min_threshold_margin(scan.ranges, thr);
    a.unsafe = moves && a.margin < 0.0;
    if (a.unsafe) rep.modified_probs[static_cast<std::size_t>(i)] *= cfg.beta;
  }

  double total = std::accumulate(rep.modified_probs.begin(), rep.modified_probs.end(), 0.0);
  if (total > 0.0) {
    for (auto& p : rep.modified_probs) p /= total;
    return rep;
  }

  rep.fallback_used = true;
  std::fill(rep.modified_probs.begin(), rep.modified_probs.end(), 0.0);
  int keep = -1;
  const int stop = actions.stop_index();
  if (cfg.fallback == ShieldFallback::Stop && stop < n && !rep.actions[static_cast<std::size_t>(stop)].unsafe) {
    keep = stop;
  } else {
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double m = rep.actions[static_cast<std::size_t>(i)].margin;
      if (keep < 0 || m > best) {
        best = m;
        keep = i;
      }
    }
  }
  rep.modified_probs[static_cast<std::size_t>(keep)] = 1.0;
  return rep;
}

nlohmann::ordered_json to_json(const ShieldReport& report, const ActionCatalog& actions) {
  nlohmann::ordered_json j;
  auto hulls = nlohmann::ordered_json::array();
  auto unsafe = nlohmann::ordered_json::array();
  auto thresholds = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < report.actions.size(); ++i) {
    const auto& a = report.actions[i];
    auto verts = nlohmann::ordered_json::array();
    for (const auto& v : a.hull.vertices) verts.push_back({v.x, v.y});
    hulls.push_back({{"action", actions[static_cast<int>(i)].name}, {"vertices", std::move(verts)}});
    unsafe.push_back(a.unsafe);
    auto t = nlohmann::ordered_json::array();
    for (const auto& x : a.thresholds) t.push_back(x ? nlohmann::ordered_json(*x) : nlohmann::ordered_json(nullptr));
    thresholds.push_back(std::move(t));
  }
  j["hulls"] = std::move(hulls);
  j["unsafe"] = std::move(unsafe);
  j["thresholds"] = std::move(thresholds);
  j["probs"] = report.modified_probs;
  j["fallback"] = report.fallback_used;
  return j;
}

}  // namespace dyad
