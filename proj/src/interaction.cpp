#include "dyad/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dyad/optimize.hpp"
#include "dyad/rng.hpp"

namespace dyad {

ModelKind kind_of(const InteractionModel& model) {
  return static_cast<ModelKind>(model.index());
}

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::Fixed:
      return "fixed";
    case ModelKind::Delayed:
      return "delayed";
    case ModelKind::RotatingRod:
      return "rod";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "fixed") return ModelKind::Fixed;
  if (name == "delayed" || name == "delay" || name == "dh") return ModelKind::Delayed;
  if (name == "rod" || name == "rotating_rod" || name == "rr") return ModelKind::RotatingRod;
  throw std::invalid_argument("unknown interaction model: " + std::string(name));
}

void validate(const InteractionModel& model) {
  constexpr double reach = 2.0;
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, FixedHarnessParams>) {
          if (!(std::abs(p.d) <= reach)) throw std::invalid_argument("fixed harness: |d| must be <= 2 m");
        } else if constexpr (std::is_same_v<T, DelayedHarnessParams>) {
          if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) throw std::invalid_argument("delayed harness: alpha must be in [0, 1]");
          if (!(std::abs(p.default_offset.x) <= reach && std::abs(p.default_offset.y) <= reach))
            throw std::invalid_argument("delayed harness: offset beyond 2 m reach");
        } else {
          if (!(p.rod_length > 0.0)) throw std::invalid_argument("rotating rod: rod_length must be positive");
        }
      },
      model);
}

DyadState DyadState::from_poses(const Pose2& robot, const Pose2& human) {
  return {robot, human, relative(robot, human)};
}

Pose2 step_fixed(const FixedHarnessParams& params, const Pose2& robot_next) {
  return {robot_next.x + params.d * std::cos(robot_next.theta), robot_next.y + params.d * std::sin(robot_next.theta),
          robot_next.theta};
}

DyadState step_delayed(const DelayedHarnessParams& params, const DyadState& state, const Pose2& robot_next) {
  const Pose2 temporary = relative(robot_next, state.human);
  const Pose2& target = params.default_offset;
  const double a = params.alpha;
  const Pose2 offset{a * temporary.x + (1.0 - a) * target.x, a * temporary.y + (1.0 - a) * target.y,
                     wrap_angle(target.theta + a * wrap_angle(temporary.theta - target.theta))};
  return {robot_next, compose(robot_next, offset), offset};
}

DyadState step_rotating_rod(const RotatingRodParams& params, const DyadState& state, const Pose2& robot_next) {
  const Vec2 pivot = transform_point(robot_next, params.attach_offset.translation());
  Vec2 dir = state.human.translation() - pivot;
  double len = dir.norm();
  if (len < 1e-12) {
    // Coincident pivot and human: keep the direction the human was facing from.
    dir = {-std::cos(state.human.theta), -std::sin(state.human.theta)};
    len = 1.0;
  }
  const Vec2 pos = pivot + dir * (params.rod_length / len);
  const Vec2 facing = pivot - pos;
  const Pose2 human{pos.x, pos.y, wrap_angle(std::atan2(facing.y, facing.x))};
  return DyadState::from_poses(robot_next, human);
}

DyadState step_model(const InteractionModel& model, const DyadState& state, const Pose2& robot_next) {
  return std::visit(
      [&](const auto& p) -> DyadState {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, FixedHarnessParams>) {
          return DyadState::from_poses(robot_next, step_fixed(p, robot_next));
        } else if constexpr (std::is_same_v<T, DelayedHarnessParams>) {
          return step_delayed(p, state, robot_next);
        } else {
          return step_rotating_rod(p, state, robot_next);
        }
      },
      model);
}

DyadState initial_state(const InteractionModel& model, const Pose2& robot) {
  return std::visit(
      [&](const auto& p) -> DyadState {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, FixedHarnessParams>) {
          return DyadState::from_poses(robot, step_fixed(p, robot));
        } else if constexpr (std::is_same_v<T, DelayedHarnessParams>) {
          return {robot, compose(robot, p.default_offset), p.default_offset};
        } else {
          const Vec2 pivot = transform_point(robot, p.attach_offset.translation());
          const Vec2 pos{pivot.x - p.rod_length * std::cos(robot.theta), pivot.y - p.rod_length * std::sin(robot.theta)};
          return DyadState::from_poses(robot, {pos.x, pos.y, robot.theta});
        }
      },
      model);
}

std::vector<Pose2> rollout_predict(const InteractionModel& model, std::span<const Pose2> robot_traj,
                                   const Pose2& human_0) {
  if (robot_traj.empty()) throw std::invalid_argument("rollout_predict: empty robot trajectory");
  std::vector<Pose2> out;
  out.reserve(robot_traj.size());
  out.push_back(human_0);
  DyadState state = DyadState::from_poses(robot_traj[0], human_0);
  for (std::size_t t = 1; t < robot_traj.size(); ++t) {
    state = step_model(model, state, robot_traj[t]);
    out.push_back(state.human);
  }
  return out;
}

double trajectory_rmse(std::span<const Pose2> pred, std::span<const Pose2> actual) {
  if (pred.size() != actual.size())
    throw std::invalid_argument("trajectory_rmse: length mismatch (" + std::to_string(pred.size()) + " vs " +
                                std::to_string(actual.size()) + ")");
  if (pred.empty()) throw std::invalid_argument("trajectory_rmse: empty trajectories");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dx = pred[i].x - actual[i].x;
    const double dy = pred[i].y - actual[i].y;
    sum += dx * dx + dy * dy;
  }
  return 1000.0 * std::sqrt(sum / static_cast<double>(pred.size()));
}

double heading_rmse(std::span<const Pose2> pred, std::span<const Pose2> actual) {
  if (pred.size() != actual.size() || pred.empty()) throw std::invalid_argument("heading_rmse: bad lengths");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = wrap_angle(pred[i].theta - actual[i].theta);
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

double mean_rollout_rmse(const InteractionModel& model, std::span<const DyadTrajectory> data) {
  if (data.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& traj : data) sum += trajectory_rmse(rollout_predict(model, traj.robot, traj.human.front()), traj.human);
  return sum / static_cast<double>(data.size());
}

DelayedHarnessParams unoptimized_fixed(std::span<const DyadTrajectory> data) {
  if (data.empty() || data.front().size() == 0) throw std::invalid_argument("empty data");
  return {relative(data.front().robot.front(), data.front().human.front()), 0.0};
}

namespace {

void check_data(std::span<const DyadTrajectory> data) {
  if (data.empty()) throw std::invalid_argument("fit: empty data");
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto& tr = data[k];
    if (tr.robot.empty() || tr.robot.size() != tr.human.size())
      throw std::invalid_argument("fit: trajectory " + std::to_string(k) + " has unsynchronized or empty poses");
    auto finite = [](const Pose2& p) { return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.theta); };
    for (std::size_t i = 0; i < tr.robot.size(); ++i)
      if (!finite(tr.robot[i]) || !finite(tr.human[i]))
        throw std::invalid_argument("fit: non-finite pose in trajectory " + std::to_string(k) + " at frame " +
                                    std::to_string(i));
  }
}

Pose2 mean_first_offset(std::span<const DyadTrajectory> data) {
  double x = 0.0, y = 0.0, s = 0.0, c = 0.0;
  for (const auto& tr : data) {
    const Pose2 o = relative(tr.robot.front(), tr.human.front());
    x += o.x;
    y += o.y;
    s += std::sin(o.theta);
    c += std::cos(o.theta);
  }
  const double n = static_cast<double>(data.size());
  return {x / n, y / n, std::atan2(s, c)};
}

struct Parameterization {
  Box box;
  std::vector<double> heuristic;
  std::function<InteractionModel(const std::vector<double>&)> decode;
};

Parameterization parameterization(ModelKind kind, std::span<const DyadTrajectory> data) {
  const Pose2 o = mean_first_offset(data);
  auto clampv = [](double v, double lo, double hi) { return std::clamp(v, lo, hi); };
  switch (kind) {
    case ModelKind::Fixed:
      return {Box{{-2.0}, {2.0}}, {clampv(o.x, -2.0, 2.0)},
              [](const std::vector<double>& x) -> InteractionModel { return FixedHarnessParams{x[0]}; }};
    case ModelKind::Delayed:
      // Heading offset does not affect positions; it is fitted in a second stage.
      return {Box{{-2.0, -2.0, 0.0}, {2.0, 2.0, 1.0}},
              {clampv(o.x, -2.0, 2.0), clampv(o.y, -2.0, 2.0), 0.5},
              [](const std::vector<double>& x) -> InteractionModel {
                return DelayedHarnessParams{{x[0], x[1], 0.0}, x[2]};
              }};
    case ModelKind::RotatingRod:
      return {Box{{0.05, -2.0, -2.0}, {2.0, 2.0, 2.0}},
              {clampv(std::hypot(o.x, o.y), 0.05, 2.0), 0.0, 0.0},
              [](const std::vector<double>& x) -> InteractionModel {
                return RotatingRodParams{x[0], {x[1], x[2], 0.0}};
              }};
  }
  throw std::invalid_argument("unknown model kind");
}

double fit_heading_offset(DelayedHarnessParams params, std::span<const DyadTrajectory> data, const FitOptions& opts,
                          int& iterations) {
  auto objective = [&](const std::vector<double>& x) {
    params.default_offset.theta = x[0];
    double sum = 0.0;
    for (const auto& tr : data) sum += heading_rmse(rollout_predict(params, tr.robot, tr.human.front()), tr.human);
    return sum / static_cast<double>(data.size());
  };
  const Box box{{-kPi}, {kPi}};
  SimplexOptions so{opts.tolerance, opts.max_evaluations, 0.05};
  double best_x = 0.0, best_v = std::numeric_limits<double>::infinity();
  for (double start : {mean_first_offset(data).theta, 0.0}) {
    const auto r = nelder_mead(objective, {start}, box, so);
    iterations += r.iterations;
    if (r.value < best_v) {
      best_v = r.value;
      best_x = r.x[0];
    }
  }
  return best_x;
}

}  // namespace

FitReport fit(ModelKind kind, std::span<const DyadTrajectory> data, const FitOptions& opts) {
  check_data(data);
  if (opts.starts < 1) throw std::invalid_argument("fit: need at least one start");

  const auto param = parameterization(kind, data);
  auto objective = [&](const std::vector<double>& x) { return mean_rollout_rmse(param.decode(x), data); };

  FitReport report;
  report.kind = kind;
  Rng rng(derive_seed(opts.seed, 0xF17));
  const SimplexOptions so{opts.tolerance, opts.max_evaluations, 0.1};
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < opts.starts; ++s) {
    std::vector<double> x0 = param.heuristic;
    if (s > 0)
      for (std::size_t i = 0; i < x0.size(); ++i) x0[i] = rng.uniform(param.box.lo[i], param.box.hi[i]);
    const auto r = nelder_mead(objective, x0, param.box, so);
    report.starts.push_back({x0, r.x, r.value, r.iterations});
    report.iterations += r.iterations;
    // Strict comparison keeps the lowest start index on ties.
    if (r.value < best) {
      best = r.value;
      report.best_start = s;
    }
  }

  InteractionModel model = param.decode(report.starts[static_cast<std::size_t>(report.best_start)].best_point);
  if (auto* dh = std::get_if<DelayedHarnessParams>(&model))
    dh->default_offset.theta = fit_heading_offset(*dh, data, opts, report.iterations);

  report.params = model;
  for (const auto& tr : data)
    report.per_trajectory_rmse_mm.push_back(
        trajectory_rmse(rollout_predict(model, tr.robot, tr.human.front()), tr.human));
  report.train_rmse_mm = mean_rollout_rmse(model, data);
  return report;
}

}  // namespace dyad
