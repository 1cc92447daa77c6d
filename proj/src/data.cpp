#include "dyad/data.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "dyad/rng.hpp"
#include "dyad/world.hpp"
#include "json.hpp"

namespace dyad {

namespace {

Segment fwd(double m) { return {SegmentKind::Forward, m, 0.0, 0.0}; }
Segment turn(double deg) { return {SegmentKind::InPlaceTurn, 0.0, deg, 0.0}; }
Segment arc(double deg, double r) { return {SegmentKind::GradualTurn, 0.0, deg, r}; }

// Unqualified turns in the table are treated as in-place; only row 3 names
// a gradual turn.
const std::vector<ScriptedTrajectory>& table() {
  static const std::vector<ScriptedTrajectory> rows = {
      {1, {fwd(2.5), turn(90)}},
      {2, {fwd(1.2), turn(90)}},
      {3, {fwd(0.75), arc(45, kGradualTurnRadius), turn(-135)}},
      {4, {fwd(0.5), turn(-90), fwd(0.5), turn(90), fwd(0.5)}},
      {5, {fwd(0.6), turn(-90), fwd(0.6), turn(180), fwd(0.6), turn(-90), fwd(0.6)}},
  };
  return rows;
}

}  // namespace

const ScriptedTrajectory& scripted(int id) {
  for (const auto& row : table())
    if (row.id == id) return row;
  throw std::invalid_argument("unknown scripted trajectory id " + std::to_string(id) + " (expected 1..5)");
}

std::vector<Pose2> discretize(const ScriptedTrajectory& traj, double step_length, double turn_step_deg) {
  if (!(step_length > 0.0) || !(turn_step_deg > 0.0)) throw std::invalid_argument("step sizes must be positive");
  std::vector<Pose2> poses{Pose2::identity()};
  for (const auto& seg : traj.segments) {
    const Pose2 start = poses.back();
    switch (seg.kind) {
      case SegmentKind::Forward: {
        const int n = std::max(1, static_cast<int>(std::ceil(seg.meters / step_length - 1e-9)));
        for (int k = 1; k <= n; ++k) poses.push_back(compose(start, {seg.meters * k / n, 0.0, 0.0}));
        break;
      }
      case SegmentKind::InPlaceTurn: {
        const int n = std::max(1, static_cast<int>(std::ceil(std::abs(seg.degrees) / turn_step_deg - 1e-9)));
        for (int k = 1; k <= n; ++k) poses.push_back(compose(start, {0.0, 0.0, deg2rad(seg.degrees) * k / n}));
        break;
      }
      case SegmentKind::GradualTurn: {
        const double sweep = deg2rad(seg.degrees);
        const double length = std::abs(sweep) * seg.radius;
        const int n = std::max(1, static_cast<int>(std::ceil(length / step_length - 1e-9)));
        const double side = sweep >= 0.0 ? 1.0 : -1.0;
        for (int k = 1; k <= n; ++k) {
          const double phi = sweep * k / n;
          // Arc around a center `radius` to the turning side.
          const Pose2 local{seg.radius * std::sin(std::abs(phi)), side * seg.radius * (1.0 - std::cos(phi)), phi};
          poses.push_back(compose(start, local));
        }
        break;
      }
    }
  }
  return poses;
}

std::vector<Pose2> script_trajectory(int id, double step_length, double turn_step_deg) {
  return discretize(scripted(id), step_length, turn_step_deg);
}

double path_length(const ScriptedTrajectory& traj) {
  double total = 0.0;
  for (const auto& seg : traj.segments) {
    if (seg.kind == SegmentKind::Forward) total += seg.meters;
    if (seg.kind == SegmentKind::GradualTurn) total += std::abs(deg2rad(seg.degrees)) * seg.radius;
  }
  return total;
}

DyadTrajectory synthesize_dyad(const SubjectProfile& profile, std::span<const Pose2> robot_traj, std::uint64_t seed,
                               double dt) {
  validate(profile.params);
  if (robot_traj.empty()) throw std::invalid_argument("synthesize_dyad: empty robot trajectory");
  DyadTrajectory out;
  const Pose2 human_0 = compose(robot_traj.front(), profile.params.default_offset);
  out.human = rollout_predict(profile.params, robot_traj, human_0);
  out.robot.assign(robot_traj.begin(), robot_traj.end());
  out.t.resize(robot_traj.size());
  for (std::size_t i = 0; i < out.t.size(); ++i) out.t[i] = dt * static_cast<double>(i);
  if (profile.noise_sigma > 0.0) {
    Rng rng(seed);
    for (auto& h : out.human) {
      h.x += rng.normal(0.0, profile.noise_sigma);
      h.y += rng.normal(0.0, profile.noise_sigma);
    }
  }
  return out;
}

namespace {

Pose2 pose_from(const nlohmann::json& j, const char* key, int line) {
  if (!j.contains(key)) throw ParseError(std::string("missing \"") + key + "\"", line, 0);
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw ParseError(std::string("\"") + key + "\" must be [x, y, theta]", line, 0);
  for (const auto& v : a)
    if (!v.is_number()) throw ParseError(std::string("\"") + key + "\" must contain numbers", line, 0);
  Pose2 p{a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.theta))
    throw ParseError(std::string("non-finite pose in \"") + key + "\"", line, 0);
  p.theta = wrap_angle(p.theta);
  return p;
}

}  // namespace

std::vector<DyadTrajectory> read_trajectories(std::istream& in) {
  std::vector<DyadTrajectory> out;
  std::string line;
  int line_no = 0;
  nlohmann::json current_key;
  bool have_key = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError("malformed trajectory record", line_no, static_cast<int>(e.byte));
    }
    if (!j.is_object()) throw ParseError("trajectory record must be a JSON object", line_no, 1);
    if (!j.contains("t") || !j.at("t").is_number()) throw ParseError("missing numeric \"t\"", line_no, 0);
    const double t = j.at("t").get<double>();
    const nlohmann::json key = j.value("traj", nlohmann::json());
    if (out.empty() || !have_key || key != current_key) {
      out.emplace_back();
      current_key = key;
      have_key = true;
    }
    auto& tr = out.back();
    if (!tr.t.empty() && !(t > tr.t.back()))
      throw ParseError("non-monotone timestamp t=" + std::to_string(t), line_no, 0);
    tr.t.push_back(t);
    tr.robot.push_back(pose_from(j, "robot", line_no));
    tr.human.push_back(pose_from(j, "human", line_no));
  }
  return out;
}

std::vector<DyadTrajectory> load_trajectories(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectory file: " + path);
  return read_trajectories(in);
}

void write_trajectory(std::ostream& out, const DyadTrajectory& traj, int traj_index) {
  for (std::size_t i = 0; i < traj.size(); ++i) {
    nlohmann::ordered_json j;
    if (traj_index >= 0) j["traj"] = traj_index;
    j["t"] = traj.t[i];
    j["robot"] = {traj.robot[i].x, traj.robot[i].y, traj.robot[i].theta};
    j["human"] = {traj.human[i].x, traj.human[i].y, traj.human[i].theta};
    out << j.dump() << '\n';
  }
}

void save_trajectories(const std::string& path, std::span<const DyadTrajectory> trajs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory file: " + path);
  const bool tagged = trajs.size() > 1;
  for (std::size_t k = 0; k < trajs.size(); ++k) write_trajectory(out, trajs[k], tagged ? static_cast<int>(k) : -1);
}

std::vector<SubjectProfile> load_profiles(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open profile file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid profile JSON: ") + e.what(), 0, 0);
  }
  std::vector<SubjectProfile> out;
  for (const auto& p : j.is_array() ? j : j.at("profiles")) {
    SubjectProfile prof;
    prof.id = p.at("id").get<std::string>();
    const auto o = p.at("offset").get<std::vector<double>>();
    if (o.size() != 3) throw ParseError("profile offset must be [dx, dy, dtheta]", 0, 0);
    prof.params.default_offset = {o[0], o[1], wrap_angle(o[2])};
    prof.params.alpha = p.at("alpha").get<double>();
    prof.noise_sigma = p.value("noise_sigma", 0.0);
    validate(prof.params);
    out.push_back(std::move(prof));
  }
  return out;
}

namespace {

nlohmann::json pose_array(const Pose2& p) { return nlohmann::json::array({p.x, p.y, p.theta}); }

Pose2 pose_from(const nlohmann::json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument(std::string(what) + " must be [x, y, theta]");
  return {j[0].get<double>(), j[1].get<double>(), wrap_angle(j[2].get<double>())};
}

}  // namespace

nlohmann::ordered_json to_json(const InteractionModel& model) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(model_kind_name(kind_of(model)));
  if (const auto* f = std::get_if<FixedHarnessParams>(&model)) {
    j["d"] = f->d;
  } else if (const auto* d = std::get_if<DelayedHarnessParams>(&model)) {
    j["offset"] = pose_array(d->default_offset);
    j["alpha"] = d->alpha;
  } else {
    const auto& r = std::get<RotatingRodParams>(model);
    j["rod_length"] = r.rod_length;
    j["attach"] = pose_array(r.attach_offset);
  }
  return j;
}

InteractionModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("model must be an object");
  InteractionModel m;
  try {
    switch (parse_model_kind(j.value("kind", std::string("delayed")))) {
      case ModelKind::Fixed: {
        FixedHarnessParams p;
        p.d = j.value("d", p.d);
        m = p;
        break;
      }
      case ModelKind::Delayed: {
        DelayedHarnessParams p;
        if (j.contains("offset")) p.default_offset = pose_from(j["offset"], "offset");
        p.alpha = j.value("alpha", p.alpha);
        m = p;
        break;
      }
      case ModelKind::RotatingRod: {
        RotatingRodParams p;
        p.rod_length = j.value("rod_length", p.rod_length);
        if (j.contains("attach")) p.attach_offset = pose_from(j["attach"], "attach");
        m = p;
        break;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("invalid model: ") + e.what());
  }
  validate(m);
  return m;
}

std::vector<SubjectProfile> default_profiles() {
  return {
      {"p1", {{-0.70, -0.30, 0.0}, 0.8}, 0.02},
      {"p2", {{-0.60, 0.25, 0.10}, 0.5}, 0.02},
      {"p3", {{-0.85, -0.10, -0.10}, 0.3}, 0.02},
  };
}

void split_train_val(std::span<const DyadTrajectory> all, std::vector<DyadTrajectory>& train,
                     std::vector<DyadTrajectory>& val) {
  train.clear();
  val.clear();
  for (std::size_t i = 0; i < all.size(); ++i) (i % 3 == 2 ? val : train).push_back(all[i]);
}

std::vector<ModelComparisonRow> compare_models(const std::vector<std::vector<DyadTrajectory>>& subjects,
                                               const FitOptions& opts) {
  if (subjects.empty()) throw std::invalid_argument("no subjects");
  const std::size_t n = subjects.size();
  std::vector<std::vector<DyadTrajectory>> train(n), val(n);
  std::vector<DyadTrajectory> pooled;
  for (std::size_t s = 0; s < n; ++s) {
    if (subjects[s].size() < 3)
      throw std::invalid_argument("subject " + std::to_string(s) + " needs at least 3 trajectories");
    split_train_val(subjects[s], train[s], val[s]);
    pooled.insert(pooled.end(), train[s].begin(), train[s].end());
  }

  std::vector<ModelComparisonRow> rows;
  auto per_subject = [&](const std::string& name, auto&& fit_one) {
    ModelComparisonRow r{name, 0.0, 0.0};
    for (std::size_t s = 0; s < n; ++s) {
      const InteractionModel m = fit_one(s);
      r.train_rmse_mm += mean_rollout_rmse(m, train[s]);
      r.val_rmse_mm += mean_rollout_rmse(m, val[s]);
    }
    r.train_rmse_mm /= static_cast<double>(n);
    r.val_rmse_mm /= static_cast<double>(n);
    rows.push_back(r);
  };
  per_subject("fixed_unopt", [&](std::size_t s) { return InteractionModel(unoptimized_fixed(train[s])); });
  per_subject("fixed_opt_ind", [&](std::size_t s) { return fit(ModelKind::Fixed, train[s], opts).params; });
  const InteractionModel all = fit(ModelKind::Delayed, pooled, opts).params;
  per_subject("dh_opt_all", [&](std::size_t) { return all; });
  per_subject("dh_opt_ind", [&](std::size_t s) { return fit(ModelKind::Delayed, train[s], opts).params; });
  per_subject("rr_opt_ind", [&](std::size_t s) { return fit(ModelKind::RotatingRod, train[s], opts).params; });
  return rows;
}

}  // namespace dyad
