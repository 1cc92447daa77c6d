#include "dyad/wayfind.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace dyad {

std::string_view cue_name(CueKind kind) {
  switch (kind) {
    case CueKind::Forward: return "forward";
    case CueKind::Left: return "left";
    case CueKind::Right: return "right";
    case CueKind::Stop: return "stop";
  }
  return "forward";
}

CueKind parse_cue(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "forward") return CueKind::Forward;
  if (s == "left") return CueKind::Left;
  if (s == "right") return CueKind::Right;
  if (s == "stop") return CueKind::Stop;
  throw std::invalid_argument("unknown cue \"" + std::string(name) + "\"");
}

double cue_target_offset(CueKind kind) {
  switch (kind) {
    case CueKind::Left: return kPi / 2.0;
    case CueKind::Right: return -kPi / 2.0;
    default: return 0.0;
  }
}

std::string_view action_name(Action a) {
  static constexpr std::string_view names[kNamedActions] = {
      "stop", "forward", "turn_left_10", "turn_right_10", "sidestep_left", "sidestep_right", "diagonal_front_left",
      "diagonal_front_right"};
  return names[static_cast<int>(a)];
}

ActionCatalog ActionCatalog::standard(double step_length, double turn_deg) {
  const double turn = deg2rad(turn_deg);
  const double diag = step_length * std::sqrt(0.5);
  ActionCatalog c;
  const Pose2 disp[kNamedActions] = {
      {0.0, 0.0, 0.0},          {step_length, 0.0, 0.0}, {0.0, 0.0, turn},   {0.0, 0.0, -turn},
      {0.0, step_length, 0.0},  {0.0, -step_length, 0.0}, {diag, diag, 0.0}, {diag, -diag, 0.0},
  };
  for (int i = 0; i < kNamedActions; ++i) c.specs_.push_back({std::string(action_name(Action(i))), disp[i]});
  return c;
}

ActionCatalog& ActionCatalog::add(std::string name, const Pose2& displacement) {
  if (size() >= kMaxActions) throw std::invalid_argument("action catalog full: only two extra slots are reserved");
  for (const auto& s : specs_)
    if (s.name == name) throw std::invalid_argument("duplicate action name \"" + name + "\"");
  specs_.push_back({std::move(name), {displacement.x, displacement.y, wrap_angle(displacement.theta)}});
  return *this;
}

int ActionCatalog::index_of(std::string_view name) const {
  for (int i = 0; i < size(); ++i)
    if (specs_[static_cast<std::size_t>(i)].name == name) return i;
  throw std::invalid_argument("unknown action \"" + std::string(name) + "\"");
}

double heading_error_term(double theta_bar, double theta, double b) {
  return std::max(std::abs(wrap_angle(theta_bar - theta)) - b, 0.0);
}

double compute_reward(const Vec2& start, const Pose2& human_prev, const Pose2& human_cur, double theta_bar,
                      bool collided, const RewardParams& p) {
  const double d_prev = distance(human_prev.translation(), start);
  const double d_cur = distance(human_cur.translation(), start);
  const double e_prev = heading_error_term(theta_bar, human_prev.theta, p.b);
  const double e_cur = heading_error_term(theta_bar, human_cur.theta, p.b);
  return (d_cur - d_prev) - p.a * (e_cur - e_prev) - (collided ? p.c_collide : 0.0) - p.lambda;
}

std::vector<Cue> effective_schedule(const std::vector<Cue>& cues, const ErrorInjection& errors, int max_steps) {
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  std::vector<Cue> out;
  for (const auto& c : cues) {
    if (c.issued_at < 0) throw std::invalid_argument("cue step must be >= 0");
    Cue e = c;
    if (c.issued_at > 0) e.issued_at = std::clamp(c.issued_at + errors.timing_error, 1, std::max(1, max_steps - 1));
    out.push_back(e);
  }
  std::stable_sort(out.begin(), out.end(), [](const Cue& x, const Cue& y) { return x.issued_at < y.issued_at; });
  std::vector<Cue> dedup;
  for (const auto& c : out) {
    if (!dedup.empty() && dedup.back().issued_at == c.issued_at)
      dedup.back() = c;
    else
      dedup.push_back(c);
  }
  if (dedup.empty() || dedup.front().issued_at != 0) dedup.insert(dedup.begin(), Cue{CueKind::Forward, 0});
  return dedup;
}

WayfindEnv::WayfindEnv(EnvConfig cfg) : cfg_(std::move(cfg)), catalog_(ActionCatalog::standard(cfg_.step_length, cfg_.turn_deg)) {
  if (!cfg_.world) throw std::invalid_argument("environment needs a world");
  if (cfg_.max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (!(cfg_.robot_radius > 0.0) || !(cfg_.human_radius > 0.0)) throw std::invalid_argument("radii must be positive");
  const auto& r = cfg_.reward;
  if (r.a < 0 || r.b < 0 || r.c_collide < 0 || r.lambda < 0) throw std::invalid_argument("reward weights must be >= 0");
  if (std::abs(cfg_.errors.orientation_error) > kPi / 2.0 + 1e-12)
    throw std::invalid_argument("|orientation_error| must be <= pi/2");
  validate(cfg_.model);
  for (const auto& a : cfg_.extra_actions) catalog_.add(a.name, a.displacement);
}

bool WayfindEnv::collision_free(const DyadState& s) const {
  return !cfg_.world->circle_collides(s.robot.translation(), cfg_.robot_radius) &&
         !cfg_.world->circle_collides(s.human.translation(), cfg_.human_radius);
}

Observation WayfindEnv::reset() {
  const DyadState s0 = initial_state(cfg_.model, cfg_.start);
  if (!collision_free(s0)) throw std::invalid_argument("invalid start");
  state_ = s0;
  human_start_ = s0.human.translation();
  schedule_ = effective_schedule(cfg_.cues, cfg_.errors, cfg_.max_steps);
  step_ = 0;
  done_ = false;
  started_ = true;
  active_cue_step_ = -1;
  collisions_ = 0;
  total_reward_ = 0.0;
  trace_.clear();
  activate_cues();
  return observe();
}

void WayfindEnv::activate_cues() {
  const Cue* latest = nullptr;
  for (const auto& c : schedule_)
    if (c.issued_at <= step_ && c.issued_at > active_cue_step_) latest = &c;
  if (!latest) return;
  active_cue_ = latest->kind;
  active_cue_step_ = latest->issued_at;
  theta_bar_ = wrap_angle(state_.human.theta + cue_target_offset(latest->kind) + cfg_.errors.orientation_error);
}

void WayfindEnv::issue_cue(CueKind kind, int at_step) {
  if (!started_) throw std::logic_error("issue_cue before reset");
  if (at_step < step_) throw std::invalid_argument("cannot schedule a cue in the past");
  auto it = std::find_if(schedule_.begin(), schedule_.end(), [&](const Cue& c) { return c.issued_at >= at_step; });
  if (it != schedule_.end() && it->issued_at == at_step)
    it->kind = kind;
  else
    schedule_.insert(it, Cue{kind, at_step});
  if (at_step == step_) {
    active_cue_step_ = std::min(active_cue_step_, at_step - 1);
    activate_cues();
  }
}

Observation WayfindEnv::observe() const {
  if (!started_) throw std::logic_error("observe before reset");
  Observation o;
  o.step = step_;
  o.scan = lidar_scan(*cfg_.world, state_.robot, cfg_.lidar, cfg_.noise ? &*cfg_.noise : nullptr,
                      static_cast<std::uint64_t>(step_));
  o.lidar.reserve(o.scan.ranges.size());
  for (double r : o.scan.ranges) o.lidar.push_back(r / o.scan.max_range);
  o.rel_from_start = relative(cfg_.start, state_.robot);
  o.cue_onehot[static_cast<int>(active_cue_)] = 1.0;
  return o;
}

StepResult WayfindEnv::step(int action) {
  if (!started_) throw std::logic_error("step before reset");
  if (done_) throw std::logic_error("step after episode end");
  if (action < 0 || action >= catalog_.size()) throw std::out_of_range("action index out of range");

  const Pose2 robot_next = compose(state_.robot, catalog_[action].displacement);
  const DyadState next = step_model(cfg_.model, state_, robot_next);

  StepInfo info;
  info.collided_robot = cfg_.world->circle_collides(next.robot.translation(), cfg_.robot_radius);
  info.collided_human = cfg_.world->circle_collides(next.human.translation(), cfg_.human_radius);
  const bool collided = info.collided_robot || info.collided_human;
  const DyadState prev = state_;
  if (!collided) state_ = next;

  const double reward = compute_reward(human_start_, prev.human, state_.human, theta_bar_, collided, cfg_.reward);
  info.cue = active_cue_;
  info.d_t = distance(state_.human.translation(), human_start_);
  info.theta_err = wrap_angle(theta_bar_ - state_.human.theta);

  TraceRecord rec;
  rec.step = step_;
  rec.action = action;
  rec.robot = state_.robot;
  rec.human = state_.human;
  rec.reward = reward;
  rec.collided = collided;
  rec.collided_human = info.collided_human;
  rec.collided_robot = info.collided_robot;
  rec.cue = active_cue_;
  rec.theta_bar = theta_bar_;
  trace_.push_back(rec);

  if (collided) ++collisions_;
  total_reward_ += reward;
  const bool stopped = active_cue_ == CueKind::Stop && action == catalog_.stop_index();
  ++step_;
  done_ = stopped || step_ >= cfg_.max_steps;
  if (!done_) activate_cues();

  StepResult res;
  res.obs = observe();
  res.reward = reward;
  res.done = done_;
  res.info = info;
  return res;
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& trace, const ActionCatalog& catalog) {
  for (const auto& r : trace) {
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["action"] = catalog[r.action].name;
    j["robot"] = {r.robot.x, r.robot.y, r.robot.theta};
    j["human"] = {r.human.x, r.human.y, r.human.theta};
    j["reward"] = r.reward;
    j["collided"] = r.collided;
    j["collided_human"] = r.collided_human;
    j["collided_robot"] = r.collided_robot;
    j["cue"] = cue_name(r.cue);
    j["theta_bar"] = r.theta_bar;
    out << j.dump() << '\n';
  }
}

}  // namespace dyad
