#include "dyad/session.hpp"

#include <chrono>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dyad/data.hpp"
#include "dyad/rng.hpp"

namespace dyad {

namespace {

using ojson = nlohmann::ordered_json;

ojson pose_json(const Pose2& p) { return ojson::array({p.x, p.y, p.theta}); }

const std::set<std::string> kConfigKeys = {"scenario", "world", "start", "model", "beta", "margin", "fallback",
                                           "noise", "lidar_sigma", "seed", "tick_ms", "max_steps"};

Scenario junction_scenario() {
  const JunctionLayout l = early_turn_layout();
  Scenario sc;
  sc.name = "junction";
  sc.world = std::make_shared<const OccupancyWorld>(junction_world(l));
  sc.start = {1.5, corridor_center_y(l), 0.0};
  sc.max_steps = 400;
  return sc;
}

}  // namespace

SessionConfig session_config_from_json(const nlohmann::json& j, const SessionConfig& defaults) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!kConfigKeys.count(key)) throw std::invalid_argument("unknown config key: " + key);
  SessionConfig c = defaults;
  try {
    if (j.contains("scenario")) c.scenario = j["scenario"].get<std::string>();
    if (j.contains("world")) {
      if (j["world"].is_null())
        c.world.reset();
      else
        c.world = j["world"].get<std::string>();
    }
    if (j.contains("start")) {
      const auto s = j["start"].get<std::vector<double>>();
      if (s.size() != 3) throw std::invalid_argument("start must be [x, y, theta]");
      c.start = Pose2{s[0], s[1], wrap_angle(s[2])};
    }
    if (j.contains("model")) c.model = model_from_json(j["model"]);
    if (j.contains("beta")) c.shield.beta = j["beta"].get<double>();
    if (j.contains("margin")) c.shield.margin = j["margin"].get<double>();
    if (j.contains("fallback")) c.shield.fallback = parse_fallback(j["fallback"].get<std::string>());
    if (j.contains("noise")) c.noise = j["noise"].get<bool>();
    if (j.contains("lidar_sigma")) c.lidar_sigma = j["lidar_sigma"].get<double>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("tick_ms")) c.tick_ms = j["tick_ms"].get<int>();
    if (j.contains("max_steps")) c.max_steps = j["max_steps"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("invalid config: ") + e.what());
  }
  validate(c.shield);
  if (c.tick_ms < 0) throw std::invalid_argument("tick_ms must be >= 0");
  if (c.max_steps && *c.max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (!(c.lidar_sigma >= 0.0)) throw std::invalid_argument("lidar_sigma must be >= 0");
  return c;
}

ojson to_json(const SessionConfig& c) {
  ojson j;
  j["scenario"] = c.scenario;
  j["world"] = c.world ? ojson(*c.world) : ojson(nullptr);
  j["start"] = c.start ? pose_json(*c.start) : ojson(nullptr);
  j["model"] = to_json(c.model);
  j["beta"] = c.shield.beta;
  j["margin"] = c.shield.margin;
  j["fallback"] = std::string(fallback_name(c.shield.fallback));
  j["noise"] = c.noise;
  j["lidar_sigma"] = c.lidar_sigma;
  j["seed"] = c.seed;
  j["tick_ms"] = c.tick_ms;
  j["max_steps"] = c.max_steps ? ojson(*c.max_steps) : ojson(nullptr);
  return j;
}

EnvConfig session_env_config(const SessionConfig& c) {
  Scenario sc;
  if (c.world) {
    sc.name = "world";
    sc.world = std::make_shared<const OccupancyWorld>(load_world(*c.world));
    if (c.start)
      sc.start = *c.start;
    else if (sc.world->start_marker())
      sc.start = {sc.world->start_marker()->x, sc.world->start_marker()->y, 0.0};
    else
      throw std::invalid_argument("world has no start marker; pass \"start\"");
    sc.max_steps = 400;
  } else {
    sc = c.scenario == "junction" ? junction_scenario() : load_suite(c.scenario).at(0);
    if (c.start) sc.start = *c.start;
  }
  if (c.max_steps) sc.max_steps = *c.max_steps;
  EpisodeSetup setup;
  setup.jitter = false;
  if (c.noise) setup.noise = SensorNoise{c.lidar_sigma, 0};
  return make_env_config(sc, c.model, setup, c.seed);
}

Session::Session(std::string id, SessionConfig cfg) : id_(std::move(id)), cfg_(std::move(cfg)) { restart(); }

void Session::restart() {
  auto env = std::make_unique<WayfindEnv>(session_env_config(cfg_));
  Observation obs = env->reset();
  env_ = std::move(env);
  obs_ = std::move(obs);
  policy_ = GreedyPolicy();
  policy_.begin_episode(cfg_.seed);
  last_reward_ = 0.0;
  last_collided_ = false;
  last_action_ = -1;
  terminal_sent_ = false;
  queued_.clear();
  cue_log_.clear();
  ++episode_;
  plan();
}

void Session::plan() {
  if (env_->done()) return;
  unplanned_ = policy_;
  planned_action_ = policy_.act(*env_, obs_, cfg_.shield, &report_);
}

void Session::issue(CueKind kind) {
  const int at = env_->step_index() + 1;
  env_->issue_cue(kind, at);
  cue_log_.push_back({at, kind});
}

ojson Session::reply(const std::string& type, const std::string& what) const {
  ojson m;
  m["type"] = type;
  m["step"] = env_->step_index();
  m[type == "error" ? "message" : "for"] = what;
  return m;
}

ojson Session::handle(const nlohmann::json& msg, std::vector<ojson>& outbox) {
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
    return reply("error", "message must be an object with a string \"type\"");
  const std::string type = msg["type"].get<std::string>();
  if (type == "cue") {
    if (!msg.contains("value") || !msg["value"].is_string()) return reply("error", "cue needs a string \"value\"");
    CueKind kind;
    try {
      kind = parse_cue(msg["value"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      return reply("error", e.what());
    }
    if (terminal_sent_ || env_->done()) return reply("error", "episode finished");
    ojson ack = reply("ack", "cue");
    ack["cue"] = std::string(cue_name(kind));
    if (paused_) {
      queued_.push_back(kind);
      ack["queued"] = true;
    } else {
      issue(kind);
      ack["effective_step"] = env_->step_index() + 1;
    }
    return ack;
  }
  if (type == "pause") {
    paused_ = true;
    return reply("ack", "pause");
  }
  if (type == "resume") {
    paused_ = false;
    if (!env_->done())
      for (CueKind k : queued_) issue(k);
    queued_.clear();
    return reply("ack", "resume");
  }
  if (type == "reset") {
    restart();
    outbox.push_back(state_message());
    return reply("ack", "reset");
  }
  if (type == "tick") {
    if (paused_) return reply("error", "session is paused");
    for (auto& m : tick()) outbox.push_back(std::move(m));
    return reply("ack", "tick");
  }
  if (type == "config") {
    nlohmann::json patch = msg;
    patch.erase("type");
    SessionConfig next;
    try {
      next = session_config_from_json(patch, cfg_);
    } catch (const std::exception& e) {
      return reply("error", e.what());
    }
    const bool rebuild = patch.contains("scenario") || patch.contains("world") || patch.contains("start") ||
                         patch.contains("model") || patch.contains("noise") || patch.contains("lidar_sigma") ||
                         patch.contains("seed") || patch.contains("max_steps");
    const SessionConfig prev = cfg_;
    cfg_ = next;
    if (rebuild) {
      try {
        restart();
      } catch (const std::exception& e) {
        cfg_ = prev;
        return reply("error", e.what());
      }
    } else if (!env_->done()) {
      policy_ = unplanned_;  // re-decide the current step as if for the first time
      plan();
    }
    outbox.push_back(state_message());
    ojson ack = reply("ack", "config");
    ack["restarted"] = rebuild;
    ack["config"] = to_json(cfg_);
    return ack;
  }
  return reply("error", "unknown message type: " + type);
}

std::vector<ojson> Session::tick() {
  std::vector<ojson> out;
  if (paused_ || terminal_sent_) return out;
  if (!env_->done()) {
    const StepResult r = env_->step(planned_action_);
    obs_ = r.obs;
    last_reward_ = r.reward;
    last_collided_ = r.info.collided_human || r.info.collided_robot;
    last_action_ = planned_action_;
    plan();
    out.push_back(state_message());
  }
  if (env_->done()) {
    out.push_back(terminal_message());
    terminal_sent_ = true;
  }
  return out;
}

ojson Session::state_message() const {
  const DyadState& s = env_->state();
  ojson m;
  m["type"] = "state";
  m["step"] = env_->step_index();
  m["episode"] = episode_;
  m["robot"] = pose_json(s.robot);
  m["human"] = pose_json(s.human);
  m["lidar"] = obs_.scan.ranges;
  if (env_->done()) {
    m["shield"] = nullptr;
  } else {
    ojson sh = to_json(report_, env_->catalog());
    sh.erase("thresholds");
    sh["planned_action"] = env_->catalog()[planned_action_].name;
    m["shield"] = std::move(sh);
  }
  m["reward"] = last_reward_;
  m["cue"] = std::string(cue_name(env_->active_cue()));
  m["theta_bar"] = env_->theta_bar();
  m["collided"] = last_collided_;
  m["action"] = last_action_ < 0 ? ojson(nullptr) : ojson(env_->catalog()[last_action_].name);
  m["paused"] = paused_;
  m["done"] = env_->done();
  return m;
}

ojson Session::terminal_message() const {
  ojson m;
  m["type"] = "terminal";
  m["step"] = env_->step_index();
  m["episode"] = episode_;
  ojson summary;
  summary["steps"] = env_->step_index();
  summary["collisions"] = env_->collisions();
  summary["collision_free"] = env_->collisions() == 0;
  summary["total_reward"] = env_->total_reward();
  summary["final_cue"] = std::string(cue_name(env_->active_cue()));
  m["summary"] = std::move(summary);
  return m;
}

std::vector<TraceRecord> replay_session(const SessionConfig& cfg, const std::vector<CueEvent>& cues, int ticks) {
  WayfindEnv env(session_env_config(cfg));
  GreedyPolicy policy;
  policy.begin_episode(cfg.seed);
  Observation obs = env.reset();
  for (const CueEvent& c : cues) env.issue_cue(c.cue, c.step);
  for (int i = 0; i < ticks && !env.done(); ++i) obs = env.step(policy.act(env, obs, cfg.shield)).obs;
  return env.trace();
}

SessionManager::~SessionManager() {
  for (const auto& id : ids()) close(id);
}

void SessionManager::publish(Slot& slot, const ojson& m) {
  slot.log.push_back(m.dump());
  slot.cv.notify_all();
}

SessionManager::Opened SessionManager::open(const SessionConfig& cfg) {
  auto slot = std::make_shared<Slot>();
  std::string id;
  {
    std::lock_guard<std::mutex> lk(mu_);
    id = "s" + std::to_string(next_id_);
    slot->session = std::make_unique<Session>(id, cfg);  // throws before the id is consumed
    ++next_id_;
  }
  Opened o{id, slot->session->state_message()};
  publish(*slot, o.state);
  Slot* raw = slot.get();
  slot->ticker = std::thread([raw] {
    std::unique_lock<std::mutex> lk(raw->mu);
    while (!raw->stopping) {
      const int ms = raw->session->config().tick_ms;
      if (raw->cv.wait_for(lk, std::chrono::milliseconds(ms > 0 ? ms : 50), [raw] { return raw->stopping; })) break;
      if (ms <= 0) continue;
      for (const auto& m : raw->session->tick()) publish(*raw, m);
    }
  });
  std::lock_guard<std::mutex> lk(mu_);
  slots_[id] = slot;
  return o;
}

bool SessionManager::close(const std::string& id) {
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = slots_.find(id);
    if (it == slots_.end()) return false;
    slot = it->second;
    slots_.erase(it);
  }
  {
    std::lock_guard<std::mutex> lk(slot->mu);
    slot->stopping = true;
  }
  slot->cv.notify_all();
  if (slot->ticker.joinable()) slot->ticker.join();
  return true;
}

std::shared_ptr<SessionManager::Slot> SessionManager::find(const std::string& id) const {
  std::lock_guard<std::mutex> lk(mu_);
  auto it = slots_.find(id);
  return it == slots_.end() ? nullptr : it->second;
}

bool SessionManager::exists(const std::string& id) const { return find(id) != nullptr; }

std::vector<std::string> SessionManager::ids() const {
  std::lock_guard<std::mutex> lk(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : slots_) out.push_back(id);
  return out;
}

std::optional<ojson> SessionManager::send(const std::string& id, const nlohmann::json& msg) {
  auto slot = find(id);
  if (!slot) return std::nullopt;
  std::lock_guard<std::mutex> lk(slot->mu);
  std::vector<ojson> outbox;
  ojson r = slot->session->handle(msg, outbox);
  for (const auto& m : outbox) publish(*slot, m);
  return r;
}

std::optional<ojson> SessionManager::latest(const std::string& id) const {
  auto slot = find(id);
  if (!slot) return std::nullopt;
  std::lock_guard<std::mutex> lk(slot->mu);
  return slot->session->state_message();
}

std::optional<std::string> SessionManager::trace_jsonl(const std::string& id) const {
  auto slot = find(id);
  if (!slot) return std::nullopt;
  std::lock_guard<std::mutex> lk(slot->mu);
  std::ostringstream out;
  write_trace(out, slot->session->env().trace(), slot->session->env().catalog());
  return out.str();
}

std::optional<std::vector<std::string>> SessionManager::events(const std::string& id, std::size_t from,
                                                                int wait_ms) {
  auto slot = find(id);
  if (!slot) return std::nullopt;
  std::unique_lock<std::mutex> lk(slot->mu);
  if (wait_ms > 0)
    slot->cv.wait_for(lk, std::chrono::milliseconds(wait_ms),
                      [&] { return slot->log.size() > from || slot->stopping; });
  std::vector<std::string> out;
  for (std::size_t i = from; i < slot->log.size(); ++i) out.push_back(slot->log[i]);
  return out;
}

}  // namespace dyad
