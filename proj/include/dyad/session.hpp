#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dyad/policy.hpp"
#include "dyad/scenarios.hpp"
#include "json.hpp"

namespace dyad {

struct SessionConfig {
  /// "junction" (a T-junction with no scripted cues), a suite name
  /// ("single", "orientation_error", ...; its first scenario is used) or a scenario
  /// file. Ignored when `world` is set.
  std::string scenario = "junction";
  /// World file (ASCII or JSON). Overrides the scenario's world; the start
  /// comes from `start` or the map's 'S' marker.
  std::optional<std::string> world;
  std::optional<Pose2> start;
  InteractionModel model = DelayedHarnessParams{};
  ShieldConfig shield;
  bool noise = false;
  double lidar_sigma = 0.05;
  std::uint64_t seed = 0;
  int tick_ms = 100;  // 0: advance only on explicit "tick" messages
  std::optional<int> max_steps;  // default: the scenario's, 400 for worlds and "junction"
};

/// Throws std::invalid_argument on unknown keys or bad values.
SessionConfig session_config_from_json(const nlohmann::json& j, const SessionConfig& defaults = {});
nlohmann::ordered_json to_json(const SessionConfig& cfg);

/// Builds the environment configuration a session (or a headless replay)
/// runs. Throws on a bad world path or invalid start.
EnvConfig session_env_config(const SessionConfig& cfg);

struct CueEvent {
  int step = 0;  // step at which the cue takes effect
  CueKind cue = CueKind::Forward;
};

/// One live episode. Not synchronized; SessionManager serializes access.
class Session {
 public:
  Session(std::string id, SessionConfig cfg);

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return cfg_; }
  bool paused() const { return paused_; }
  bool done() const { return env_->done(); }
  int step() const { return env_->step_index(); }
  const std::vector<CueEvent>& cue_log() const { return cue_log_; }
  const WayfindEnv& env() const { return *env_; }

  /// Handles one client message. Returns the reply (an "ack" or "error"
  /// object). Messages that change the episode also append to `outbox`.
  nlohmann::ordered_json handle(const nlohmann::json& msg, std::vector<nlohmann::ordered_json>& outbox);

  /// Advances one step when running. Returns the new state message, followed
  /// by the terminal message when the episode ends. Empty when paused or
  /// after the terminal message was sent.
  std::vector<nlohmann::ordered_json> tick();

  /// Current state message (no side effects).
  nlohmann::ordered_json state_message() const;

 private:
  void restart();
  void plan();
  nlohmann::ordered_json terminal_message() const;
  nlohmann::ordered_json reply(const std::string& type, const std::string& what) const;
  void issue(CueKind kind);

  std::string id_;
  SessionConfig cfg_;
  std::unique_ptr<WayfindEnv> env_;
  GreedyPolicy policy_;
  GreedyPolicy unplanned_;  // policy state before the current step's decision
  Observation obs_;
  ShieldReport report_;
  int planned_action_ = 0;
  double last_reward_ = 0.0;
  bool last_collided_ = false;
  int last_action_ = -1;
  bool paused_ = false;
  bool terminal_sent_ = false;
  int episode_ = 0;
  std::vector<CueKind> queued_;
  std::vector<CueEvent> cue_log_;
};

/// Runs the episode headless with the given cue log and returns the
/// trace after `ticks` steps (or episode end).
std::vector<TraceRecord> replay_session(const SessionConfig& cfg, const std::vector<CueEvent>& cues, int ticks);

/// Owns sessions, their tick threads and their outbound message logs.
class SessionManager {
 public:
  SessionManager() = default;
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  struct Opened {
    std::string id;
    nlohmann::ordered_json state;
  };
  /// Throws std::invalid_argument / ParseError / std::runtime_error on a bad
  /// configuration; no session is created then.
  Opened open(const SessionConfig& cfg);
  bool close(const std::string& id);
  bool exists(const std::string& id) const;
  std::vector<std::string> ids() const;

  /// Dispatches a client message; nullopt when the session does not exist.
  std::optional<nlohmann::ordered_json> send(const std::string& id, const nlohmann::json& msg);
  std::optional<nlohmann::ordered_json> latest(const std::string& id) const;
  /// Current episode trace as JSONL.
  std::optional<std::string> trace_jsonl(const std::string& id) const;

  /// Outbound messages with index >= from. Blocks up to `wait_ms` for new
  /// ones when none are available. nullopt when the session does not exist.
  std::optional<std::vector<std::string>> events(const std::string& id, std::size_t from, int wait_ms);

 private:
  struct Slot {
    std::mutex mu;
    std::condition_variable cv;
    std::unique_ptr<Session> session;
    std::vector<std::string> log;
    bool stopping = false;
    std::thread ticker;
  };
  std::shared_ptr<Slot> find(const std::string& id) const;
  static void publish(Slot& slot, const nlohmann::ordered_json& m);

  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::uint64_t next_id_ = 1;
};

}  // namespace dyad
