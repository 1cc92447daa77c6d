#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dyad/scenarios.hpp"
#include "dyad/shield.hpp"
#include "dyad/wayfind.hpp"
#include "json.hpp"

namespace dyad {

/// A controller acting in a WayfindEnv through the shield.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(std::uint64_t /*seed*/) {}
  /// Chosen action index. `report`, when given, receives the shield output
  /// used for the decision.
  virtual int act(const WayfindEnv& env, const Observation& obs, const ShieldConfig& shield,
                  ShieldReport* report = nullptr) = 0;
};

struct GreedyConfig {
  double heading_weight = 3.0;  // multiplies a * (e_next - e_now)
  /// Blend between radial distance gain (0) and progress along theta_bar (1).
  double progress_weight = 0.25;
  double temperature = 0.05;
  /// Model the controller predicts with (scores and shield). Empty means the
  /// environment's own model.
  std::optional<InteractionModel> believed_model;
};

/// One-step lookahead on the reward: human distance gain minus weighted
/// heading-error change, softmax, shield, argmax. A Stop cue selects Stop.
/// Remembers actions that were rejected by a collision from the current
/// state and does not retry them there.
class GreedyPolicy : public Policy {
 public:
  explicit GreedyPolicy(GreedyConfig cfg = {});
  std::string name() const override { return "greedy"; }
  void begin_episode(std::uint64_t seed) override;
  int act(const WayfindEnv& env, const Observation& obs, const ShieldConfig& shield,
          ShieldReport* report = nullptr) override;

  /// Pre-shield action distribution.
  std::vector<double> distribution(const WayfindEnv& env) const;

 private:
  GreedyConfig cfg_;
  std::optional<DyadState> last_state_;
  int last_action_ = -1;
  std::vector<int> blocked_;
};

/// Lidar pooled into this many sectors (minimum per sector).
inline constexpr int kLidarSectors = 12;
/// sectors + rel_from_start (3) + cue one-hot (4) + bias.
inline constexpr int kLinearFeatures = kLidarSectors + 3 + 4 + 1;

std::vector<double> policy_features(const Observation& obs);

struct PolicyParams {
  int n_features = kLinearFeatures;
  int n_actions = kNamedActions;
  std::vector<double> weights;  // row-major n_features x n_actions
  double temperature = 1.0;

  static PolicyParams zeros(int n_actions = kNamedActions);
  std::vector<double> logits(const std::vector<double>& features) const;
};

nlohmann::ordered_json to_json(const PolicyParams& p);
PolicyParams policy_params_from_json(const nlohmann::json& j);

std::vector<double> softmax(const std::vector<double>& logits);

/// Linear softmax policy. Samples from the shielded distribution, or takes
/// its argmax when `greedy`.
class LinearPolicy : public Policy {
 public:
  LinearPolicy(PolicyParams params, std::optional<InteractionModel> believed_model = std::nullopt,
               bool greedy = false);
  std::string name() const override { return "linear"; }
  void begin_episode(std::uint64_t seed) override;
  int act(const WayfindEnv& env, const Observation& obs, const ShieldConfig& shield,
          ShieldReport* report = nullptr) override;
  const PolicyParams& params() const { return params_; }

 private:
  PolicyParams params_;
  std::optional<InteractionModel> believed_;
  bool greedy_;
  std::uint64_t rng_state_ = 0;
};

struct EvalMetrics {
  double collision_free_ratio = 0.0;
  double avg_collisions_per_ep = 0.0;
  double mean_reward = 0.0;
  int episodes = 0;
  std::uint64_t seed = 0;
};

struct EpisodeResult {
  std::string scenario;
  std::uint64_t seed = 0;
  int steps = 0;
  int collisions = 0;
  double total_reward = 0.0;
  std::vector<TraceRecord> trace;
};

struct EvalOptions {
  InteractionModel env_model = DelayedHarnessParams{};
  ShieldConfig shield;
  EpisodeSetup setup;
  int n_episodes = 100;
  std::uint64_t seed = 0;
  bool keep_traces = false;
};

struct EvalResult {
  EvalMetrics metrics;
  std::vector<EpisodeResult> episodes;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

/// Episode i runs scenario i % size with seed derive_seed(seed, i). Throws
/// std::invalid_argument when n_episodes < 1 or the suite is empty.
EvalResult evaluate(const PolicyFactory& make_policy, const std::vector<Scenario>& scenarios,
                    const EvalOptions& opts);

/// Runs one episode to completion.
EpisodeResult run_episode(Policy& policy, WayfindEnv& env, const ShieldConfig& shield, std::uint64_t seed);

/// Aggregates metrics from exported traces (one vector per episode).
EvalMetrics metrics_from_traces(const std::vector<std::vector<TraceRecord>>& traces, std::uint64_t seed = 0);

struct TrainOptions {
  InteractionModel model = DelayedHarnessParams{};
  ShieldConfig shield;  // beta is the training suppression factor
  EpisodeSetup setup;
  int iterations = 200;
  int episodes_per_iteration = 4;
  double learning_rate = 0.05;
  double discount = 0.99;
  int max_steps = 60;  // episode cap during training
  std::uint64_t seed = 0;
  /// Divergence: the pre-shield mass on permitted actions stays below
  /// `collapse_mass` (or the shielded entropy below `collapse_entropy` with
  /// reward under the untrained baseline) for `collapse_window` iterations.
  double collapse_mass = 0.2;
  double collapse_entropy = 1e-3;
  int collapse_window = 50;
};

struct TrainIteration {
  int iteration = 0;
  double mean_reward = 0.0;
  double entropy = 0.0;         // shielded distribution, mean per step
  double permitted_mass = 0.0;  // pre-shield mass on non-suppressed actions
  double grad_norm = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<TrainIteration> curve;
  double baseline_reward = 0.0;  // mean reward of the untrained policy
  bool diverged = false;
  std::string diagnostic;
};

/// REINFORCE on the shielded action distribution. Throws
/// std::invalid_argument when iterations < 1 and std::runtime_error on a
/// non-finite gradient.
TrainResult train_linear(const std::vector<Scenario>& scenarios, const TrainOptions& opts);

/// rows: policy model (train), columns: environment model (test); entry is
/// the mean episode reward.
using RewardMatrix = std::array<std::array<double, 2>, 2>;

struct MismatchOptions {
  ShieldConfig shield;
  EpisodeSetup setup;
  int seeds = 4;
  std::uint64_t seed = 0;
};

/// make_policy(i) builds the policy trained (or configured) under models[i];
/// each is evaluated with the environment running models[j].
RewardMatrix model_mismatch_eval(const std::function<std::unique_ptr<Policy>(int)>& make_policy,
                                 const std::array<InteractionModel, 2>& models, const std::vector<Scenario>& scenarios,
                                 const MismatchOptions& opts);

nlohmann::ordered_json to_json(const EvalMetrics& m);

}  // namespace dyad
