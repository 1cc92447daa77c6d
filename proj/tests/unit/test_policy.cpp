#include <algorithm>
#include <cmath>
#include <memory>

#include "doctest.h"
#include "dyad/policy.hpp"
#include "dyad/rng.hpp"

using namespace dyad;

namespace {

EnvConfig corridor_env(Pose2 start, std::vector<Cue> cues = {}) {
  EnvConfig cfg;
  cfg.world = std::make_shared<const OccupancyWorld>(corridor_world(12.0, 2.0));
  cfg.start = start;
  cfg.cues = std::move(cues);
  cfg.max_steps = 60;
  return cfg;
}

double quartile_mean(const std::vector<TrainIteration>& c, bool last) {
  const std::size_t q = c.size() / 4;
  double s = 0.0;
  for (std::size_t i = 0; i < q; ++i) s += c[last ? c.size() - 1 - i : i].mean_reward;
  return s / static_cast<double>(q);
}

Scenario boxed_in() {
  WorldBuilder b(4, 4);
  b.box(0, 0, 4, 4).clear(1.0, 1.0, 2.5, 2.1);
  Scenario s;
  s.name = "boxed_in";
  s.world = std::make_shared<const OccupancyWorld>(b.build());
  s.start = {2.05, 1.65, 0.0};
  s.max_steps = 20;
  return s;
}

}  // namespace

TEST_CASE("greedy goes forward in a clear corridor") {
  WayfindEnv env(corridor_env({1.5, 1.25, 0.0}));
  const auto obs = env.reset();
  GreedyPolicy g;
  g.begin_episode(0);
  ShieldReport rep;
  CHECK(g.act(env, obs, ShieldConfig{}, &rep) == static_cast<int>(Action::Forward));
  CHECK(rep.modified_probs.size() == 8u);
}

TEST_CASE("greedy corrects an orientation error, then goes forward") {
  const Scenario sc = orientation_error_scenario();
  EpisodeSetup setup;
  setup.jitter = false;
  WayfindEnv env(make_env_config(sc, DelayedHarnessParams{}, setup, 0));
  GreedyPolicy g;
  const auto ep = run_episode(g, env, ShieldConfig{}, 0);
  const double b = sc.reward.b;
  int first_ok = -1;
  for (const auto& r : ep.trace) {
    if (std::abs(wrap_angle(r.theta_bar - r.human.theta)) < b) {
      first_ok = r.step;
      break;
    }
  }
  REQUIRE(first_ok >= 0);
  CHECK(first_ok < 30);
  // Before the correction the policy is turning or moving diagonally.
  for (const auto& r : ep.trace) {
    if (r.step >= std::min(first_ok, 2)) break;
    CHECK(r.action != static_cast<int>(Action::Forward));
    CHECK(r.action != static_cast<int>(Action::Stop));
  }
  int forwards = 0;
  for (const auto& r : ep.trace)
    if (r.step > first_ok && r.action == static_cast<int>(Action::Forward)) ++forwards;
  CHECK(forwards > 10);
  CHECK(ep.collisions == 0);
}

TEST_CASE("wall dead ahead: forward is suppressed and a lateral action is taken") {
  WorldBuilder b(8, 8);
  b.border(0.25).box(3.8, 2.5, 4.3, 5.5);
  EnvConfig cfg;
  cfg.world = std::make_shared<const OccupancyWorld>(b.build());
  cfg.start = {3.3, 4.0, 0.0};
  cfg.model = FixedHarnessParams{};
  WayfindEnv env(cfg);
  const auto obs = env.reset();
  GreedyPolicy g;
  g.begin_episode(0);
  ShieldReport rep;
  const int a = g.act(env, obs, ShieldConfig{}, &rep);
  CHECK(rep.actions[static_cast<int>(Action::Forward)].unsafe);
  CHECK(rep.modified_probs[static_cast<int>(Action::Forward)] == 0.0);
  const std::vector<int> lateral{static_cast<int>(Action::TurnLeft10), static_cast<int>(Action::TurnRight10),
                                 static_cast<int>(Action::SidestepLeft), static_cast<int>(Action::SidestepRight)};
  CHECK(std::find(lateral.begin(), lateral.end(), a) != lateral.end());
  // And the move it picked really is collision free.
  CHECK_FALSE(env.step(a).info.collided_robot);
}

TEST_CASE("greedy never takes an action the shield zeroed") {
  const auto suite = ablation_suite();
  EpisodeSetup setup;
  setup.noise = SensorNoise{};
  for (std::size_t i = 0; i < suite.size(); i += 3) {
    WayfindEnv env(make_env_config(suite[i], DelayedHarnessParams{}, setup, i));
    GreedyPolicy g;
    g.begin_episode(i);
    auto obs = env.reset();
    while (!env.done()) {
      ShieldReport rep;
      const int a = g.act(env, obs, ShieldConfig{}, &rep);
      CHECK(rep.modified_probs[static_cast<std::size_t>(a)] > 0.0);
      obs = env.step(a).obs;
    }
  }
}

TEST_CASE("linear policy samples only permitted actions") {
  PolicyParams p = PolicyParams::zeros();
  Rng rng(6);
  for (auto& w : p.weights) w = rng.normal(0, 2);
  const Scenario sc = boxed_in();
  EpisodeSetup setup;
  setup.jitter = false;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    WayfindEnv env(make_env_config(sc, DelayedHarnessParams{}, setup, seed));
    LinearPolicy pol(p);
    pol.begin_episode(seed);
    auto obs = env.reset();
    while (!env.done()) {
      ShieldReport rep;
      const int a = pol.act(env, obs, ShieldConfig{}, &rep);
      CHECK(rep.modified_probs[static_cast<std::size_t>(a)] > 0.0);
      obs = env.step(a).obs;
    }
  }
}

TEST_CASE("features and params") {
  WayfindEnv env(corridor_env({1.5, 1.25, 0.0}));
  const auto f = policy_features(env.reset());
  CHECK(f.size() == static_cast<std::size_t>(kLinearFeatures));
  CHECK(f.back() == 1.0);
  PolicyParams p = PolicyParams::zeros();
  p.weights[3] = 0.5;
  const auto back = policy_params_from_json(nlohmann::json::parse(to_json(p).dump()));
  CHECK(back.weights == p.weights);
  auto bad = to_json(p);
  bad["weights"].erase(0);
  CHECK_THROWS_AS(policy_params_from_json(bad), std::invalid_argument);
  const auto sm = softmax({1.0, 2.0, -std::numeric_limits<double>::infinity()});
  CHECK(sm[2] == 0.0);
  CHECK(sm[0] + sm[1] == doctest::Approx(1.0));
}

TEST_CASE("training improves reward on a single corridor (5-seed median)") {
  std::vector<double> gains;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    TrainOptions o;
    o.seed = seed;
    o.shield.beta = 0.5;
    const auto r = train_linear(single_corridor_suite(), o);
    REQUIRE(r.curve.size() == 200u);
    gains.push_back(quartile_mean(r.curve, true) - quartile_mean(r.curve, false));
  }
  std::sort(gains.begin(), gains.end());
  CHECK(gains[2] > 0.0);
}

TEST_CASE("training with full suppression in a tight box is flagged as diverging") {
  TrainOptions o;
  o.shield.beta = 0.0;
  o.iterations = 80;
  o.max_steps = 20;
  o.setup.jitter = false;
  const auto r = train_linear({boxed_in()}, o);
  CHECK(r.diverged);
  CHECK_FALSE(r.diagnostic.empty());
  CHECK(r.curve.size() < 80u);

  o.shield.beta = 1.0;
  CHECK_FALSE(train_linear({boxed_in()}, o).diverged);
}

TEST_CASE("training argument errors") {
  TrainOptions o;
  o.iterations = 0;
  CHECK_THROWS_AS(train_linear(single_corridor_suite(), o), std::invalid_argument);
  o.iterations = 1;
  CHECK_THROWS_AS(train_linear({}, o), std::invalid_argument);
}

TEST_CASE("evaluate is deterministic and recomputable from traces") {
  EvalOptions o;
  o.n_episodes = 12;
  o.seed = 3;
  o.keep_traces = true;
  o.setup.noise = SensorNoise{};
  auto make = [] { return std::make_unique<GreedyPolicy>(); };
  const auto a = evaluate(make, ablation_suite(), o);
  const auto b = evaluate(make, ablation_suite(), o);
  CHECK(a.metrics.collision_free_ratio == b.metrics.collision_free_ratio);
  CHECK(a.metrics.avg_collisions_per_ep == b.metrics.avg_collisions_per_ep);
  CHECK(a.metrics.mean_reward == b.metrics.mean_reward);
  std::vector<std::vector<TraceRecord>> traces;
  for (const auto& ep : a.episodes) traces.push_back(ep.trace);
  const auto m = metrics_from_traces(traces, o.seed);
  CHECK(m.collision_free_ratio == a.metrics.collision_free_ratio);
  CHECK(m.avg_collisions_per_ep == a.metrics.avg_collisions_per_ep);
  CHECK(m.mean_reward == doctest::Approx(a.metrics.mean_reward).epsilon(1e-12));
  CHECK(a.episodes[1].scenario == ablation_suite()[1].name);
  o.n_episodes = 0;
  CHECK_THROWS_AS(evaluate(make, ablation_suite(), o), std::invalid_argument);
}

TEST_CASE("mismatch matrix") {
  MismatchOptions o;
  o.seeds = 1;
  auto suite = corridor_suite();
  suite.resize(std::min<std::size_t>(suite.size(), 4));
  SUBCASE("finite 2x2") {
    const std::array<InteractionModel, 2> models{FixedHarnessParams{}, DelayedHarnessParams{}};
    const auto m = model_mismatch_eval(
        [&](int i) {
          GreedyConfig g;
          g.believed_model = models[static_cast<std::size_t>(i)];
          return std::make_unique<GreedyPolicy>(g);
        },
        models, suite, o);
    for (const auto& row : m)
      for (double v : row) CHECK(std::isfinite(v));
  }
  SUBCASE("identical models give identical rows") {
    const std::array<InteractionModel, 2> same{DelayedHarnessParams{}, DelayedHarnessParams{}};
    const auto m = model_mismatch_eval(
        [&](int) {
          GreedyConfig g;
          g.believed_model = same[0];
          return std::make_unique<GreedyPolicy>(g);
        },
        same, suite, o);
    CHECK(m[0][0] == m[1][0]);
    CHECK(m[0][1] == m[1][1]);
    CHECK(m[0][0] == m[0][1]);
  }
}
