#include "dyad/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dyad/rng.hpp"

namespace dyad {

namespace {

bool same_poses(const DyadState& a, const DyadState& b) {
  return a.robot.x == b.robot.x && a.robot.y == b.robot.y && a.robot.theta == b.robot.theta &&
         a.human.x == b.human.x && a.human.y == b.human.y && a.human.theta == b.human.theta;
}

int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

int sample(const std::vector<double>& p, double u) {
  double acc = 0.0;
  int last = -1;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    last = static_cast<int>(i);
    acc += p[i];
    if (u < acc) return last;
  }
  return last;
}

double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

}  // namespace

std::vector<double> softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::isinf(logits[i]) && logits[i] < 0 ? 0.0 : std::exp(logits[i] - m);
    z += p[i];
  }
  for (auto& x : p) x /= z;
  return p;
}

GreedyPolicy::GreedyPolicy(GreedyConfig cfg) : cfg_(std::move(cfg)) {
  if (!(cfg_.temperature > 0.0)) throw std::invalid_argument("greedy temperature must be > 0");
}

void GreedyPolicy::begin_episode(std::uint64_t) {
  last_state_.reset();
  last_action_ = -1;
  blocked_.clear();
}

std::vector<double> GreedyPolicy::distribution(const WayfindEnv& env) const {
  const InteractionModel& model = cfg_.believed_model ? *cfg_.believed_model : env.config().model;
  const auto& cat = env.catalog();
  const auto& s = env.state();
  const auto& rp = env.config().reward;
  const Vec2 start = env.human_start();
  const double d_now = distance(s.human.translation(), start);
  const double e_now = heading_error_term(env.theta_bar(), s.human.theta, rp.b);

  std::vector<double> score(static_cast<std::size_t>(cat.size()));
  for (int i = 0; i < cat.size(); ++i) {
    const DyadState next = estimate_next(model, s, cat[i].displacement);
    const double radial = distance(next.human.translation(), start) - d_now;
    const Vec2 step = next.human.translation() - s.human.translation();
    const double along = step.x * std::cos(env.theta_bar()) + step.y * std::sin(env.theta_bar());
    const double gain = (1.0 - cfg_.progress_weight) * radial + cfg_.progress_weight * along;
    const double de = heading_error_term(env.theta_bar(), next.human.theta, rp.b) - e_now;
    score[static_cast<std::size_t>(i)] = gain - cfg_.heading_weight * rp.a * de;
  }
  if (env.active_cue() == CueKind::Stop) {
    const double top = *std::max_element(score.begin(), score.end());
    score[static_cast<std::size_t>(cat.stop_index())] = top + 1.0;
  }
  for (int b : blocked_) score[static_cast<std::size_t>(b)] = -std::numeric_limits<double>::infinity();
  for (auto& x : score) x /= cfg_.temperature;
  return softmax(score);
}

int GreedyPolicy::act(const WayfindEnv& env, const Observation& obs, const ShieldConfig& shield,
                      ShieldReport* report) {
  const auto& trace = env.trace();
  if (last_state_ && same_poses(*last_state_, env.state()) && !trace.empty() && trace.back().collided) {
    if (std::find(blocked_.begin(), blocked_.end(), last_action_) == blocked_.end()) blocked_.push_back(last_action_);
  } else if (!last_state_ || !same_poses(*last_state_, env.state())) {
    blocked_.clear();
  }
  if (static_cast<int>(blocked_.size()) >= env.catalog().size()) blocked_.clear();

  const InteractionModel& model = cfg_.believed_model ? *cfg_.believed_model : env.config().model;
  const auto probs = distribution(env);
  ShieldReport rep = apply_shield(probs, env.catalog(), env.state(), obs.scan, model, shield);
  const int a = argmax(rep.modified_probs);
  last_state_ = env.state();
  last_action_ = a;
  if (report) *report = std::move(rep);
  return a;
}

std::vector<double> policy_features(const Observation& obs) {
  std::vector<double> f;
  f.reserve(kLinearFeatures);
  const std::size_t n = obs.lidar.size();
  for (int s = 0; s < kLidarSectors; ++s) {
    const std::size_t lo = n * static_cast<std::size_t>(s) / kLidarSectors;
    const std::size_t hi = n * static_cast<std::size_t>(s + 1) / kLidarSectors;
    double m = 1.0;
    for (std::size_t i = lo; i < hi; ++i) m = std::min(m, obs.lidar[i]);
    f.push_back(m);
  }
  f.push_back(obs.rel_from_start.x / 5.0);
  f.push_back(obs.rel_from_start.y / 5.0);
  f.push_back(obs.rel_from_start.theta / kPi);
  for (double c : obs.cue_onehot) f.push_back(c);
  f.push_back(1.0);
  return f;
}

PolicyParams PolicyParams::zeros(int n_actions) {
  PolicyParams p;
  p.n_actions = n_actions;
  p.weights.assign(static_cast<std::size_t>(p.n_features * n_actions), 0.0);
  return p;
}

std::vector<double> PolicyParams::logits(const std::vector<double>& f) const {
  if (static_cast<int>(f.size()) != n_features) throw std::invalid_argument("feature size mismatch");
  std::vector<double> out(static_cast<std::size_t>(n_actions), 0.0);
  for (int i = 0; i < n_features; ++i)
    for (int a = 0; a < n_actions; ++a)
      out[static_cast<std::size_t>(a)] += f[static_cast<std::size_t>(i)] * weights[static_cast<std::size_t>(i * n_actions + a)];
  for (auto& x : out) x /= temperature;
  return out;
}

nlohmann::ordered_json to_json(const PolicyParams& p) {
  nlohmann::ordered_json j;
  j["n_features"] = p.n_features;
  j["n_actions"] = p.n_actions;
  j["temperature"] = p.temperature;
  j["weights"] = p.weights;
  return j;
}

PolicyParams policy_params_from_json(const nlohmann::json& j) {
  PolicyParams p;
  p.n_features = j.at("n_features").get<int>();
  p.n_actions = j.at("n_actions").get<int>();
  p.temperature = j.value("temperature", 1.0);
  p.weights = j.at("weights").get<std::vector<double>>();
  if (p.n_features != kLinearFeatures) throw std::invalid_argument("policy expects " + std::to_string(kLinearFeatures) + " features");
  if (p.weights.size() != static_cast<std::size_t>(p.n_features * p.n_actions))
    throw std::invalid_argument("policy weight count does not match n_features x n_actions");
  if (!(p.temperature > 0.0)) throw std::invalid_argument("policy temperature must be > 0");
  for (double w : p.weights)
    if (!std::isfinite(w)) throw std::invalid_argument("non-finite policy weight");
  return p;
}

LinearPolicy::LinearPolicy(PolicyParams params, std::optional<InteractionModel> believed_model, bool greedy)
    : params_(std::move(params)), believed_(std::move(believed_model)), greedy_(greedy) {}

void LinearPolicy::begin_episode(std::uint64_t seed) { rng_state_ = derive_seed(seed, 0xAC7); }

int LinearPolicy::act(const WayfindEnv& env, const Observation& obs, const ShieldConfig& shield,
                      ShieldReport* report) {
  const auto pi = softmax(params_.logits(policy_features(obs)));
  const InteractionModel& model = believed_ ? *believed_ : env.config().model;
  ShieldReport rep = apply_shield(pi, env.catalog(), env.state(), obs.scan, model, shield);
  int a;
  if (greedy_) {
    a = argmax(rep.modified_probs);
  } else {
    Rng rng(derive_seed(rng_state_, static_cast<std::uint64_t>(obs.step)));
    a = sample(rep.modified_probs, rng.uniform());
  }
  if (report) *report = std::move(rep);
  return a;
}

EpisodeResult run_episode(Policy& policy, WayfindEnv& env, const ShieldConfig& shield, std::uint64_t seed) {
  policy.begin_episode(seed);
  Observation obs = env.reset();
  while (!env.done()) obs = env.step(policy.act(env, obs, shield)).obs;
  EpisodeResult r;
  r.seed = seed;
  r.steps = env.step_index();
  r.collisions = env.collisions();
  r.total_reward = env.total_reward();
  r.trace = env.trace();
  return r;
}

EvalMetrics metrics_from_traces(const std::vector<std::vector<TraceRecord>>& traces, std::uint64_t seed) {
  EvalMetrics m;
  m.seed = seed;
  m.episodes = static_cast<int>(traces.size());
  if (traces.empty()) return m;
  int clean = 0;
  double collisions = 0.0, reward = 0.0;
  for (const auto& t : traces) {
    int c = 0;
    double r = 0.0;
    for (const auto& rec : t) {
      c += rec.collided ? 1 : 0;
      r += rec.reward;
    }
    clean += c == 0 ? 1 : 0;
    collisions += c;
    reward += r;
  }
  m.collision_free_ratio = static_cast<double>(clean) / m.episodes;
  m.avg_collisions_per_ep = collisions / m.episodes;
  m.mean_reward = reward / m.episodes;
  return m;
}

EvalResult evaluate(const PolicyFactory& make_policy, const std::vector<Scenario>& scenarios,
                    const EvalOptions& opts) {
  if (opts.n_episodes < 1) throw std::invalid_argument("n_episodes must be >= 1");
  if (scenarios.empty()) throw std::invalid_argument("empty scenario suite");
  validate(opts.shield);
  EvalResult res;
  std::vector<std::vector<TraceRecord>> traces;
  auto policy = make_policy();
  for (int i = 0; i < opts.n_episodes; ++i) {
    const auto& sc = scenarios[static_cast<std::size_t>(i) % scenarios.size()];
    const std::uint64_t seed = derive_seed(opts.seed, static_cast<std::uint64_t>(i));
    WayfindEnv env(make_env_config(sc, opts.env_model, opts.setup, seed));
    EpisodeResult ep = run_episode(*policy, env, opts.shield, seed);
    ep.scenario = sc.name;
    traces.push_back(std::move(ep.trace));
    if (opts.keep_traces) ep.trace = traces.back();
    res.episodes.push_back(std::move(ep));
  }
  res.metrics = metrics_from_traces(traces, opts.seed);
  return res;
}

TrainResult train_linear(const std::vector<Scenario>& scenarios, const TrainOptions& opts) {
  if (opts.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (opts.episodes_per_iteration < 1) throw std::invalid_argument("episodes_per_iteration must be >= 1");
  if (scenarios.empty()) throw std::invalid_argument("empty scenario suite");
  validate(opts.shield);

  TrainResult res;
  res.params = PolicyParams::zeros();
  auto& W = res.params.weights;
  const int F = res.params.n_features;
  const int A = res.params.n_actions;

  struct StepSample {
    std::vector<double> phi;
    std::vector<double> p_hat;
    int action;
    double ret;
  };

  int streak = 0;
  for (int it = 0; it < opts.iterations; ++it) {
    std::vector<StepSample> batch;
    double reward_sum = 0.0, entropy_sum = 0.0, mass_sum = 0.0;
    int constrained_steps = 0;
    for (int ep = 0; ep < opts.episodes_per_iteration; ++ep) {
      const std::uint64_t k = static_cast<std::uint64_t>(it) * static_cast<std::uint64_t>(opts.episodes_per_iteration) +
                              static_cast<std::uint64_t>(ep);
      Scenario sc = scenarios[k % scenarios.size()];
      sc.max_steps = std::min(sc.max_steps, opts.max_steps);
      const std::uint64_t seed = derive_seed(opts.seed, k);
      WayfindEnv env(make_env_config(sc, opts.model, opts.setup, seed));
      Observation obs = env.reset();
      Rng rng(derive_seed(seed, 0x7A1));
      std::vector<double> rewards;
      const std::size_t first = batch.size();
      while (!env.done()) {
        StepSample s;
        s.phi = policy_features(obs);
        const auto pi = softmax(res.params.logits(s.phi));
        const ShieldReport rep = apply_shield(pi, env.catalog(), env.state(), obs.scan, opts.model, opts.shield);
        s.p_hat = rep.modified_probs;
        s.action = sample(s.p_hat, rng.uniform());
        bool any_unsafe = false;
        double permitted = 0.0;
        for (int a = 0; a < A; ++a) {
          if (rep.actions[static_cast<std::size_t>(a)].unsafe)
            any_unsafe = true;
          else
            permitted += pi[static_cast<std::size_t>(a)];
        }
        if (any_unsafe) {
          mass_sum += permitted;
          ++constrained_steps;
        }
        entropy_sum += entropy(s.p_hat);
        const auto r = env.step(s.action);
        obs = r.obs;
        rewards.push_back(r.reward);
        batch.push_back(std::move(s));
      }
      double g = 0.0;
      for (std::size_t t = rewards.size(); t-- > 0;) {
        g = rewards[t] + opts.discount * g;
        batch[first + t].ret = g;
      }
      reward_sum += env.total_reward();
    }

    double baseline = 0.0;
    for (const auto& s : batch) baseline += s.ret;
    baseline /= static_cast<double>(batch.size());
    std::vector<double> grad(W.size(), 0.0);
    for (const auto& s : batch) {
      const double adv = s.ret - baseline;
      for (int a = 0; a < A; ++a) {
        const double coef = adv * ((a == s.action ? 1.0 : 0.0) - s.p_hat[static_cast<std::size_t>(a)]) /
                            res.params.temperature;
        if (coef == 0.0) continue;
        for (int f = 0; f < F; ++f) grad[static_cast<std::size_t>(f * A + a)] += coef * s.phi[static_cast<std::size_t>(f)];
      }
    }
    double norm = 0.0;
    for (auto& gv : grad) {
      gv /= static_cast<double>(batch.size());
      norm += gv * gv;
    }
    norm = std::sqrt(norm);
    if (!std::isfinite(norm))
      throw std::runtime_error("non-finite policy gradient at iteration " + std::to_string(it));
    for (std::size_t i = 0; i < W.size(); ++i) W[i] += opts.learning_rate * grad[i];

    TrainIteration rec;
    rec.iteration = it;
    rec.mean_reward = reward_sum / opts.episodes_per_iteration;
    rec.entropy = entropy_sum / static_cast<double>(batch.size());
    rec.permitted_mass = constrained_steps > 0 ? mass_sum / constrained_steps : 1.0;
    rec.grad_norm = norm;
    res.curve.push_back(rec);
    if (it == 0) res.baseline_reward = rec.mean_reward;

    const bool collapsed = (opts.shield.beta < 1.0 && rec.permitted_mass < opts.collapse_mass) ||
                           (rec.entropy < opts.collapse_entropy && rec.mean_reward < res.baseline_reward);
    streak = collapsed ? streak + 1 : 0;
    if (streak >= opts.collapse_window) {
      res.diverged = true;
      res.diagnostic = "policy mass on permitted actions collapsed for " + std::to_string(streak) +
                       " consecutive iterations (last permitted mass " + std::to_string(rec.permitted_mass) +
                       ", entropy " + std::to_string(rec.entropy) + ")";
      break;
    }
  }
  return res;
}

RewardMatrix model_mismatch_eval(const std::function<std::unique_ptr<Policy>(int)>& make_policy,
                                 const std::array<InteractionModel, 2>& models, const std::vector<Scenario>& scenarios,
                                 const MismatchOptions& opts) {
  if (opts.seeds < 1) throw std::invalid_argument("seeds must be >= 1");
  RewardMatrix m{};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      EvalOptions eo;
      eo.env_model = models[static_cast<std::size_t>(j)];
      eo.shield = opts.shield;
      eo.setup = opts.setup;
      eo.n_episodes = opts.seeds * static_cast<int>(scenarios.size());
      eo.seed = opts.seed;
      m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          evaluate([&] { return make_policy(i); }, scenarios, eo).metrics.mean_reward;
    }
  }
  return m;
}

nlohmann::ordered_json to_json(const EvalMetrics& m) {
  nlohmann::ordered_json j;
  j["collision_free_ratio"] = m.collision_free_ratio;
  j["avg_collisions_per_ep"] = m.avg_collisions_per_ep;
  j["mean_reward"] = m.mean_reward;
  j["episodes"] = m.episodes;
  j["seed"] = m.seed;
  return j;
}

}  // namespace dyad
