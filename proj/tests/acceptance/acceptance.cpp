// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "dyad/data.hpp"
#include "dyad/policy.hpp"
#include "dyad/rng.hpp"
#include "dyad/shield.hpp"

using namespace dyad;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_s;
  std::function<Outcome()> check;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- criteria

Outcome dh_limit() {
  Rng rng(1);
  const auto cat = ActionCatalog::standard();
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double d = rng.uniform(-1.5, -0.3);
    const FixedHarnessParams fixed{d};
    const DelayedHarnessParams dh{{d, 0.0, 0.0}, 0.0};
    const Pose2 robot{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-kPi, kPi)};
    // Arbitrary current human pose: with alpha = 0 the history must not matter.
    const DyadState s{robot, {rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-kPi, kPi)}};
    const Pose2 next = compose(robot, cat[static_cast<int>(rng.below(8))].displacement);
    const Pose2 a = step_fixed(fixed, next);
    const Pose2 b = step_delayed(dh, s, next).human;
    worst = std::max({worst, std::abs(a.x - b.x), std::abs(a.y - b.y)});
  }
  return {worst < 1e-9, fmt("max deviation %.2e m over 1000 pairs", worst)};
}

Outcome parameter_recovery() {
  SubjectProfile prof{"truth", {{-0.7, -0.3, 0.0}, 0.8}, 0.02};
  std::vector<double> alpha, dx, dy, dth;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::vector<DyadTrajectory> data;
    for (int id = 1; id <= 5; ++id)
      data.push_back(synthesize_dyad(prof, script_trajectory(id), derive_seed(seed, static_cast<std::uint64_t>(id))));
    FitOptions fo;
    fo.seed = seed;
    const auto r = fit(ModelKind::Delayed, data, fo);
    const auto& p = std::get<DelayedHarnessParams>(r.params);
    alpha.push_back(p.alpha);
    dx.push_back(p.default_offset.x);
    dy.push_back(p.default_offset.y);
    dth.push_back(p.default_offset.theta);
  }
  const double a = median(alpha), x = median(dx), y = median(dy), t = median(dth);
  const bool ok = std::abs(a - 0.8) <= 0.05 && std::abs(x + 0.7) <= 0.02 && std::abs(y + 0.3) <= 0.02 &&
                  std::abs(t) <= 0.02;
  return {ok, fmt("median alpha %.3f, offset (%.3f, %.3f, %.3f)", a, x, y, t)};
}

Outcome model_ordering() {
  std::vector<std::vector<DyadTrajectory>> subjects;
  std::uint64_t k = 0;
  for (const auto& prof : default_profiles()) {
    std::vector<DyadTrajectory> all;
    for (int rep = 0; rep < 3; ++rep)
      for (int id = 1; id <= 5; ++id) all.push_back(synthesize_dyad(prof, script_trajectory(id), derive_seed(0, k++)));
    subjects.push_back(std::move(all));
  }
  const auto rows = compare_models(subjects);
  auto val = [&](const std::string& n) {
    for (const auto& r : rows)
      if (r.name == n) return r.val_rmse_mm;
    throw std::logic_error("missing row " + n);
  };
  const double ind = val("dh_opt_ind"), fixed = val("fixed_opt_ind"), pooled = val("dh_opt_all");
  return {ind < fixed && ind < pooled,
          fmt("val RMSE mm: dh_opt_ind %.1f, fixed_opt_ind %.1f, dh_opt_all %.1f", ind, fixed, pooled)};
}

bool disc_hits(const OccupancyWorld& w, Vec2 c, double r) {
  for (double dx = -r; dx <= r; dx += 1e-3)
    for (double dy = -r; dy <= r; dy += 1e-3)
      if (dx * dx + dy * dy <= r * r && w.occupied({c.x + dx, c.y + dy})) return true;
  return false;
}

Outcome shield_soundness() {
  const auto cat = ActionCatalog::standard();
  const DelayedHarnessParams model{};
  const ShieldConfig cfg;
  LidarConfig lidar;
  lidar.n_beams = 720;
  const std::vector<double> uniform(8, 1.0 / 8);
  Rng rng(2024);
  int scenes = 0, approved = 0, collisions = 0;
  while (scenes < 1000) {
    WorldBuilder b(6, 6);
    for (int k = 0; k < 4; ++k) {
      const Vec2 c{rng.uniform(0.5, 5.5), rng.uniform(0.5, 5.5)};
      std::vector<Vec2> pts;
      for (int v = 0; v < 6; ++v) pts.push_back({c.x + rng.uniform(-0.4, 0.4), c.y + rng.uniform(-0.4, 0.4)});
      b.convex(convex_hull(pts));
    }
    const auto world = b.build();
    const Pose2 pose{rng.uniform(2, 4), rng.uniform(2, 4), rng.uniform(-kPi, kPi)};
    const auto s = initial_state(model, pose);
    if (world.circle_collides(s.robot.translation(), cfg.robot_radius) ||
        world.circle_collides(s.human.translation(), cfg.human_radius))
      continue;
    ++scenes;
    const auto rep = apply_shield(uniform, cat, s, lidar_scan(world, pose, lidar, nullptr, 0), model, cfg);
    for (int a = 0; a < 8; ++a) {
      if (rep.actions[static_cast<std::size_t>(a)].unsafe) continue;
      ++approved;
      const auto n = estimate_next(model, s, cat[a].displacement);
      if (disc_hits(world, n.robot.translation(), cfg.robot_radius) ||
          disc_hits(world, n.human.translation(), cfg.human_radius))
        ++collisions;
    }
  }
  return {collisions == 0, fmt("%.0f scenes, %.0f approved actions, %.0f collisions", scenes, approved, collisions)};
}

EvalMetrics greedy_eval(bool noisy, double beta) {
  EvalOptions eo;
  eo.shield.beta = beta;
  eo.n_episodes = 100;
  eo.seed = 0;
  if (noisy) eo.setup.noise = SensorNoise{0.05, 0};
  return evaluate([] { return std::make_unique<GreedyPolicy>(); }, ablation_suite(), eo).metrics;
}

Outcome shield_trend() {
  const auto n0 = greedy_eval(true, 0.0), n1 = greedy_eval(true, 1.0);
  const auto i0 = greedy_eval(false, 0.0), i1 = greedy_eval(false, 1.0);
  const bool cf = n0.collision_free_ratio > n1.collision_free_ratio &&
                  n0.collision_free_ratio >= 1.2 * n1.collision_free_ratio;
  const bool col = n0.avg_collisions_per_ep < n1.avg_collisions_per_ep &&
                   n0.avg_collisions_per_ep <= 0.8 * n1.avg_collisions_per_ep;
  const bool ideal = i0.collision_free_ratio > i1.collision_free_ratio &&
                     i0.avg_collisions_per_ep < i1.avg_collisions_per_ep;
  return {cf && col && ideal,
          fmt("noisy beta0 cf %.2f col %.2f vs beta1 cf %.2f col %.2f", n0.collision_free_ratio,
              n0.avg_collisions_per_ep, n1.collision_free_ratio, n1.avg_collisions_per_ep) +
              fmt("; ideal beta0 cf %.2f col %.2f vs beta1 cf %.2f col %.2f", i0.collision_free_ratio,
                  i0.avg_collisions_per_ep, i1.collision_free_ratio, i1.avg_collisions_per_ep)};
}

Outcome mismatch_trend() {
  const std::array<InteractionModel, 2> models{FixedHarnessParams{}, DelayedHarnessParams{}};
  MismatchOptions mo;
  mo.seeds = 4;
  const auto m = model_mismatch_eval(
      [&](int i) {
        GreedyConfig g;
        g.believed_model = models[static_cast<std::size_t>(i)];
        return std::make_unique<GreedyPolicy>(g);
      },
      models, corridor_suite(), mo);
  return {m[0][0] > m[0][1] && m[1][1] > m[1][0],
          fmt("fixed row: matched %.2f vs %.2f; delayed row: matched %.2f vs %.2f", m[0][0], m[0][1], m[1][1],
              m[1][0])};
}

EpisodeResult single_episode(const Scenario& sc, WayfindEnv*& env_out, std::unique_ptr<WayfindEnv>& holder) {
  EpisodeSetup setup;
  setup.jitter = false;
  holder = std::make_unique<WayfindEnv>(make_env_config(sc, DelayedHarnessParams{}, setup, 0));
  env_out = holder.get();
  GreedyPolicy g;
  return run_episode(g, *holder, ShieldConfig{}, 0);
}

Outcome orientation_recovery() {
  const Scenario sc = orientation_error_scenario();
  WayfindEnv* env = nullptr;
  std::unique_ptr<WayfindEnv> holder;
  const auto ep = single_episode(sc, env, holder);
  int first_ok = -1;
  double travel = 0.0;
  const Vec2 h0 = initial_state(DelayedHarnessParams{}, sc.start).human.translation();
  for (const auto& r : ep.trace) {
    if (first_ok < 0 && std::abs(wrap_angle(r.theta_bar - r.human.theta)) < sc.reward.b) first_ok = r.step;
    travel = std::max(travel, r.human.x - h0.x);
  }
  const bool ok = first_ok >= 0 && first_ok <= 30 && travel >= 5.0 && ep.collisions == 0;
  return {ok, fmt("heading error below b at step %.0f, human travels %.2f m, %.0f collisions", first_ok, travel,
                  ep.collisions)};
}

Outcome early_turn() {
  const Scenario sc = early_turn_scenario();
  const double plane = junction_plane(early_turn_layout());
  WayfindEnv* env = nullptr;
  std::unique_ptr<WayfindEnv> holder;
  const auto ep = single_episode(sc, env, holder);
  double best = -1e9;
  for (const auto& r : ep.trace) best = std::max(best, r.human.y);
  return {best > plane && ep.collisions == 0,
          fmt("human max y %.2f vs junction plane %.2f, %.0f collisions", best, plane, ep.collisions)};
}

Outcome reward_examples() {
  const RewardParams p;
  const Vec2 start{0, 0};
  const double r1 = compute_reward(start, {1.0, 0, 0}, {1.25, 0, 0}, 0.0, false, p);
  const double r2 = compute_reward(start, {1, 0, p.b}, {1, 0, p.b + 0.1}, 0.0, false, p);
  const double r3 = compute_reward(start, {1, 0, 0}, {1, 0, 0}, 0.0, true, p);
  const bool ok = std::abs(r1 - 0.24) < 1e-12 && std::abs(r2 - (-0.1 - p.lambda)) < 1e-12 &&
                  std::abs(r3 - (-1.0 - p.lambda)) < 1e-12;
  return {ok, fmt("r = %.12f, %.12f, %.12f", r1, r2, r3)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  std::random_device rd;
  const fs::path root = fs::temp_directory_path() / ("dyadnav_accept_" + std::to_string(rd()));
  fs::create_directories(root);
  const std::vector<std::vector<std::string>> runs{
      {"generate-data", "--trajectories", "1,4", "--repeats", "1", "--seed", "3"},
      {"simulate", "--scenario", "early_turn", "--noise", "--jitter", "--seed", "11"},
      {"eval-shield", "--episodes", "5", "--seed", "4"},
      {"eval-mismatch", "--seeds", "1", "--seed", "2"},
      {"train", "--iterations", "4", "--seed", "8"},
  };
  int files = 0, mismatched = 0, failed = 0;
  std::ostringstream sink;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const fs::path a = root / ("a" + std::to_string(i)), b = root / ("b" + std::to_string(i));
    auto args = runs[i];
    args.insert(args.end(), {"--out", a.string()});
    if (dyadnav::run(args, sink, sink) != 0 ||
        dyadnav::run({"rerun", (a / "manifest.json").string(), "--out", b.string()}, sink, sink) != 0) {
      ++failed;
      continue;
    }
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (!e.is_regular_file()) continue;
      const auto ext = e.path().extension();
      if (ext != ".json" && ext != ".jsonl") continue;
      ++files;
      if (slurp(e.path()) != slurp(b / fs::relative(e.path(), a))) ++mismatched;
    }
  }
  // fit reads data produced above.
  const fs::path data = root / "a0" / "subjects" / "p1.jsonl";
  const fs::path fa = root / "fa", fb = root / "fb";
  if (dyadnav::run({"fit", "--data", data.string(), "--model", "all", "--starts", "2", "--out", fa.string()}, sink,
                   sink) != 0 ||
      dyadnav::run({"rerun", (fa / "manifest.json").string(), "--out", fb.string()}, sink, sink) != 0) {
    ++failed;
  } else {
    for (const char* f : {"params.json", "fit_report.json", "manifest.json"}) {
      ++files;
      if (slurp(fa / f) != slurp(fb / f)) ++mismatched;
    }
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  return {failed == 0 && mismatched == 0 && files > 0,
          fmt("6 subcommands, %.0f JSON files compared, %.0f differ, %.0f runs failed", files, mismatched, failed)};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"delayed harness alpha=0 equals fixed harness", 1, dh_limit},
      {"parameter recovery (20 seeds, median)", 120, parameter_recovery},
      {"model comparison ordering on validation data", 180, model_ordering},
      {"shield soundness on 1000 random convex scenes", 120, shield_soundness},
      {"shielding ablation trend (noisy and ideal lidar)", 300, shield_trend},
      {"interaction model mismatch trend", 600, mismatch_trend},
      {"orientation error recovery in a corridor", 10, orientation_recovery},
      {"early left cue before a T-junction", 10, early_turn},
      {"reward substitution examples", 1, reward_examples},
      {"CLI rerun from manifest is byte-identical", 300, cli_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = dt < c.budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s  %s: %s [%.2f s, budget %.0f s%s]\n", pass ? "PASS" : "FAIL", c.name.c_str(), o.detail.c_str(), dt,
                c.budget_s, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures;
}
