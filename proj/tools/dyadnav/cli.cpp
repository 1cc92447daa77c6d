#include "cli.hpp"

#include <cstdio>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "dyad/data.hpp"
#include "dyad/policy.hpp"
#include "dyad/rng.hpp"
#include "dyad/scenarios.hpp"
#include "dyad/session.hpp"
#include "json.hpp"
#include "server.hpp"

namespace dyadnav {

namespace {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;
using dyad::InteractionModel;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

ojson read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return ojson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw dyad::ParseError(path + ": " + e.what(), 0, 0);
  }
}

/// Run context: resolved configuration plus the output sink.
struct Ctx {
  std::string command;
  ojson cfg;
  fs::path out_dir;
  std::optional<fs::path> params_file;  // fit --out X.json
  std::ostream& out;
  std::vector<std::string> outputs;

  void write(const fs::path& rel, const std::string& content) {
    const fs::path p = out_dir / rel;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << content;
    outputs.push_back(rel.generic_string());
  }
  void write_json(const fs::path& rel, const ojson& j) { write(rel, j.dump(2) + "\n"); }

  const ojson& at(const char* key) const { return cfg.at(key); }
  double num(const char* key) const { return cfg.at(key).get<double>(); }
  int integer(const char* key) const { return cfg.at(key).get<int>(); }
  bool flag(const char* key) const { return cfg.at(key).get<bool>(); }
  std::string str(const char* key) const { return cfg.at(key).get<std::string>(); }
  std::uint64_t seed() const { return cfg.at("seed").get<std::uint64_t>(); }
};

struct Param {
  std::string key;
  ojson def;
  std::string help;
};

struct Command {
  std::string name;
  std::string help;
  std::vector<Param> params;
  std::function<void(ojson&)> prepare;  // embeds referenced files into the config
  std::function<void(Ctx&)> run;
  bool writes_outputs = true;
};

// Model values: kind name, inline object, or path to a JSON file (a model
// object, or an object keyed by kind as written by `fit --model all`).
InteractionModel resolve_model(const ojson& v, const std::string& prefer = "delayed") {
  if (v.is_object()) {
    if (v.contains("kind")) return dyad::model_from_json(v);
    if (v.contains(prefer)) return dyad::model_from_json(v.at(prefer));
    throw std::invalid_argument("model file has no \"kind\" and no \"" + prefer + "\" entry");
  }
  if (!v.is_string()) throw UsageError("model must be a kind name, object or file");
  const std::string s = v.get<std::string>();
  if (s.size() > 5 && s.substr(s.size() - 5) == ".json") return resolve_model(read_json_file(s), prefer);
  ojson j;
  try {
    j["kind"] = std::string(dyad::model_kind_name(dyad::parse_model_kind(s)));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return dyad::model_from_json(j);
}

void embed_model(ojson& cfg, const char* key) {
  if (!cfg.contains(key) || cfg[key].is_null()) return;
  cfg[key] = dyad::to_json(resolve_model(cfg[key]));
}

void embed_weights(ojson& cfg) {
  if (!cfg.contains("weights") || cfg["weights"].is_null()) return;
  if (cfg["weights"].is_string()) cfg["weights"] = read_json_file(cfg["weights"].get<std::string>());
  cfg["weights"] = dyad::to_json(dyad::policy_params_from_json(cfg["weights"]));
}

dyad::ShieldConfig shield_from(const Ctx& c) {
  dyad::ShieldConfig s;
  s.beta = c.flag("no_shield") ? 1.0 : c.num("beta");
  s.margin = c.num("margin");
  s.fallback = dyad::parse_fallback(c.str("fallback"));
  dyad::validate(s);
  return s;
}

std::unique_ptr<dyad::Policy> make_policy(const Ctx& c, const std::optional<InteractionModel>& believed) {
  const std::string kind = c.str("policy");
  if (kind == "greedy") {
    dyad::GreedyConfig g;
    g.believed_model = believed;
    return std::make_unique<dyad::GreedyPolicy>(g);
  }
  if (kind == "linear") {
    if (c.at("weights").is_null()) throw UsageError("--policy linear needs --weights");
    return std::make_unique<dyad::LinearPolicy>(dyad::policy_params_from_json(c.at("weights")), believed, true);
  }
  throw UsageError("unknown policy: " + kind + " (greedy, linear)");
}

ojson metrics_row(const dyad::EvalMetrics& m) { return dyad::to_json(m); }

// ---------------------------------------------------------------- fit

ojson fit_report_json(const dyad::FitReport& r) {
  ojson j;
  j["kind"] = std::string(dyad::model_kind_name(r.kind));
  j["params"] = dyad::to_json(r.params);
  j["train_rmse_mm"] = r.train_rmse_mm;
  j["per_trajectory_rmse_mm"] = r.per_trajectory_rmse_mm;
  j["iterations"] = r.iterations;
  j["best_start"] = r.best_start;
  ojson starts = ojson::array();
  for (const auto& s : r.starts) {
    ojson e;
    e["point"] = s.point;
    e["best_point"] = s.best_point;
    e["best_value"] = s.best_value;
    e["iterations"] = s.iterations;
    starts.push_back(e);
  }
  j["starts"] = starts;
  return j;
}

void cmd_fit(Ctx& c) {
  std::vector<std::vector<dyad::DyadTrajectory>> subjects;
  std::vector<dyad::DyadTrajectory> pooled;
  for (const auto& p : c.at("data")) {
    subjects.push_back(dyad::load_trajectories(p.get<std::string>()));
    pooled.insert(pooled.end(), subjects.back().begin(), subjects.back().end());
  }
  if (pooled.empty()) throw std::runtime_error("no trajectories in the data files");

  dyad::FitOptions fo;
  fo.starts = c.integer("starts");
  fo.seed = c.seed();
  fo.tolerance = c.num("tolerance");
  fo.max_evaluations = c.integer("max_evaluations");

  const std::string model = c.str("model");
  std::vector<dyad::ModelKind> kinds;
  if (model == "all")
    kinds = {dyad::ModelKind::Fixed, dyad::ModelKind::Delayed, dyad::ModelKind::RotatingRod};
  else
    kinds = {dyad::parse_model_kind(model)};

  ojson params = ojson::object();
  ojson report;
  report["trajectories"] = pooled.size();
  report["models"] = ojson::array();
  std::vector<std::pair<std::string, double>> rows;
  if (model == "all") {
    const InteractionModel unopt = dyad::unoptimized_fixed(pooled);
    rows.emplace_back("fixed_unopt", dyad::mean_rollout_rmse(unopt, pooled));
    ojson u;
    u["kind"] = "fixed_unopt";
    u["params"] = dyad::to_json(unopt);
    u["train_rmse_mm"] = rows.back().second;
    report["models"].push_back(u);
  }
  for (auto k : kinds) {
    const dyad::FitReport r = dyad::fit(k, pooled, fo);
    const std::string name(dyad::model_kind_name(k));
    params[name] = dyad::to_json(r.params);
    report["models"].push_back(fit_report_json(r));
    rows.emplace_back(name + "_opt", r.train_rmse_mm);
  }

  c.out << pad("model", 16) << "train_rmse_mm\n";
  for (const auto& [n, v] : rows) c.out << pad(n, 16) << fmt("%.1f", v) << "\n";

  if (c.flag("per_subject")) {
    if (subjects.size() < 2) throw UsageError("--per-subject needs one --data file per subject (at least 2)");
    const auto cmp = dyad::compare_models(subjects, fo);
    ojson rowsj = ojson::array();
    c.out << "\n" << pad("model", 16) << pad("train_rmse_mm", 16) << "val_rmse_mm\n";
    for (const auto& r : cmp) {
      ojson e;
      e["model"] = r.name;
      e["train_rmse_mm"] = r.train_rmse_mm;
      e["val_rmse_mm"] = r.val_rmse_mm;
      rowsj.push_back(e);
      c.out << pad(r.name, 16) << pad(fmt("%.1f", r.train_rmse_mm), 16) << fmt("%.1f", r.val_rmse_mm) << "\n";
    }
    report["comparison"] = rowsj;
  }

  const ojson params_out = kinds.size() == 1 ? params.begin().value() : params;
  if (c.params_file) {
    c.write(c.params_file->filename(), params_out.dump(2) + "\n");
  } else {
    c.write_json("params.json", params_out);
  }
  c.write_json("fit_report.json", report);
}

// ---------------------------------------------------------------- simulate

dyad::EpisodeSetup setup_from(const Ctx& c, bool noisy) {
  dyad::EpisodeSetup s;
  if (noisy) s.noise = dyad::SensorNoise{c.num("lidar_sigma"), 0};
  s.jitter = c.flag("jitter");
  return s;
}

void cmd_simulate(Ctx& c) {
  const auto suite = dyad::load_suite(c.str("scenario"));
  const int idx = c.integer("scenario_index");
  if (idx < 0 || idx >= static_cast<int>(suite.size()))
    throw UsageError("scenario_index out of range (suite has " + std::to_string(suite.size()) + ")");
  dyad::Scenario sc = suite[static_cast<std::size_t>(idx)];
  if (c.integer("max_steps") > 0) sc.max_steps = c.integer("max_steps");
  const InteractionModel model = resolve_model(c.at("model"));
  std::optional<InteractionModel> believed;
  if (!c.at("believed_model").is_null()) believed = resolve_model(c.at("believed_model"));
  const dyad::ShieldConfig shield = shield_from(c);

  dyad::WayfindEnv env(dyad::make_env_config(sc, model, setup_from(c, c.flag("noise")), c.seed()));
  auto policy = make_policy(c, believed);
  const dyad::EpisodeResult ep = dyad::run_episode(*policy, env, shield, c.seed());

  std::ostringstream trace;
  dyad::write_trace(trace, ep.trace, env.catalog());
  c.write("trace.jsonl", trace.str());

  ojson s;
  s["scenario"] = sc.name;
  s["steps"] = ep.steps;
  s["collisions"] = ep.collisions;
  s["collision_free"] = ep.collisions == 0;
  s["total_reward"] = ep.total_reward;
  s["final_action"] = ep.trace.empty() ? ojson(nullptr) : ojson(env.catalog()[ep.trace.back().action].name);
  s["final_cue"] = std::string(dyad::cue_name(env.active_cue()));
  const auto& last = env.state();
  s["final_robot"] = {last.robot.x, last.robot.y, last.robot.theta};
  s["final_human"] = {last.human.x, last.human.y, last.human.theta};
  c.write_json("summary.json", s);
  c.out << sc.name << ": steps " << ep.steps << ", collisions " << ep.collisions << ", reward "
        << fmt("%.3f", ep.total_reward) << "\n";
}

// ---------------------------------------------------------------- eval-shield

void cmd_eval_shield(Ctx& c) {
  const auto suite = dyad::load_suite(c.str("suite"));
  const InteractionModel model = resolve_model(c.at("model"));
  const bool train = c.flag("train");
  std::vector<std::string> conditions;
  for (const auto& v : c.at("conditions")) {
    const std::string cond = v.get<std::string>();
    if (cond != "ideal" && cond != "noisy") throw UsageError("condition must be ideal or noisy: " + cond);
    conditions.push_back(cond);
  }

  ojson rows = ojson::array();
  c.out << pad("condition", 11) << pad("train", 14) << pad("beta_test", 11) << pad("collision_free", 16)
        << pad("avg_collisions", 16) << "mean_reward\n";
  for (const auto& cond : conditions) {
    const dyad::EpisodeSetup setup = setup_from(c, cond == "noisy");
    struct Row {
      std::string label;
      std::optional<double> beta_train;
      std::function<std::unique_ptr<dyad::Policy>()> make;
      bool diverged = false;
      std::string diagnostic;
    };
    std::vector<Row> policies;
    if (!train) {
      const std::string kind = c.str("policy");
      if (kind == "linear" && c.at("weights").is_null()) throw UsageError("--policy linear needs --weights");
      policies.push_back({kind, std::nullopt, [&c] { return make_policy(c, std::nullopt); }, false, {}});
    } else {
      const auto train_suite = dyad::load_suite(c.str("train_suite"));
      for (const auto& bt : c.at("betas_train")) {
        dyad::TrainOptions to;
        to.model = model;
        to.shield.beta = bt.get<double>();
        to.setup = setup;
        to.iterations = c.integer("train_iterations");
        to.seed = dyad::derive_seed(c.seed(), 0x7EA1);
        const dyad::TrainResult tr = dyad::train_linear(train_suite, to);
        const std::string label = "beta_train=" + fmt("%.2g", to.shield.beta);
        c.write_json("weights_" + cond + "_beta" + fmt("%.2g", to.shield.beta) + ".json", dyad::to_json(tr.params));
        auto params = tr.params;
        policies.push_back({label, to.shield.beta,
                            [params] { return std::make_unique<dyad::LinearPolicy>(params, std::nullopt, true); },
                            tr.diverged, tr.diagnostic});
      }
    }
    for (const auto& p : policies) {
      for (const auto& bv : c.at("betas_test")) {
        dyad::EvalOptions eo;
        eo.env_model = model;
        eo.shield.beta = bv.get<double>();
        eo.setup = setup;
        eo.n_episodes = c.integer("episodes");
        eo.seed = c.seed();
        const auto m = dyad::evaluate(p.make, suite, eo).metrics;
        ojson r;
        r["condition"] = cond;
        r["policy"] = p.label;
        r["beta_train"] = p.beta_train ? ojson(*p.beta_train) : ojson(nullptr);
        r["beta_test"] = eo.shield.beta;
        r["metrics"] = metrics_row(m);
        r["diverged"] = p.diverged;
        if (p.diverged) r["diagnostic"] = p.diagnostic;
        rows.push_back(r);
        c.out << pad(cond, 11) << pad(p.label, 14) << pad(fmt("%.2g", eo.shield.beta), 11)
              << pad(fmt("%.2f", m.collision_free_ratio), 16) << pad(fmt("%.2f", m.avg_collisions_per_ep), 16)
              << fmt("%.3f", m.mean_reward) << (p.diverged ? "  (diverges)" : "") << "\n";
      }
    }
  }
  ojson res;
  res["suite"] = c.str("suite");
  res["rows"] = rows;
  c.write_json("shield_eval.json", res);
}

// ---------------------------------------------------------------- eval-mismatch

void cmd_eval_mismatch(Ctx& c) {
  const auto suite = dyad::load_suite(c.str("suite"));
  const auto& ms = c.at("models");
  if (ms.size() != 2) throw UsageError("--models needs exactly two entries");
  const std::array<InteractionModel, 2> models{resolve_model(ms[0]), resolve_model(ms[1])};
  dyad::MismatchOptions mo;
  mo.shield.beta = c.num("beta");
  mo.seeds = c.integer("seeds");
  mo.seed = c.seed();
  const std::string kind = c.str("policy");

  std::array<std::optional<dyad::PolicyParams>, 2> trained;
  if (kind == "linear") {
    for (int i = 0; i < 2; ++i) {
      dyad::TrainOptions to;
      to.model = models[static_cast<std::size_t>(i)];
      to.shield = mo.shield;
      to.iterations = c.integer("train_iterations");
      to.seed = dyad::derive_seed(c.seed(), static_cast<std::uint64_t>(i));
      trained[static_cast<std::size_t>(i)] = dyad::train_linear(suite, to).params;
    }
  } else if (kind != "greedy") {
    throw UsageError("unknown policy: " + kind + " (greedy, linear)");
  }
  const auto m = dyad::model_mismatch_eval(
      [&](int i) -> std::unique_ptr<dyad::Policy> {
        const auto& mi = models[static_cast<std::size_t>(i)];
        if (trained[static_cast<std::size_t>(i)])
          return std::make_unique<dyad::LinearPolicy>(*trained[static_cast<std::size_t>(i)], mi, true);
        dyad::GreedyConfig g;
        g.believed_model = mi;
        return std::make_unique<dyad::GreedyPolicy>(g);
      },
      models, suite, mo);

  std::array<std::string, 2> names;
  for (int i = 0; i < 2; ++i) names[static_cast<std::size_t>(i)] = dyad::model_kind_name(dyad::kind_of(models[static_cast<std::size_t>(i)]));
  c.out << pad("train \\ test", 14) << pad(names[0], 12) << names[1] << "\n";
  ojson matrix = ojson::array();
  for (int i = 0; i < 2; ++i) {
    c.out << pad(names[static_cast<std::size_t>(i)], 14) << pad(fmt("%.3f", m[static_cast<std::size_t>(i)][0]), 12)
          << fmt("%.3f", m[static_cast<std::size_t>(i)][1]) << "\n";
    matrix.push_back({m[static_cast<std::size_t>(i)][0], m[static_cast<std::size_t>(i)][1]});
  }
  ojson res;
  res["models"] = {dyad::to_json(models[0]), dyad::to_json(models[1])};
  res["policy"] = kind;
  res["mean_reward"] = matrix;
  c.write_json("mismatch.json", res);
}

// ---------------------------------------------------------------- train

void cmd_train(Ctx& c) {
  const auto suite = dyad::load_suite(c.str("suite"));
  dyad::TrainOptions to;
  to.model = resolve_model(c.at("model"));
  to.shield.beta = c.num("beta");
  to.setup = setup_from(c, c.flag("noise"));
  to.iterations = c.integer("iterations");
  to.episodes_per_iteration = c.integer("episodes_per_iteration");
  to.learning_rate = c.num("learning_rate");
  to.discount = c.num("discount");
  to.max_steps = c.integer("max_steps");
  to.seed = c.seed();
  const auto r = dyad::train_linear(suite, to);
  c.write_json("weights.json", dyad::to_json(r.params));
  ojson curve = ojson::array();
  for (const auto& it : r.curve) {
    ojson e;
    e["iteration"] = it.iteration;
    e["mean_reward"] = it.mean_reward;
    e["entropy"] = it.entropy;
    e["permitted_mass"] = it.permitted_mass;
    e["grad_norm"] = it.grad_norm;
    curve.push_back(e);
  }
  ojson log;
  log["baseline_reward"] = r.baseline_reward;
  log["diverged"] = r.diverged;
  log["diagnostic"] = r.diagnostic;
  log["curve"] = curve;
  c.write_json("training.json", log);
  c.out << "iterations " << r.curve.size() << ", first reward " << fmt("%.3f", r.curve.front().mean_reward)
        << ", last reward " << fmt("%.3f", r.curve.back().mean_reward) << "\n";
  if (r.diverged) c.out << "diverged: " << r.diagnostic << "\n";
}

// ---------------------------------------------------------------- generate-data

ojson profiles_json(const std::vector<dyad::SubjectProfile>& ps) {
  ojson a = ojson::array();
  for (const auto& p : ps) {
    ojson e;
    e["id"] = p.id;
    const auto& o = p.params.default_offset;
    e["offset"] = {o.x, o.y, o.theta};
    e["alpha"] = p.params.alpha;
    e["noise_sigma"] = p.noise_sigma;
    a.push_back(e);
  }
  return a;
}

std::vector<dyad::SubjectProfile> profiles_from(const ojson& a) {
  std::vector<dyad::SubjectProfile> out;
  for (const auto& p : a) {
    dyad::SubjectProfile prof;
    prof.id = p.at("id").get<std::string>();
    const auto o = p.at("offset").get<std::vector<double>>();
    if (o.size() != 3) throw dyad::ParseError("profile offset must be [dx, dy, dtheta]", 0, 0);
    prof.params.default_offset = {o[0], o[1], dyad::wrap_angle(o[2])};
    prof.params.alpha = p.at("alpha").get<double>();
    prof.noise_sigma = p.value("noise_sigma", 0.0);
    dyad::validate(InteractionModel(prof.params));
    out.push_back(std::move(prof));
  }
  return out;
}

void cmd_generate_data(Ctx& c) {
  const auto profiles = profiles_from(c.at("profiles"));
  const int repeats = c.integer("repeats");
  if (repeats < 1) throw UsageError("repeats must be >= 1");
  std::vector<int> ids;
  for (const auto& v : c.at("trajectories")) ids.push_back(v.get<int>());
  std::uint64_t k = 0;
  for (const auto& prof : profiles) {
    std::vector<dyad::DyadTrajectory> all;
    for (int rep = 1; rep <= repeats; ++rep) {
      for (int id : ids) {
        const auto robot = dyad::script_trajectory(id, c.num("step_length"), c.num("turn_step"));
        all.push_back(dyad::synthesize_dyad(prof, robot, dyad::derive_seed(c.seed(), k++), c.num("dt")));
        std::ostringstream f;
        dyad::write_trajectory(f, all.back());
        c.write(prof.id + "_traj" + std::to_string(id) + "_rep" + std::to_string(rep) + ".jsonl", f.str());
      }
    }
    std::ostringstream f;
    for (std::size_t i = 0; i < all.size(); ++i) dyad::write_trajectory(f, all[i], static_cast<int>(i));
    c.write(fs::path("subjects") / (prof.id + ".jsonl"), f.str());
  }
  c.write_json("profiles.json", profiles_json(profiles));
  c.out << "wrote " << profiles.size() * ids.size() * static_cast<std::size_t>(repeats) << " trajectory files\n";
}

// ---------------------------------------------------------------- serve

void cmd_serve(Ctx& c) {
  ServeOptions so;
  so.host = c.str("host");
  so.port = c.integer("port");
  if (!c.at("world").is_null()) so.defaults.world = c.str("world");
  so.defaults.scenario = c.str("scenario");
  so.defaults.tick_ms = c.integer("tick_ms");
  so.defaults.shield.beta = c.num("beta");
  so.defaults.seed = c.seed();
  if (!c.at("static_dir").is_null()) so.static_dir = c.str("static_dir");
  // Fail fast on a bad default world.
  (void)dyad::session_env_config(so.defaults);
  SessionServer server(so);
  const int port = server.bind();
  c.out << "listening on http://" << so.host << ":" << port << std::endl;
  server.listen();
}

// ---------------------------------------------------------------- registry

const std::vector<Command>& commands() {
  static const std::vector<Command> cmds = [] {
    auto common_policy = std::vector<Param>{
        {"policy", "greedy", "greedy or linear"},
        {"weights", nullptr, "linear policy weights (JSON file)"},
        {"model", "delayed", "environment interaction model: kind or params JSON file"},
        {"beta", 0.0, "shield suppression factor"},
        {"no_shield", false, "disable shielding (beta = 1)"},
        {"margin", 0.05, "shield inflation of the next-step footprints (m)"},
        {"fallback", "stop", "stop or least_unsafe"},
        {"lidar_sigma", 0.05, "lidar noise sigma (m)"},
        {"jitter", false, "perturb the start pose"},
        {"seed", 0, "random seed"},
    };
    std::vector<Command> v;

    v.push_back({"fit",
                 "fit interaction models to trajectory data",
                 {{"data", ojson::array(), "trajectory JSONL file (repeatable; one per subject with --per-subject)"},
                  {"model", "delayed", "fixed, delayed, rod or all"},
                  {"per_subject", false, "per-subject vs pooled comparison on a 2:1 split"},
                  {"starts", 8, "simplex restarts"},
                  {"max_evaluations", 4000, "objective evaluations per start"},
                  {"tolerance", 1e-4, "simplex diameter tolerance"},
                  {"seed", 0, "random seed"}},
                 [](ojson& cfg) {
                   if (cfg["data"].empty()) throw UsageError("--data is required");
                   const std::string m = cfg["model"].get<std::string>();
                   if (m != "all") {
                     try {
                       cfg["model"] = std::string(dyad::model_kind_name(dyad::parse_model_kind(m)));
                     } catch (const std::invalid_argument& e) {
                       throw UsageError(e.what());
                     }
                   }
                 },
                 cmd_fit});

    auto sim = common_policy;
    sim.insert(sim.begin(), {{"scenario", "orientation_error", "suite name or scenario JSON file"},
                             {"scenario_index", 0, "scenario within the suite"},
                             {"believed_model", nullptr, "model the policy predicts with (default: env model)"},
                             {"noise", false, "noisy lidar"},
                             {"max_steps", 0, "episode cap (0: scenario default)"}});
    v.push_back({"simulate", "run one episode and write its trace", sim,
                 [](ojson& cfg) {
                   embed_model(cfg, "model");
                   embed_model(cfg, "believed_model");
                   embed_weights(cfg);
                 },
                 cmd_simulate});

    v.push_back({"eval-shield",
                 "shielding ablation over a scenario suite",
                 {{"suite", "ablation", "suite name or scenario JSON file"},
                  {"policy", "greedy", "greedy or linear (with --weights)"},
                  {"weights", nullptr, "linear policy weights (JSON file)"},
                  {"model", "delayed", "interaction model"},
                  {"conditions", {"ideal", "noisy"}, "sensing conditions"},
                  {"betas_test", {0.0, 1.0}, "test-time suppression factors"},
                  {"train", false, "train linear policies per beta_train instead of a fixed policy"},
                  {"betas_train", {0.0, 1.0}, "training suppression factors"},
                  {"train_suite", "corridor", "training suite"},
                  {"train_iterations", 200, "training iterations"},
                  {"episodes", 100, "evaluation episodes per row"},
                  {"lidar_sigma", 0.05, "lidar noise sigma (m)"},
                  {"jitter", true, "perturb start poses"},
                  {"seed", 0, "random seed"}},
                 [](ojson& cfg) {
                   embed_model(cfg, "model");
                   embed_weights(cfg);
                 },
                 cmd_eval_shield});

    v.push_back({"eval-mismatch",
                 "train/test interaction model mismatch matrix",
                 {{"suite", "corridor", "suite name or scenario JSON file"},
                  {"models", {"fixed", "delayed"}, "the two interaction models"},
                  {"policy", "greedy", "greedy (plans with the train model) or linear (trained under it)"},
                  {"beta", 0.0, "shield suppression factor"},
                  {"seeds", 4, "episodes per scenario"},
                  {"train_iterations", 200, "training iterations for --policy linear"},
                  {"seed", 0, "random seed"}},
                 [](ojson& cfg) {
                   for (auto& m : cfg["models"]) m = dyad::to_json(resolve_model(m));
                 },
                 cmd_eval_mismatch});

    v.push_back({"train",
                 "train the linear policy with the shield in the loop",
                 {{"suite", "single", "suite name or scenario JSON file"},
                  {"model", "delayed", "interaction model"},
                  {"beta", 0.5, "training suppression factor"},
                  {"iterations", 200, "policy-gradient iterations"},
                  {"episodes_per_iteration", 4, "episodes per iteration"},
                  {"learning_rate", 0.05, "step size"},
                  {"discount", 0.99, "return discount"},
                  {"max_steps", 60, "episode cap"},
                  {"noise", false, "noisy lidar"},
                  {"lidar_sigma", 0.05, "lidar noise sigma (m)"},
                  {"jitter", true, "perturb start poses"},
                  {"seed", 0, "random seed"}},
                 [](ojson& cfg) { embed_model(cfg, "model"); },
                 cmd_train});

    v.push_back({"generate-data",
                 "synthesize dyad trajectories for subject profiles",
                 {{"profiles", nullptr, "profile JSON file (default: three built-in subjects)"},
                  {"trajectories", {1, 2, 3, 4, 5}, "scripted trajectory ids"},
                  {"repeats", 3, "repeats per trajectory"},
                  {"step_length", 0.1, "robot step (m)"},
                  {"turn_step", 10.0, "in-place turn step (deg)"},
                  {"dt", 0.1, "sample period (s)"},
                  {"seed", 0, "random seed"}},
                 [](ojson& cfg) {
                   if (cfg["profiles"].is_null())
                     cfg["profiles"] = profiles_json(dyad::default_profiles());
                   else if (cfg["profiles"].is_string())
                     cfg["profiles"] = profiles_json(dyad::load_profiles(cfg["profiles"].get<std::string>()));
                   else
                     cfg["profiles"] = profiles_json(profiles_from(cfg["profiles"]));
                 },
                 cmd_generate_data});

    Command serve{"serve",
                  "serve live sessions over HTTP",
                  {{"port", 8080, "TCP port"},
                   {"host", "127.0.0.1", "bind address"},
                   {"world", nullptr, "world file (ASCII or JSON)"},
                   {"scenario", "junction", "default scenario when no world is given"},
                   {"static_dir", nullptr, "directory served at /"},
                   {"tick_ms", 100, "tick period (ms)"},
                   {"beta", 0.0, "shield suppression factor"},
                   {"seed", 0, "random seed"}},
                  nullptr,
                  cmd_serve,
                  false};
    v.push_back(serve);
    return v;
  }();
  return cmds;
}

const Command* find_command(const std::string& name) {
  for (const auto& c : commands())
    if (c.name == name) return &c;
  return nullptr;
}

std::string flag_name(const std::string& key) {
  std::string s = key;
  for (auto& ch : s)
    if (ch == '_') ch = '-';
  return "--" + s;
}

ojson defaults_of(const Command& cmd) {
  ojson j;
  for (const auto& p : cmd.params) j[p.key] = p.def;
  return j;
}

ojson convert_scalar(const std::string& key, const ojson& def, const std::string& s) {
  try {
    std::size_t used = 0;
    if (def.is_number_integer() || def.is_number_unsigned()) {
      const long long v = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      if (key == "seed") return static_cast<std::uint64_t>(std::stoull(s));
      return v;
    }
    if (def.is_number_float()) {
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    }
  } catch (const std::exception&) {
    throw UsageError("invalid value for " + flag_name(key) + ": " + s);
  }
  return s;
}

/// Applies a config object onto defaults; unknown keys are usage errors.
void apply_config(const Command& cmd, ojson& cfg, const ojson& patch) {
  if (!patch.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [k, v] : patch.items()) {
    if (!cfg.contains(k)) throw UsageError("unknown config key for " + cmd.name + ": " + k);
    cfg[k] = v;
  }
}

ojson manifest_of(const Ctx& c) {
  ojson m;
  m["tool"] = "dyadnav";
  m["version"] = kVersion;
  m["versions"] = {{"dyadnav", kVersion}, {"nlohmann_json", "3.11.3"}, {"cli11", CLI11_VERSION}};
  m["command"] = c.command;
  m["seed"] = c.cfg.contains("seed") ? c.cfg["seed"] : ojson(nullptr);
  m["config"] = c.cfg;
  auto outs = c.outputs;
  std::sort(outs.begin(), outs.end());
  m["outputs"] = outs;
  return m;
}

int execute(const Command& cmd, ojson cfg, const std::string& out_arg, std::ostream& out) {
  if (cmd.prepare) cmd.prepare(cfg);
  Ctx c{cmd.name, cfg, {}, std::nullopt, out, {}};
  if (cmd.writes_outputs) {
    fs::path o = out_arg.empty() ? fs::path("runs") / cmd.name : fs::path(out_arg);
    if (cmd.name == "fit" && o.extension() == ".json") {
      c.params_file = o;
      c.out_dir = o.has_parent_path() ? o.parent_path() : fs::path(".");
    } else {
      c.out_dir = o;
    }
  }
  cmd.run(c);
  if (cmd.writes_outputs) {
    fs::create_directories(c.out_dir);
    std::ofstream f(c.out_dir / "manifest.json", std::ios::binary);
    f << manifest_of(c).dump(2) << "\n";
  }
  return 0;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dyadnav: human-robot dyad navigation toolkit", "dyadnav"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  struct Bound {
    const Command* cmd;
    CLI::App* sub;
    std::string config_file;
    std::string out;
    std::map<std::string, std::string> scalars;
    std::map<std::string, std::vector<std::string>> lists;
    std::map<std::string, bool> flags;
    std::map<std::string, CLI::Option*> opts;
  };
  std::vector<std::unique_ptr<Bound>> bound;
  for (const auto& cmd : commands()) {
    auto b = std::make_unique<Bound>();
    b->cmd = &cmd;
    b->sub = app.add_subcommand(cmd.name, cmd.help);
    b->sub->add_option("--config", b->config_file, "JSON config file (keys as below, underscores)");
    if (cmd.writes_outputs) b->sub->add_option("--out", b->out, "output directory (default runs/<command>)");
    for (const auto& p : cmd.params) {
      const std::string f = flag_name(p.key);
      if (p.def.is_boolean()) {
        b->flags[p.key] = false;
        b->opts[p.key] = b->sub->add_flag(f, b->flags[p.key], p.help);
      } else if (p.def.is_array()) {
        b->opts[p.key] = b->sub->add_option(f, b->lists[p.key], p.help)->delimiter(',');
      } else {
        b->opts[p.key] = b->sub->add_option(f, b->scalars[p.key], p.help);
      }
    }
    bound.push_back(std::move(b));
  }

  std::string manifest_path, rerun_out;
  auto* rerun = app.add_subcommand("rerun", "rerun a command from its manifest.json");
  rerun->add_option("manifest", manifest_path, "manifest.json of a previous run")->required();
  rerun->add_option("--out", rerun_out, "output directory")->required();

  std::string config_cmd;
  auto* config = app.add_subcommand("config", "print the default configuration of a command (or all)");
  config->add_option("command", config_cmd, "command name");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << "\n";
    return 2;
  }

  if (config->parsed()) {
    ojson all;
    for (const auto& cmd : commands())
      if (config_cmd.empty() || config_cmd == cmd.name) all[cmd.name] = defaults_of(cmd);
    if (all.empty()) throw UsageError("unknown command: " + config_cmd);
    out << all.dump(2) << "\n";
    return 0;
  }

  if (rerun->parsed()) {
    const ojson m = read_json_file(manifest_path);
    const std::string name = m.at("command").get<std::string>();
    const Command* cmd = find_command(name);
    if (!cmd || !cmd->writes_outputs) throw UsageError("manifest names an unknown command: " + name);
    ojson cfg = defaults_of(*cmd);
    apply_config(*cmd, cfg, m.at("config"));
    return execute(*cmd, cfg, rerun_out, out);
  }

  for (const auto& b : bound) {
    if (!b->sub->parsed()) continue;
    ojson cfg = defaults_of(*b->cmd);
    if (!b->config_file.empty()) apply_config(*b->cmd, cfg, read_json_file(b->config_file));
    for (const auto& p : b->cmd->params) {
      if (b->opts[p.key]->count() == 0) continue;
      if (p.def.is_boolean()) {
        cfg[p.key] = b->flags[p.key];
      } else if (p.def.is_array()) {
        ojson a = ojson::array();
        const ojson elem = p.def.empty() ? ojson("") : p.def[0];
        for (const auto& s : b->lists[p.key]) a.push_back(convert_scalar(p.key, elem, s));
        cfg[p.key] = a;
      } else {
        cfg[p.key] = convert_scalar(p.key, p.def, b->scalars[p.key]);
      }
    }
    return execute(*b->cmd, cfg, b->out, out);
  }
  return 2;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace dyadnav
