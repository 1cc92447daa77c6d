#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("dyadnav_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dyadnav::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> jsonl(const std::string& p) {
  std::vector<json> v;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) v.push_back(json::parse(line));
  return v;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext) ++n;
  return n;
}

}  // namespace

TEST_CASE("exit codes") {
  TempDir t;
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"simulate", "--beta", "lots"}).code == 2);
  CHECK(cli({"simulate", "--nonsense", "1"}).code == 2);
  CHECK(cli({"fit", "--out", t / "f"}).code == 2);
  const auto missing = cli({"fit", "--data", t / "nope.jsonl", "--out", t / "f"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("nope.jsonl") != std::string::npos);
  CHECK(cli({"generate-data", "--profiles", t / "nope.json", "--out", t / "g"}).code == 1);
  CHECK(cli({"simulate", "--policy", "linear", "--out", t / "s"}).code == 2);
  CHECK(cli({"simulate", "--scenario", t / "missing_scenario.json", "--out", t / "s"}).code == 1);
  CHECK(cli({"--version"}).code == 0);
  CHECK(cli({"--version"}).out == std::string(dyadnav::kVersion) + "\n");
}

TEST_CASE("config prints defaults and rejects unknown keys") {
  const auto r = cli({"config", "simulate"});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(j.at("simulate").at("beta") == 0.0);
  CHECK(j.at("simulate").at("scenario") == "orientation_error");
  CHECK(j.size() == 1u);
  const auto all = json::parse(cli({"config"}).out);
  CHECK(all.contains("fit"));
  CHECK(all.contains("serve"));
  CHECK(cli({"config", "nope"}).code == 2);

  TempDir t;
  std::ofstream(t / "bad.json") << R"({"bogus": 1})";
  CHECK(cli({"simulate", "--config", t / "bad.json", "--out", t / "s"}).code == 2);
}

TEST_CASE("generate-data writes one file per subject, trajectory and repeat") {
  TempDir t;
  const auto r = cli({"generate-data", "--seed", "4", "--out", t / "a"});
  REQUIRE(r.code == 0);
  CHECK(count_files(t.path / "a", ".jsonl") == 45u);
  CHECK(fs::exists(t.path / "a" / "manifest.json"));
  CHECK(fs::exists(t.path / "a" / "profiles.json"));
  CHECK(count_files(t.path / "a" / "subjects", ".jsonl") == 3u);
  REQUIRE(cli({"generate-data", "--seed", "4", "--out", t / "b"}).code == 0);
  for (const auto& e : fs::directory_iterator(t.path / "a"))
    if (e.is_regular_file()) CHECK(slurp(e.path().string()) == slurp((t.path / "b" / e.path().filename()).string()));

  // Custom profile file, one trajectory id, one repeat.
  std::ofstream(t / "p.json") << R"([{"id": "solo", "offset": [-0.6, 0.1, 0.0], "alpha": 0.7, "noise_sigma": 0.0}])";
  REQUIRE(cli({"generate-data", "--profiles", t / "p.json", "--trajectories", "2", "--repeats", "1", "--out",
               t / "c"})
              .code == 0);
  CHECK(count_files(t.path / "c", ".jsonl") == 1u);
  CHECK(fs::exists(t.path / "c" / "solo_traj2_rep1.jsonl"));
}

TEST_CASE("fit writes parameters and a report") {
  TempDir t;
  REQUIRE(cli({"generate-data", "--trajectories", "1,3", "--repeats", "1", "--out", t / "d"}).code == 0);
  const std::string data = t / "d/subjects/p1.jsonl";
  REQUIRE(fs::exists(data));

  SUBCASE("single model to a named file") {
    const auto r = cli({"fit", "--data", data, "--model", "delayed", "--starts", "2", "--out", t / "p.json"});
    REQUIRE(r.code == 0);
    const auto p = json::parse(slurp(t / "p.json"));
    CHECK(p.at("kind") == "delayed");
    CHECK(p.at("alpha").get<double>() >= 0.0);
    CHECK(p.at("alpha").get<double>() <= 1.0);
    CHECK(fs::exists(t.path / "manifest.json"));
    CHECK(fs::exists(t.path / "fit_report.json"));
  }
  SUBCASE("all models") {
    const auto r = cli({"fit", "--data", data, "--model", "all", "--starts", "2", "--out", t / "all"});
    REQUIRE(r.code == 0);
    for (const char* row : {"fixed_unopt", "fixed_opt", "delayed_opt", "rod_opt"})
      CHECK(r.out.find(row) != std::string::npos);
    const auto p = json::parse(slurp(t / "all/params.json"));
    CHECK(p.contains("fixed"));
    CHECK(p.contains("delayed"));
    CHECK(p.contains("rod"));
    // The params file feeds straight back in as a model.
    CHECK(cli({"simulate", "--model", t / "all/params.json", "--max-steps", "5", "--out", t / "s"}).code == 0);
  }
}

TEST_CASE("simulate corrects the orientation error in the trace") {
  TempDir t;
  const auto r = cli({"simulate", "--scenario", "orientation_error", "--out", t / "s"});
  REQUIRE(r.code == 0);
  const auto tr = jsonl(t / "s/trace.jsonl");
  REQUIRE(!tr.empty());
  const double b = 15.0 * 3.141592653589793 / 180.0;
  auto err = [](const json& rec) {
    double e = rec.at("theta_bar").get<double>() - rec.at("human")[2].get<double>();
    return std::abs(std::remainder(e, 2 * 3.141592653589793));
  };
  CHECK(err(tr.front()) > b - 1e-9);
  bool corrected = false;
  for (std::size_t i = 0; i < tr.size() && i < 30; ++i) corrected = corrected || err(tr[i]) < b;
  CHECK(corrected);
  const auto s = json::parse(slurp(t / "s/summary.json"));
  CHECK(s.at("collisions") == 0);
  const auto m = json::parse(slurp(t / "s/manifest.json"));
  CHECK(m.at("command") == "simulate");
  CHECK(m.at("config").at("beta") == 0.0);
}

TEST_CASE("simulate ends a stop-cue scenario with stop") {
  TempDir t;
  std::ofstream(t / "stop.json") << R"({
    "name": "stop_here",
    "world": {"extent": [12, 4], "cell_size": 0.05,
              "boxes": [[0, 0, 12, 0.25], [0, 3.75, 12, 4], [0, 0, 0.25, 4], [11.75, 0, 12, 4]]},
    "start": [1.5, 2.0, 0.0],
    "cues": [{"cue": "forward", "step": 0}, {"cue": "stop", "step": 6}],
    "max_steps": 40
  })";
  const auto r = cli({"simulate", "--scenario", t / "stop.json", "--out", t / "s"});
  REQUIRE(r.code == 0);
  const auto s = json::parse(slurp(t / "s/summary.json"));
  CHECK(s.at("final_action") == "stop");
  CHECK(s.at("final_cue") == "stop");
  CHECK(s.at("steps").get<int>() < 40);
}

TEST_CASE("no-shield sets beta to one") {
  TempDir t;
  REQUIRE(cli({"simulate", "--no-shield", "--max-steps", "3", "--out", t / "s"}).code == 0);
  const auto m = json::parse(slurp(t / "s/manifest.json"));
  CHECK(m.at("config").at("no_shield") == true);

  // Unshielded greedy runs into the corridor wall; shielded does not.
  REQUIRE(cli({"simulate", "--scenario", "ablation", "--no-shield", "--out", t / "u"}).code == 0);
  REQUIRE(cli({"simulate", "--scenario", "ablation", "--out", t / "v"}).code == 0);
  CHECK(json::parse(slurp(t / "u/summary.json")).at("collisions").get<int>() > 0);
  CHECK(json::parse(slurp(t / "v/summary.json")).at("collisions") == 0);
}

TEST_CASE("eval-shield prints one row per condition and beta, reproducibly") {
  TempDir t;
  const std::vector<std::string> base{"eval-shield", "--episodes", "6", "--seed", "2"};
  auto a = base;
  a.insert(a.end(), {"--out", t / "a"});
  auto b = base;
  b.insert(b.end(), {"--out", t / "b"});
  const auto ra = cli(a);
  REQUIRE(ra.code == 0);
  const auto rows = json::parse(slurp(t / "a/shield_eval.json")).at("rows");
  REQUIRE(rows.size() == 4u);
  CHECK(rows[0].at("condition") == "ideal");
  CHECK(rows[2].at("condition") == "noisy");
  CHECK(rows[1].at("beta_test") == 1.0);
  for (const auto& row : rows) {
    const double cf = row.at("metrics").at("collision_free_ratio").get<double>();
    CHECK(cf >= 0.0);
    CHECK(cf <= 1.0);
  }
  const auto rb = cli(b);
  REQUIRE(rb.code == 0);
  CHECK(ra.out == rb.out);
  CHECK(slurp(t / "a/shield_eval.json") == slurp(t / "b/shield_eval.json"));
}

TEST_CASE("rerun from a manifest reproduces outputs byte for byte") {
  TempDir t;
  std::ofstream(t / "cfg.json") << R"({"scenario": "early_turn", "lidar_sigma": 0.08})";
  REQUIRE(cli({"simulate", "--config", t / "cfg.json", "--noise", "--seed", "21", "--jitter", "--out", t / "a"})
              .code == 0);
  REQUIRE(cli({"rerun", t / "a/manifest.json", "--out", t / "b"}).code == 0);
  for (const char* f : {"trace.jsonl", "summary.json", "manifest.json"})
    CHECK(slurp(t / (std::string("a/") + f)) == slurp(t / (std::string("b/") + f)));
  const auto m = json::parse(slurp(t / "a/manifest.json"));
  CHECK(m.at("seed") == 21);
  CHECK(m.at("config").at("lidar_sigma") == 0.08);
  CHECK(m.at("config").at("scenario") == "early_turn");

  REQUIRE(cli({"train", "--iterations", "3", "--seed", "5", "--out", t / "c"}).code == 0);
  REQUIRE(cli({"rerun", t / "c/manifest.json", "--out", t / "d"}).code == 0);
  CHECK(slurp(t / "c/weights.json") == slurp(t / "d/weights.json"));
  CHECK(cli({"rerun", t / "missing.json", "--out", t / "e"}).code == 1);
}
