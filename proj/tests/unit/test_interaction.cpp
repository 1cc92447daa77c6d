#include <cmath>
#include <string>

#include "doctest.h"
#include "dyad/data.hpp"
#include "dyad/interaction.hpp"
#include "dyad/rng.hpp"

using namespace dyad;

namespace {

void check_pose(const Pose2& a, const Pose2& b, double tol = 1e-12) {
  CHECK(std::abs(a.x - b.x) <= tol);
  CHECK(std::abs(a.y - b.y) <= tol);
  CHECK(std::abs(wrap_angle(a.theta - b.theta)) <= tol);
}

Pose2 random_pose(Rng& rng, double span = 3.0) {
  return {rng.uniform(-span, span), rng.uniform(-span, span), rng.uniform(-kPi, kPi)};
}

void check_offset_invariant(const DyadState& s) {
  const Pose2 rel = relative(s.robot, s.human);
  CHECK(std::abs(rel.x - s.offset.x) <= 1e-9);
  CHECK(std::abs(rel.y - s.offset.y) <= 1e-9);
  CHECK(std::abs(wrap_angle(rel.theta - s.offset.theta)) <= 1e-9);
}

}  // namespace

TEST_CASE("fixed harness places the human along the heading") {
  check_pose(step_fixed({-0.9}, {0, 0, 0}), {-0.9, 0, 0});
  check_pose(step_fixed({-0.9}, {0, 0, kPi / 2}), {0, -0.9, kPi / 2});
  check_pose(step_fixed({0.0}, {1.3, -2.0, 0.4}), {1.3, -2.0, 0.4});
}

TEST_CASE("delayed harness worked example") {
  DelayedHarnessParams p{{-1, 0, 0}, 0.5};
  const auto s0 = DyadState::from_poses({0, 0, 0}, {-1, 0, 0});
  const auto s1 = step_delayed(p, s0, {0.5, 0, 0});
  check_pose(s1.offset, {-1.25, 0, 0});
  check_pose(s1.human, {-0.75, 0, 0});
  check_offset_invariant(s1);
}

TEST_CASE("delayed harness limits") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const Pose2 robot = random_pose(rng);
    const Pose2 human = compose(robot, {rng.uniform(-1, 0), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)});
    const auto s = DyadState::from_poses(robot, human);
    const Pose2 next = compose(robot, {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)});
    const Pose2 obar{rng.uniform(-1, 0), rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3)};

    // alpha = 0: the human snaps to the default offset.
    const auto snap = step_delayed({obar, 0.0}, s, next);
    check_pose(snap.human, compose(next, obar), 1e-12);
    check_offset_invariant(snap);

    // alpha = 1: the human does not move.
    const auto hold = step_delayed({obar, 1.0}, s, next);
    check_pose(hold.human, human, 1e-12);
    check_offset_invariant(hold);

    // alpha = 0 with a pure longitudinal offset is the fixed harness.
    const double d = rng.uniform(-1.5, 0);
    const auto dh = step_delayed({{d, 0, 0}, 0.0}, s, next);
    check_pose(dh.human, step_fixed({d}, next), 1e-9);
  }
}

TEST_CASE("delayed harness offsets converge geometrically with the robot held") {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const double alpha = rng.uniform(0, 1);
    const Pose2 obar{rng.uniform(-1, 0), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    const Pose2 robot = random_pose(rng);
    auto s = DyadState::from_poses(robot, compose(robot, {rng.uniform(-1.5, 0.5), rng.uniform(-1, 1), rng.uniform(-1, 1)}));
    const Pose2 o0 = s.offset;
    auto dist = [&](const Pose2& o) {
      return std::sqrt((o.x - obar.x) * (o.x - obar.x) + (o.y - obar.y) * (o.y - obar.y) +
                       std::pow(wrap_angle(o.theta - obar.theta), 2));
    };
    for (int k = 1; k <= 20; ++k) {
      s = step_delayed({obar, alpha}, s, robot);
      CHECK(dist(s.offset) <= std::pow(alpha, k) * dist(o0) + 1e-12);
    }
  }
}

TEST_CASE("rotating rod") {
  RotatingRodParams p{0.8, {}};
  SUBCASE("stationary robot leaves the human in place") {
    const auto s = initial_state(p, {1, 2, 0.3});
    const auto s1 = step_rotating_rod(p, s, s.robot);
    check_pose(s1.human, s.human, 1e-12);
  }
  SUBCASE("straight pull translates the human along the rod") {
    const auto s = DyadState::from_poses({0, 0, 0}, {-0.8, 0, 0});
    const auto s1 = step_rotating_rod(p, s, {0.1, 0, 0});
    check_pose(s1.human, {-0.7, 0, 0}, 1e-12);
    check_offset_invariant(s1);
  }
  SUBCASE("robot circling the human at rod length") {
    const Vec2 h{0.5, -0.2};
    auto pose_at = [&](double phi) { return Pose2{h.x + 0.8 * std::cos(phi), h.y + 0.8 * std::sin(phi), phi + kPi / 2}; };
    auto s = DyadState::from_poses(pose_at(0), {h.x, h.y, 0});
    for (int k = 1; k <= 90; ++k) {
      const double phi = deg2rad(k);
      s = step_rotating_rod(p, s, pose_at(phi));
      CHECK(std::abs(s.human.x - h.x) <= 1e-9);
      CHECK(std::abs(s.human.y - h.y) <= 1e-9);
      CHECK(std::abs(wrap_angle(s.human.theta - phi)) <= 1e-9);
      check_offset_invariant(s);
    }
  }
  SUBCASE("degenerate pivot keeps the previous direction") {
    const auto s = DyadState::from_poses({0, 0, 0}, {0, 0, 0.4});
    const auto s1 = step_rotating_rod(p, s, {0, 0, 0});
    CHECK(std::isfinite(s1.human.x));
    CHECK(std::isfinite(s1.human.theta));
  }
}

TEST_CASE("rollout_predict") {
  DelayedHarnessParams snap{{-0.7, -0.3, 0.1}, 0.0};
  const auto robot = script_trajectory(2, 0.1, 10);
  SUBCASE("single pose") {
    const Pose2 h0{-1, 0, 0};
    const auto out = rollout_predict(snap, std::span(robot).first(1), h0);
    REQUIRE(out.size() == 1);
    check_pose(out[0], h0);
  }
  SUBCASE("alpha = 0 follows the default offset") {
    const auto out = rollout_predict(snap, robot, compose(robot[0], snap.default_offset));
    REQUIRE(out.size() == robot.size());
    for (std::size_t i = 0; i < robot.size(); ++i) check_pose(out[i], compose(robot[i], snap.default_offset), 1e-12);
  }
  SUBCASE("matches hand iteration of step_delayed on a straight run") {
    DelayedHarnessParams p{{-0.7, -0.3, 0}, 0.6};
    std::vector<Pose2> straight;
    for (int i = 0; i <= 25; ++i) straight.push_back({0.1 * i, 0, 0});
    const Pose2 h0{-0.5, 0.2, 0.2};
    const auto out = rollout_predict(p, straight, h0);
    // Hand iteration in coordinates: heading stays 0, so frames are pure translations.
    double ox = h0.x, oy = h0.y, oth = h0.theta;
    for (std::size_t i = 1; i < straight.size(); ++i) {
      const double hatx = ox - 0.1;
      ox = 0.6 * hatx + 0.4 * -0.7;
      oy = 0.6 * oy + 0.4 * -0.3;
      oth = 0.6 * oth;
      CHECK(std::abs(out[i].x - (straight[i].x + ox)) <= 1e-12);
      CHECK(std::abs(out[i].y - oy) <= 1e-12);
      CHECK(std::abs(out[i].theta - oth) <= 1e-12);
    }
  }
}

TEST_CASE("trajectory_rmse") {
  std::vector<Pose2> a{{0, 0, 0}, {1, 0, 0}, {2, 1, 0.5}, {3, 1, 0}};
  CHECK(trajectory_rmse(a, a) == 0.0);
  std::vector<Pose2> shifted = a;
  for (auto& p : shifted) p.x += 0.1;
  CHECK(trajectory_rmse(shifted, a) == doctest::Approx(100.0));
  std::vector<Pose2> alt = a;
  for (std::size_t i = 0; i < alt.size(); ++i) {
    const double s = i % 2 ? -1.0 : 1.0;
    alt[i].x += s * 0.03;
    alt[i].y += s * 0.04;
  }
  CHECK(trajectory_rmse(alt, a) == doctest::Approx(50.0));
  CHECK_THROWS_AS(trajectory_rmse(std::span(a).first(2), a), std::invalid_argument);
}

TEST_CASE("fit recovers delayed-harness parameters from noise-free data") {
  SubjectProfile prof{"s", {{-0.7, -0.3, 0.0}, 0.8}, 0.0};
  std::vector<DyadTrajectory> data;
  for (int id = 1; id <= 5; ++id) data.push_back(synthesize_dyad(prof, script_trajectory(id), 1));
  const auto rep = fit(ModelKind::Delayed, data);
  const auto& p = std::get<DelayedHarnessParams>(rep.params);
  CHECK(std::abs(p.alpha - 0.8) <= 0.02);
  CHECK(std::abs(p.default_offset.x + 0.7) <= 0.01);
  CHECK(std::abs(p.default_offset.y + 0.3) <= 0.01);
  CHECK(rep.train_rmse_mm < 5.0);
  CHECK(rep.starts.size() == 8u);

  SUBCASE("deterministic") {
    const auto again = fit(ModelKind::Delayed, data);
    CHECK(again.train_rmse_mm == rep.train_rmse_mm);
    CHECK(std::get<DelayedHarnessParams>(again.params).alpha == p.alpha);
  }
  SUBCASE("the fixed harness fits delayed data no better") {
    const auto fixed = fit(ModelKind::Fixed, data);
    CHECK(fixed.train_rmse_mm >= rep.train_rmse_mm);
  }
}

TEST_CASE("fit input errors") {
  std::vector<DyadTrajectory> none;
  CHECK_THROWS_AS(fit(ModelKind::Delayed, none), std::invalid_argument);
  SubjectProfile prof{"s", {{-0.7, -0.3, 0.0}, 0.8}, 0.0};
  std::vector<DyadTrajectory> data{synthesize_dyad(prof, script_trajectory(1), 1),
                                   synthesize_dyad(prof, script_trajectory(2), 1)};
  data[1].human[3].x = std::nan("");
  try {
    fit(ModelKind::Delayed, data);
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("trajectory 1") != std::string::npos);
  }
}

TEST_CASE("model validation and names") {
  CHECK_THROWS_AS(validate(InteractionModel{DelayedHarnessParams{{-0.7, 0, 0}, 1.2}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(InteractionModel{FixedHarnessParams{-2.5}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(InteractionModel{RotatingRodParams{0.0, {}}}), std::invalid_argument);
  CHECK(parse_model_kind("rod") == ModelKind::RotatingRod);
  CHECK(parse_model_kind("rotating_rod") == ModelKind::RotatingRod);
  CHECK(model_kind_name(ModelKind::Delayed) == "delayed");
  CHECK_THROWS(parse_model_kind("spring"));
}

TEST_CASE("unoptimized fixed reads the first frame") {
  SubjectProfile prof{"s", {{-0.6, 0.2, 0.1}, 0.5}, 0.0};
  std::vector<DyadTrajectory> data{synthesize_dyad(prof, script_trajectory(1), 1)};
  const auto p = unoptimized_fixed(data);
  CHECK(p.alpha == 0.0);
  CHECK(p.default_offset.x == doctest::Approx(-0.6));
  CHECK(p.default_offset.y == doctest::Approx(0.2));
}
