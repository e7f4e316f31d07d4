#include "seer/sim.hpp"

#include <gtest/gtest.h>

namespace seer {
namespace {

TaskSpec make_spec(TaskKind kind, uint64_t seed) {
  TaskSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  return spec;
}

bool states_equal(const WorldState& a, const WorldState& b) {
  if (a.agent_pos != b.agent_pos || a.gripper_closed != b.gripper_closed ||
      a.step_count != b.step_count || a.objects.size() != b.objects.size()) {
    return false;
  }
  for (size_t i = 0; i < a.objects.size(); ++i) {
    if (a.objects[i].pos != b.objects[i].pos || a.objects[i].held != b.objects[i].held) return false;
  }
  if (a.obstacle.has_value() != b.obstacle.has_value()) return false;
  if (a.obstacle && a.obstacle->pos != b.obstacle->pos) return false;
  return a.target.pos == b.target.pos;
}

TEST(SimReset, DeterministicBitForBit) {
  TaskSpec spec = make_spec(TaskKind::push, 7);
  ResetResult a = reset(spec);
  ResetResult b = reset(spec);
  EXPECT_TRUE(states_equal(a.state, b.state));
  EXPECT_EQ(a.goal.values, b.goal.values);
}

TEST(SimReset, ObstacleOnSegment) {
  TaskSpec spec = make_spec(TaskKind::obstacle_push, 3);
  WorldState s = reset(spec).state;
  ASSERT_TRUE(s.obstacle.has_value());
  // Collinearity within 0.05 m: distance from the obstacle center to the
  // object-target segment.
  Vec2 a = s.objects[0].pos, b = s.target.pos, p = s.obstacle->pos;
  Vec2 ab = b - a;
  double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  double dist = (p - (a + t * ab)).norm();
  EXPECT_LT(dist, 0.05);
}

TEST(SimReset, GoalObservationShowsObjectAtTarget) {
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    TaskSpec spec = make_spec(TaskKind::pick_place, seed);
    ResetResult r = reset(spec);
    // goal obs: nearest-object slot (indices 2,3) must be within the target
    // radius of the target slot (indices 4,5).
    Vec2 obj(r.goal.values[2], r.goal.values[3]);
    Vec2 tgt(r.goal.values[4], r.goal.values[5]);
    EXPECT_LT((obj - tgt).norm(), spec.target_radius);
  }
}

TEST(SimReset, EntitiesInsideWorkspaceAndSeparated) {
  for (uint64_t seed = 0; seed < 50; ++seed) {
    for (TaskKind kind : {TaskKind::push, TaskKind::pick_place, TaskKind::obstacle_push}) {
      TaskSpec spec = make_spec(kind, seed);
      WorldState s = reset(spec).state;
      auto in01 = [](const Vec2& p) {
        return p.x() >= 0 && p.x() <= 1 && p.y() >= 0 && p.y() <= 1;
      };
      EXPECT_TRUE(in01(s.agent_pos));
      EXPECT_TRUE(in01(s.objects[0].pos));
      EXPECT_TRUE(in01(s.target.pos));
      EXPECT_GE((s.agent_pos - s.objects[0].pos).norm(), spec.min_separation);
      EXPECT_GE((s.objects[0].pos - s.target.pos).norm(), spec.min_separation);
    }
  }
}

TEST(SimReset, UnsatisfiableRangesRejected) {
  TaskSpec spec = make_spec(TaskKind::push, 1);
  spec.object_lo = spec.object_hi = Vec2(0.5, 0.5);
  spec.target_lo = spec.target_hi = Vec2(0.5, 0.5);  // always overlapping
  EXPECT_THROW(reset(spec), std::runtime_error);
}

TEST(SimStep, FreeMotionMovesOnlyAgent) {
  TaskSpec spec = make_spec(TaskKind::push, 5);
  WorldState s = reset(spec).state;
  s.agent_pos = Vec2(0.5, 0.5);
  s.objects[0].pos = Vec2(0.9, 0.9);
  WorldState n = step(s, Vec2(0.04, 0.0), false, spec);
  EXPECT_NEAR(n.agent_pos.x(), 0.54, 1e-12);
  EXPECT_NEAR(n.agent_pos.y(), 0.50, 1e-12);
  EXPECT_EQ(n.objects[0].pos, s.objects[0].pos);
  EXPECT_EQ(n.step_count, s.step_count + 1);
}

TEST(SimStep, ActionClippedToAmax) {
  TaskSpec spec = make_spec(TaskKind::push, 5);
  WorldState s = reset(spec).state;
  s.agent_pos = Vec2(0.5, 0.5);
  s.objects[0].pos = Vec2(0.9, 0.9);
  WorldState n = step(s, Vec2(0.2, 0.0), false, spec);
  EXPECT_NEAR(n.agent_pos.x(), 0.5 + spec.a_max, 1e-12);
  EXPECT_EQ(n.clipped_actions, 1);
}

// Oracle: closed-form tangency. Pushing along +x with centers on the x axis
// leaves the object exactly (agent_radius + object_radius) ahead.
TEST(SimStep, PushToExactTangency) {
  TaskSpec spec = make_spec(TaskKind::push, 5);
  WorldState s = reset(spec).state;
  s.agent_pos = Vec2(0.50, 0.5);
  s.objects[0].pos = Vec2(0.54, 0.5);
  WorldState n = step(s, Vec2(0.02, 0.0), false, spec);
  double want = spec.agent_radius + spec.object_radius;
  EXPECT_NEAR((n.objects[0].pos - n.agent_pos).norm(), want, 1e-12);
  EXPECT_NEAR(n.objects[0].pos.y(), 0.5, 1e-12);
  EXPECT_NEAR(n.objects[0].pos.x(), 0.52 + want, 1e-12);
}

TEST(SimStep, GrabRequiresTransitionWhileOverlapping) {
  TaskSpec spec = make_spec(TaskKind::pick_place, 5);
  WorldState s = reset(spec).state;
  s.agent_pos = Vec2(0.50, 0.5);
  s.objects[0].pos = Vec2(0.555, 0.5);
  // Move into overlap while closing: grab.
  WorldState n = step(s, Vec2(0.012, 0.0), true, spec);
  EXPECT_TRUE(n.objects[0].held);
  EXPECT_TRUE(n.gripper_closed);
  // Closing without overlap does nothing.
  WorldState far = reset(spec).state;
  far.agent_pos = Vec2(0.2, 0.2);
  far.objects[0].pos = Vec2(0.6, 0.6);
  WorldState n2 = step(far, Vec2(0.0, 0.0), true, spec);
  EXPECT_FALSE(n2.objects[0].held);
  EXPECT_TRUE(n2.gripper_closed);
  // Already-closed gripper moving into overlap pushes instead of grabbing.
  WorldState n3 = step(n2, Vec2(0.0, 0.0), true, spec);
  EXPECT_FALSE(n3.objects[0].held);
}

TEST(SimStep, HeldObjectMovesRigidly) {
  TaskSpec spec = make_spec(TaskKind::pick_place, 5);
  WorldState s = reset(spec).state;
  s.agent_pos = Vec2(0.50, 0.5);
  s.objects[0].pos = Vec2(0.555, 0.5);
  WorldState held = step(s, Vec2(0.012, 0.0), true, spec);
  ASSERT_TRUE(held.objects[0].held);
  Vec2 offset = held.objects[0].pos - held.agent_pos;
  WorldState moved = step(held, Vec2(0.0, 0.03), true, spec);
  Vec2 offset_after = moved.objects[0].pos - moved.agent_pos;
  EXPECT_NEAR((offset - offset_after).norm(), 0.0, 1e-12);
  EXPECT_NEAR((moved.objects[0].pos - held.objects[0].pos).y(), 0.03, 1e-12);
  // Release.
  WorldState released = step(moved, Vec2(0, 0), false, spec);
  EXPECT_FALSE(released.objects[0].held);
  EXPECT_FALSE(released.gripper_closed);
}

TEST(SimStep, ObjectsSlideAlongObstacleBoundary) {
  TaskSpec spec = make_spec(TaskKind::obstacle_push, 3);
  WorldState s = reset(spec).state;
  ASSERT_TRUE(s.obstacle.has_value());
  // Place the object just off the obstacle and push it straight at it.
  Vec2 c = s.obstacle->pos;
  double keep_out = spec.object_radius + spec.obstacle_radius;
  s.objects[0].pos = c - Vec2(keep_out + 0.005, 0.0);
  s.agent_pos = s.objects[0].pos - Vec2(spec.agent_radius + spec.object_radius + 0.001, 0.0);
  WorldState n = s;
  for (int i = 0; i < 5; ++i) n = step(n, Vec2(0.01, 0.0), false, spec);
  EXPECT_GE((n.objects[0].pos - c).norm(), keep_out - 1e-9);
  // Obstacle itself never moves.
  EXPECT_EQ(n.obstacle->pos, s.obstacle->pos);
}

TEST(SimStep, PickPlaceRimBlocksGroundedObjects) {
  TaskSpec spec = make_spec(TaskKind::pick_place, 9);
  WorldState s = reset(spec).state;
  Vec2 tgt = s.target.pos;
  // Object just outside the bowl, agent pushing it straight at the target.
  Vec2 dir = Vec2(1.0, 0.0);
  s.objects[0].pos = tgt - (spec.target_radius + spec.object_radius + 0.004) * dir;
  s.agent_pos = s.objects[0].pos - (spec.agent_radius + spec.object_radius + 0.001) * dir;
  WorldState n = s;
  for (int i = 0; i < 30; ++i) n = step(n, 0.01 * dir, false, spec);
  EXPECT_GE((n.objects[0].pos - tgt).norm(), spec.target_radius + spec.object_radius - 1e-9);
  EXPECT_FALSE(success(n, spec));

  // A held object is carried over the rim.
  WorldState h = reset(spec).state;
  h.objects[0].pos = h.agent_pos + Vec2(0.04, 0.0);
  WorldState grab = step(h, Vec2(0.012, 0.0), true, spec);
  ASSERT_TRUE(grab.objects[0].held);
  WorldState carry = grab;
  for (int i = 0; i < 400 && (carry.objects[0].pos - carry.target.pos).norm() > 0.01; ++i) {
    Vec2 err = carry.target.pos - carry.objects[0].pos;
    double step_len = std::min(0.012, err.norm());
    carry = step(carry, step_len * err.normalized(), true, spec);
  }
  EXPECT_LT((carry.objects[0].pos - carry.target.pos).norm(), spec.target_radius);
  WorldState released = step(carry, Vec2(0, 0), false, spec);
  EXPECT_TRUE(success(released, spec));
}

TEST(SimStep, ContainmentUnderRandomActions) {
  TaskSpec spec = make_spec(TaskKind::obstacle_push, 11);
  WorldState s = reset(spec).state;
  Rng rng(42);
  for (int i = 0; i < 500; ++i) {
    Vec2 a(rng.uniform(-0.06, 0.06), rng.uniform(-0.06, 0.06));
    s = step(s, a, rng.uniform() < 0.2, spec);
    auto in01 = [](const Vec2& p) {
      return p.x() >= 0 && p.x() <= 1 && p.y() >= 0 && p.y() <= 1;
    };
    ASSERT_TRUE(in01(s.agent_pos));
    for (const auto& o : s.objects) ASSERT_TRUE(in01(o.pos));
  }
}

TEST(SimObserve, StateVectorLayout) {
  TaskSpec spec = make_spec(TaskKind::push, 5);
  WorldState s = reset(spec).state;
  s.agent_pos = Vec2(0.1, 0.2);
  s.objects[0].pos = Vec2(0.3, 0.4);
  s.target.pos = Vec2(0.9, 0.9);
  s.obstacle.reset();
  Observation o = observe(s, spec, ObsMode::state);
  std::vector<double> expected = {0.1, 0.2, 0.3, 0.4, 0.9, 0.9, -1.0, -1.0};
  EXPECT_EQ(o.values, expected);
}

TEST(SimObserve, GridCoverage) {
  TaskSpec spec = make_spec(TaskKind::push, 5);
  spec.grid_size = 8;
  WorldState s = reset(spec).state;
  s.obstacle.reset();
  // Object big enough to fully cover the cell it is centered on.
  s.objects[0].pos = Vec2(0.5 + 1.0 / 16.0, 0.5 + 1.0 / 16.0);  // center of a cell
  s.objects[0].radius = 0.12;
  s.agent_pos = Vec2(0.03, 0.03);
  Observation o = observe(s, spec, ObsMode::grid);
  int g = spec.grid_size;
  ASSERT_EQ(o.values.size(), static_cast<size_t>(3 * g * g));
  // Channel 1, cell containing the object center: fully covered.
  int cx = static_cast<int>(s.objects[0].pos.x() * g);
  int cy = static_cast<int>(s.objects[0].pos.y() * g);
  EXPECT_DOUBLE_EQ(o.values[static_cast<size_t>((1 * g + cy) * g + cx)], 1.0);
  // A far empty cell is exactly zero.
  EXPECT_DOUBLE_EQ(o.values[static_cast<size_t>((1 * g + 0) * g + (g - 1))], 0.0);

  // Oracle: coverage fraction from a fine subgrid for a partially covered cell.
  int px = cx + 2, py = cy;
  double cell = 1.0 / g;
  int fine = 64, inside = 0;
  for (int sy = 0; sy < fine; ++sy) {
    for (int sx = 0; sx < fine; ++sx) {
      double x = (px + (sx + 0.5) / fine) * cell;
      double y = (py + (sy + 0.5) / fine) * cell;
      if ((Vec2(x, y) - s.objects[0].pos).norm() <= s.objects[0].radius) ++inside;
    }
  }
  double oracle = static_cast<double>(inside) / (fine * fine);
  EXPECT_NEAR(o.values[static_cast<size_t>((1 * g + py) * g + px)], oracle, 0.05);
}

TEST(SimSuccess, PredicatesPerTask) {
  TaskSpec push_spec = make_spec(TaskKind::push, 5);
  WorldState s = reset(push_spec).state;
  s.objects[0].pos = s.target.pos;
  EXPECT_TRUE(success(s, push_spec));
  s.objects[0].pos = s.target.pos + Vec2(2.0 * push_spec.target_radius, 0.0);
  EXPECT_FALSE(success(s, push_spec));

  TaskSpec pp = make_spec(TaskKind::pick_place, 5);
  WorldState sp = reset(pp).state;
  sp.objects[0].pos = sp.target.pos;
  sp.gripper_closed = true;
  EXPECT_FALSE(success(sp, pp));  // must release
  sp.gripper_closed = false;
  EXPECT_TRUE(success(sp, pp));

  TaskSpec ob = make_spec(TaskKind::obstacle_push, 3);
  WorldState so = reset(ob).state;
  so.objects[0].pos = so.target.pos;
  EXPECT_TRUE(success(so, ob));
  // Obstacle displaced 0.05 m from its reset position: failure.
  so.obstacle->pos += Vec2(0.05, 0.0);
  EXPECT_FALSE(success(so, ob));
}

TEST(SimDeterminism, TrajectoryIsPureFunctionOfSeedAndActions) {
  TaskSpec spec = make_spec(TaskKind::pick_place, 17);
  Rng rng(3);
  std::vector<Vec2> actions;
  std::vector<bool> grips;
  for (int i = 0; i < 100; ++i) {
    actions.emplace_back(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05));
    grips.push_back(rng.uniform() < 0.3);
  }
  auto run = [&]() {
    WorldState s = reset(spec).state;
    for (size_t i = 0; i < actions.size(); ++i) s = step(s, actions[i], grips[i], spec);
    return s;
  };
  WorldState a = run();
  WorldState b = run();
  EXPECT_TRUE(states_equal(a, b));
}

}  // namespace
}  // namespace seer
