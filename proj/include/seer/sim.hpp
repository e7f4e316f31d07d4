#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seer/common.hpp"

namespace seer {

using Vec2 = Eigen::Vector2d;

enum class TaskKind { push, pick_place, obstacle_push };

inline const char* task_name(TaskKind k) {
  switch (k) {
    case TaskKind::push: return "push";
    case TaskKind::pick_place: return "pick-place";
    case TaskKind::obstacle_push: return "obstacle-push";
  }
  return "?";
}

inline TaskKind task_from_name(const std::string& s) {
  if (s == "push") return TaskKind::push;
  if (s == "pick-place") return TaskKind::pick_place;
  if (s == "obstacle-push") return TaskKind::obstacle_push;
  throw std::invalid_argument("unknown task '" + s + "' (push | pick-place | obstacle-push)");
}

inline bool task_uses_gripper(TaskKind k) { return k == TaskKind::pick_place; }

enum class ObsMode { state, grid };

inline const char* obs_mode_name(ObsMode m) { return m == ObsMode::state ? "state" : "grid"; }

inline ObsMode obs_mode_from_name(const std::string& s) {
  if (s == "state") return ObsMode::state;
  if (s == "grid") return ObsMode::grid;
  throw std::invalid_argument("unknown observation mode '" + s + "' (state | grid)");
}

struct Observation {
  std::vector<double> values;
  ObsMode mode = ObsMode::state;
};

struct Disc {
  Vec2 pos;
  double radius;
};

struct ObjectState {
  Vec2 pos;
  double radius;
  bool held = false;
};

/// Ground-truth world. Workspace is [0,1]^2; all entity centers stay inside.
struct WorldState {
  Vec2 agent_pos;
  bool gripper_closed = false;
  std::vector<ObjectState> objects;
  std::optional<Disc> obstacle;
  Disc target;
  int step_count = 0;
  // Rigid grasp offset (object - agent), valid while some object is held.
  Vec2 held_offset = Vec2::Zero();
  // Count of actions that exceeded a_max and were clipped.
  int clipped_actions = 0;

  int held_index() const {
    for (size_t i = 0; i < objects.size(); ++i)
      if (objects[i].held) return static_cast<int>(i);
    return -1;
  }
};

/// Task family plus the reset randomization ranges. Defaults keep all
/// entities non-overlapping and leave room for the obstacle detours.
struct TaskSpec {
  TaskKind kind = TaskKind::push;
  uint64_t seed = 0;

  double agent_radius = 0.02;
  double object_radius = 0.03;
  double target_radius = 0.08;
  double obstacle_radius = 0.06;
  double a_max = 0.05;

  // Sampling boxes for entity centers.
  Vec2 agent_lo{0.10, 0.10}, agent_hi{0.90, 0.90};
  Vec2 object_lo{0.22, 0.22}, object_hi{0.78, 0.78};
  Vec2 target_lo{0.22, 0.22}, target_hi{0.78, 0.78};
  // Minimum center separation between sampled entities at reset.
  double min_separation = 0.16;
  // obstacle-push: object-target distance range and constructive placement of
  // the obstacle on the segment (fraction along it plus lateral jitter).
  double obstacle_task_min_span = 0.42;
  double obstacle_frac_lo = 0.44, obstacle_frac_hi = 0.56;
  double obstacle_lateral_jitter = 0.03;
  double via_offset = 0.15;  // expert routes 0.15 m left/right of the obstacle

  int grid_channels = 3;
  int grid_size = 16;
};

inline int obs_dim(const TaskSpec& spec, ObsMode mode) {
  return mode == ObsMode::state ? 8 : spec.grid_channels * spec.grid_size * spec.grid_size;
}

namespace sim_detail {

inline Vec2 clamp01(const Vec2& p) {
  return Vec2(std::clamp(p.x(), 0.0, 1.0), std::clamp(p.y(), 0.0, 1.0));
}

inline Vec2 unit_or(const Vec2& v, const Vec2& fallback) {
  double n = v.norm();
  return n > 1e-12 ? Vec2(v / n) : fallback;
}

// Pushes p out of the disc (center c, keep-out distance d) along the radial
// direction: the sliding contact of a kinematic, frictionless boundary.
inline Vec2 project_out_of_disc(const Vec2& p, const Vec2& c, double d, const Vec2& dir_fallback) {
  Vec2 delta = p - c;
  double n = delta.norm();
  if (n >= d) return p;
  return c + d * unit_or(delta, dir_fallback);
}

}  // namespace sim_detail

/// Pure function of the world: either the 8-entry state vector
/// (agent xy, nearest-object xy, target xy, obstacle xy or (-1,-1)) or a
/// C x G x G rasterization with anti-aliased disc coverage per cell
/// (channels: agent, objects, target+obstacle).
inline Observation observe(const WorldState& s, const TaskSpec& spec, ObsMode mode) {
  Observation obs;
  obs.mode = mode;
  if (mode == ObsMode::state) {
    Vec2 nearest = Vec2(-1.0, -1.0);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& o : s.objects) {
      double d = (o.pos - s.agent_pos).norm();
      if (d < best) {
        best = d;
        nearest = o.pos;
      }
    }
    obs.values = {s.agent_pos.x(), s.agent_pos.y(), nearest.x(),     nearest.y(),
                  s.target.pos.x(), s.target.pos.y(),
                  s.obstacle ? s.obstacle->pos.x() : -1.0,
                  s.obstacle ? s.obstacle->pos.y() : -1.0};
    return obs;
  }

  const int g = spec.grid_size;
  const int c = spec.grid_channels;
  obs.values.assign(static_cast<size_t>(c * g * g), 0.0);
  const int sub = 8;  // supersamples per cell axis
  auto coverage = [&](const Vec2& center, double radius, int cx, int cy) {
    double cell = 1.0 / g;
    int inside = 0;
    for (int sy = 0; sy < sub; ++sy) {
      for (int sx = 0; sx < sub; ++sx) {
        double px = (cx + (sx + 0.5) / sub) * cell;
        double py = (cy + (sy + 0.5) / sub) * cell;
        double dx = px - center.x(), dy = py - center.y();
        if (dx * dx + dy * dy <= radius * radius) ++inside;
      }
    }
    return static_cast<double>(inside) / (sub * sub);
  };
  auto splat = [&](int channel, const Vec2& center, double radius) {
    double cell = 1.0 / g;
    int x0 = std::max(0, static_cast<int>((center.x() - radius) / cell));
    int x1 = std::min(g - 1, static_cast<int>((center.x() + radius) / cell));
    int y0 = std::max(0, static_cast<int>((center.y() - radius) / cell));
    int y1 = std::min(g - 1, static_cast<int>((center.y() + radius) / cell));
    for (int cy = y0; cy <= y1; ++cy) {
      for (int cx = x0; cx <= x1; ++cx) {
        double f = coverage(center, radius, cx, cy);
        double& slot = obs.values[static_cast<size_t>((channel * g + cy) * g + cx)];
        slot = std::max(slot, f);
      }
    }
  };
  splat(0, s.agent_pos, spec.agent_radius);
  for (const auto& o : s.objects) splat(1, o.pos, o.radius);
  splat(2, s.target.pos, s.target.radius);
  if (s.obstacle) splat(2, s.obstacle->pos, s.obstacle->radius);
  return obs;
}

/// Success configuration the goal observation is rendered from: the task
/// object at the target center with the agent in finishing contact behind it
/// (half-grasp offset for pick-place), gripper open — the configuration a
/// completed episode ends in.
inline WorldState goal_state(const WorldState& reset_state, const TaskSpec& spec) {
  WorldState g = reset_state;
  if (g.objects.empty()) return g;
  Vec2 dir = sim_detail::unit_or(g.target.pos - g.objects[0].pos, Vec2(1.0, 0.0));
  g.objects[0].pos = g.target.pos;
  g.objects[0].held = false;
  g.gripper_closed = false;
  double standoff = spec.kind == TaskKind::pick_place
                        ? 0.5 * (spec.agent_radius + spec.object_radius)
                        : spec.agent_radius + spec.object_radius;
  g.agent_pos = sim_detail::clamp01(g.target.pos - standoff * dir);
  g.step_count = 0;
  return g;
}

/// Success constrains the object and gripper, not the agent, and for tasks
/// with symmetric solutions (obstacle-push) any concrete agent slot would
/// bias the metric toward one mode. The goal observation therefore leaves
/// the agent slot at the (-1,-1) sentinel (state mode) / empty (grid mode).
inline Observation goal_observation(const WorldState& reset_state, const TaskSpec& spec,
                                    ObsMode mode) {
  Observation obs = observe(goal_state(reset_state, spec), spec, mode);
  if (mode == ObsMode::state) {
    obs.values[0] = -1.0;
    obs.values[1] = -1.0;
  } else {
    int per_channel = spec.grid_size * spec.grid_size;
    for (int i = 0; i < per_channel; ++i) obs.values[static_cast<size_t>(i)] = 0.0;
  }
  return obs;
}

struct ResetResult {
  WorldState state;
  Observation goal;
};

/// Deterministic function of spec.seed. Rejects specs whose ranges cannot be
/// satisfied after 1000 placement attempts.
inline ResetResult reset(const TaskSpec& spec, ObsMode mode = ObsMode::state) {
  Rng rng(derive_seed(spec.seed, 0xE5E7));
  auto sample_box = [&](const Vec2& lo, const Vec2& hi) {
    return Vec2(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()));
  };

  for (int attempt = 0; attempt < 1000; ++attempt) {
    WorldState s;
    s.target = {sample_box(spec.target_lo, spec.target_hi), spec.target_radius};
    Vec2 obj = sample_box(spec.object_lo, spec.object_hi);
    if ((obj - s.target.pos).norm() < spec.min_separation) continue;
    if (spec.kind == TaskKind::obstacle_push &&
        (obj - s.target.pos).norm() < spec.obstacle_task_min_span) {
      continue;
    }
    s.objects.push_back({obj, spec.object_radius, false});

    if (spec.kind == TaskKind::obstacle_push) {
      // Constructive placement on the object-target segment.
      Vec2 axis = s.target.pos - obj;
      Vec2 n(-axis.y(), axis.x());
      n.normalize();
      double frac = rng.uniform(spec.obstacle_frac_lo, spec.obstacle_frac_hi);
      double lat = rng.uniform(-spec.obstacle_lateral_jitter, spec.obstacle_lateral_jitter);
      Vec2 opos = obj + frac * axis + lat * n;
      // Both via points and the obstacle itself must stay in the workspace.
      Vec2 via_l = opos + spec.via_offset * n;
      Vec2 via_r = opos - spec.via_offset * n;
      auto in_ws = [](const Vec2& p, double margin) {
        return p.x() >= margin && p.x() <= 1.0 - margin && p.y() >= margin && p.y() <= 1.0 - margin;
      };
      if (!in_ws(opos, spec.obstacle_radius) || !in_ws(via_l, 0.06) || !in_ws(via_r, 0.06)) continue;
      s.obstacle = Disc{opos, spec.obstacle_radius};
    }

    Vec2 agent = sample_box(spec.agent_lo, spec.agent_hi);
    if ((agent - obj).norm() < spec.min_separation) continue;
    if ((agent - s.target.pos).norm() < spec.min_separation) continue;
    if (s.obstacle && (agent - s.obstacle->pos).norm() <
                          spec.obstacle_radius + spec.agent_radius + 0.02) {
      continue;
    }
    if (s.obstacle && (obj - s.obstacle->pos).norm() <
                          spec.obstacle_radius + spec.object_radius + 0.04) {
      continue;
    }
    // pick-place: the object must start outside the bowl rim.
    if (spec.kind == TaskKind::pick_place &&
        (obj - s.target.pos).norm() < spec.target_radius + spec.object_radius + 0.03) {
      continue;
    }
    s.agent_pos = agent;
    ResetResult r;
    r.state = s;
    r.goal = goal_observation(s, spec, mode);
    return r;
  }
  throw std::runtime_error(std::string("reset: placement ranges for task '") +
                           task_name(spec.kind) + "' unsatisfiable after 1000 attempts");
}

/// One kinematic step. The agent translates by `action` (magnitude clipped to
/// a_max), never entering the obstacle. A gripper open->closed transition
/// while the agent overlaps a free object grabs it (the object then moves
/// rigidly with the agent until the gripper opens); otherwise overlap
/// displaces the object radially to tangency. Pushed objects slide along the
/// obstacle boundary, and in pick-place the target rim acts as a bowl wall
/// that grounded objects cannot cross in either direction (a held object is
/// carried over it).
inline WorldState step(const WorldState& s, const Vec2& action, bool gripper_closed_cmd,
                       const TaskSpec& spec) {
  WorldState n = s;
  n.step_count = s.step_count + 1;

  Vec2 a = action;
  double mag = a.norm();
  if (mag > spec.a_max) {
    a *= spec.a_max / mag;
    n.clipped_actions += 1;
  }

  Vec2 old_agent = s.agent_pos;
  Vec2 agent = sim_detail::clamp01(old_agent + a);
  if (n.obstacle) {
    agent = sim_detail::project_out_of_disc(agent, n.obstacle->pos,
                                            spec.agent_radius + n.obstacle->radius,
                                            sim_detail::unit_or(old_agent - n.obstacle->pos, Vec2(1, 0)));
    agent = sim_detail::clamp01(agent);
  }
  n.agent_pos = agent;

  // Carried object follows rigidly (lifted: ignores obstacle and rim).
  int held = n.held_index();
  if (held >= 0) {
    n.objects[static_cast<size_t>(held)].pos = sim_detail::clamp01(agent + n.held_offset);
  }

  // Grab: open -> closed while overlapping a free object (checked before push
  // resolution, i.e. on the raw post-move overlap).
  bool grabbed_now = false;
  if (gripper_closed_cmd && !s.gripper_closed && held < 0) {
    for (size_t i = 0; i < n.objects.size(); ++i) {
      if ((n.objects[i].pos - agent).norm() < spec.agent_radius + n.objects[i].radius) {
        n.objects[i].held = true;
        n.held_offset = n.objects[i].pos - agent;
        grabbed_now = true;
        break;
      }
    }
  }

  // Push resolution for free objects.
  for (size_t i = 0; i < n.objects.size(); ++i) {
    auto& o = n.objects[i];
    if (o.held) continue;
    double keep_out = spec.agent_radius + o.radius;
    if ((o.pos - agent).norm() >= keep_out) continue;
    Vec2 fallback = sim_detail::unit_or(o.pos - old_agent, Vec2(1, 0));
    Vec2 moved = sim_detail::project_out_of_disc(o.pos, agent, keep_out, fallback);
    if (n.obstacle) {
      moved = sim_detail::project_out_of_disc(moved, n.obstacle->pos, o.radius + n.obstacle->radius,
                                              sim_detail::unit_or(o.pos - n.obstacle->pos, fallback));
    }
    if (spec.kind == TaskKind::pick_place) {
      // Bowl wall at the target boundary: a grounded object keeps a radius of
      // clearance on whichever side it is on.
      double rim = spec.target_radius;
      bool was_inside = (s.objects[i].pos - s.target.pos).norm() < rim;
      if (was_inside) {
        Vec2 d = moved - n.target.pos;
        double dist = d.norm();
        double cap = rim - o.radius;
        if (dist > cap) moved = n.target.pos + cap * sim_detail::unit_or(d, Vec2(1, 0));
      } else {
        moved = sim_detail::project_out_of_disc(moved, n.target.pos, rim + o.radius,
                                                sim_detail::unit_or(o.pos - n.target.pos, fallback));
      }
    }
    o.pos = sim_detail::clamp01(moved);
  }

  // Release.
  if (!gripper_closed_cmd && held >= 0) {
    n.objects[static_cast<size_t>(held)].held = false;
    n.held_offset = Vec2::Zero();
  }
  (void)grabbed_now;
  n.gripper_closed = gripper_closed_cmd;
  return n;
}

/// Ground-truth task predicate. push / pick-place: task object center within
/// the target radius (pick-place additionally requires the gripper open);
/// obstacle-push additionally requires the obstacle within 0.02 m of its
/// reset position.
inline bool success(const WorldState& s, const TaskSpec& spec) {
  if (s.objects.empty()) return false;
  bool at_target = (s.objects[0].pos - s.target.pos).norm() < s.target.radius;
  switch (spec.kind) {
    case TaskKind::push:
      return at_target;
    case TaskKind::pick_place:
      return at_target && !s.gripper_closed;
    case TaskKind::obstacle_push: {
      if (!at_target) return false;
      if (!s.obstacle) return true;
      WorldState ref = reset(spec).state;
      if (!ref.obstacle) return true;
      return (s.obstacle->pos - ref.obstacle->pos).norm() < 0.02;
    }
  }
  return false;
}

inline bool object_obstacle_contact(const WorldState& s, double tol = 1e-9) {
  if (!s.obstacle) return false;
  for (const auto& o : s.objects) {
    if ((o.pos - s.obstacle->pos).norm() <= o.radius + s.obstacle->radius + tol) return true;
  }
  return false;
}

}  // namespace seer
