#pragma once

#include <cmath>

#include "seer/sim.hpp"

namespace seer {

enum class ExpertStyle { left, right, direct };

inline const char* style_name(ExpertStyle s) {
  switch (s) {
    case ExpertStyle::left: return "left";
    case ExpertStyle::right: return "right";
    case ExpertStyle::direct: return "direct";
  }
  return "?";
}

struct ExpertDecision {
  Vec2 action = Vec2::Zero();
  bool gripper_closed = false;
  bool done = false;
};

namespace expert_detail {

constexpr double kCruise = 0.012;     // nominal step length
constexpr double kMinSpeed = 0.004;   // keeps progress strictly moving
constexpr double kGain = 1.2;
constexpr double kBite = 0.008;       // how deep the push aim sits inside the object
constexpr double kStandoff = 0.006;   // staging gap beyond tangency
constexpr double kGrabLunge = 0.012;  // inward move on the grab step
constexpr double kReleaseTol = 0.015;
// Push until the object sits well inside the target, not merely across its
// boundary: demonstration final frames then cluster near the goal
// configuration, which is what the stop-threshold calibration keys on.
constexpr double kPushDoneTol = 0.03;

inline Vec2 step_toward(const Vec2& from, const Vec2& to) {
  Vec2 err = to - from;
  double d = err.norm();
  if (d < 1e-12) return Vec2::Zero();
  double speed = std::clamp(kGain * d, kMinSpeed, kCruise);
  speed = std::min(speed, d);
  return (speed / d) * err;
}

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  Vec2 ab = b - a;
  double len2 = ab.squaredNorm();
  if (len2 < 1e-18) return (p - a).norm();
  double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

// Orbit target on a ring around a blocking disc, rotated toward the angular
// position of the final destination. Re-evaluated every step: the agent is
// pulled out to the ring and walks around the disc until the straight path
// clears. The rotation never exceeds the remaining angular gap (plus a floor
// that guarantees tangential progress), so the chord to the waypoint stays
// outside the contact distance.
inline Vec2 orbit_waypoint(const Vec2& agent, const Vec2& center, double ring, const Vec2& dest) {
  Vec2 radial = sim_detail::unit_or(agent - center, Vec2(1, 0));
  Vec2 to_dest = sim_detail::unit_or(dest - center, Vec2(1, 0));
  double cr = cross2(radial, to_dest);
  double gap = std::atan2(std::abs(cr), radial.dot(to_dest));  // [0, pi]
  double side = cr >= 0.0 ? 1.0 : -1.0;
  double ang = side * std::clamp(gap, 0.15, 0.9);
  Eigen::Rotation2D<double> rot(ang);
  return center + ring * (rot * radial);
}

// Moves toward dest, detouring around any blocking disc in `blockers`
// (center, contact distance, orbit ring radius). When dest itself sits inside
// the nominal ring the ring shrinks toward it, staying outside contact.
inline Vec2 navigate(const Vec2& agent, const Vec2& dest,
                     const std::vector<std::tuple<Vec2, double, double>>& blockers) {
  for (const auto& [center, contact, ring] : blockers) {
    double r_eff = std::min(ring, (dest - center).norm() - 0.002);
    if (r_eff < contact + 0.003) continue;  // no safe orbit: head straight
    if (point_segment_distance(center, agent, dest) < r_eff - 0.002) {
      return step_toward(agent, orbit_waypoint(agent, center, r_eff, dest));
    }
  }
  return step_toward(agent, dest);
}

}  // namespace expert_detail

/// Where the expert wants the object to go next: the target, or (for
/// obstacle-push while the straight object-target segment is blocked) a via
/// point `via_offset` to the left or right of the obstacle, measured
/// perpendicular to the object-target axis.
inline Vec2 expert_object_waypoint(const WorldState& s, const TaskSpec& spec, ExpertStyle style) {
  const Vec2 obj = s.objects[0].pos;
  const Vec2 tgt = s.target.pos;
  if (spec.kind == TaskKind::obstacle_push && s.obstacle && style != ExpertStyle::direct) {
    double route_clearance = s.objects[0].radius + s.obstacle->radius + 0.025;
    if (expert_detail::point_segment_distance(s.obstacle->pos, obj, tgt) < route_clearance) {
      Vec2 axis = sim_detail::unit_or(tgt - obj, Vec2(1, 0));
      Vec2 left(-axis.y(), axis.x());
      return s.obstacle->pos + (style == ExpertStyle::left ? 1.0 : -1.0) * spec.via_offset * left;
    }
  }
  return tgt;
}

/// Deterministic demonstration policy: approach the task object from behind
/// (relative to its next waypoint), then push or carry it to the target.
/// obstacle-push routes the object via a point `via_offset` left or right of
/// the obstacle, per `style`, until the straight object-target segment clears.
inline ExpertDecision scripted_expert(const WorldState& s, const TaskSpec& spec,
                                      ExpertStyle style) {
  using namespace expert_detail;
  ExpertDecision dec;
  if (s.objects.empty()) {
    dec.done = true;
    return dec;
  }
  bool reached = spec.kind == TaskKind::pick_place
                     ? success(s, spec)
                     : success(s, spec) &&
                           (s.objects[0].pos - s.target.pos).norm() < kPushDoneTol;
  if (reached) {
    dec.done = true;
    return dec;
  }
  const Vec2 agent = s.agent_pos;
  const Vec2 obj = s.objects[0].pos;
  const Vec2 tgt = s.target.pos;
  const double r_contact = spec.agent_radius + s.objects[0].radius;

  if (spec.kind == TaskKind::pick_place) {
    int held = s.held_index();
    if (held >= 0) {
      if ((obj - tgt).norm() < kReleaseTol) {
        dec.gripper_closed = false;  // release over the bowl
        return dec;
      }
      dec.gripper_closed = true;
      dec.action = step_toward(agent, tgt - s.held_offset);
      return dec;
    }
    if (s.gripper_closed) {
      // Closed without holding anything: reopen and retry.
      dec.gripper_closed = false;
      return dec;
    }
    if ((agent - obj).norm() <= r_contact + kStandoff + 1e-9) {
      dec.gripper_closed = true;  // close while lunging into overlap
      dec.action = kGrabLunge * sim_detail::unit_or(obj - agent, Vec2(1, 0));
      return dec;
    }
    Vec2 behind = sim_detail::unit_or(obj - tgt, Vec2(1, 0));
    Vec2 staging = obj + (r_contact + kStandoff) * behind;
    dec.action = navigate(agent, staging, {{obj, r_contact, r_contact + 0.025}});
    return dec;
  }

  // Push family.
  Vec2 wp = expert_object_waypoint(s, spec, style);
  Vec2 push_dir = sim_detail::unit_or(wp - obj, sim_detail::unit_or(tgt - obj, Vec2(1, 0)));
  bool behind_ok = (agent - obj).norm() <= r_contact + 0.012 &&
                   sim_detail::unit_or(obj - agent, push_dir).dot(push_dir) > 0.7;
  if (behind_ok) {
    Vec2 aim = obj - (r_contact - kBite) * push_dir;
    dec.action = step_toward(agent, aim);
    return dec;
  }
  Vec2 staging = obj - (r_contact + kStandoff) * push_dir;
  std::vector<std::tuple<Vec2, double, double>> blockers;
  if (s.obstacle) {
    double contact = spec.agent_radius + s.obstacle->radius;
    blockers.push_back({s.obstacle->pos, contact, contact + 0.02});
  }
  blockers.push_back({obj, r_contact, r_contact + 0.025});
  dec.action = navigate(agent, staging, blockers);
  return dec;
}

/// Runs the expert to completion. Throws if the episode does not finish in
/// `max_steps`; the expert defines the data distribution, so a failure is a
/// simulator bug, not a soft error.
struct ExpertEpisode {
  std::vector<Observation> observations;
  std::vector<Vec2> actions;
  std::vector<int> gripper;  // per-frame gripper command (final frame: state)
  Observation goal;
  WorldState final_state;
};

inline ExpertEpisode run_expert_episode(const TaskSpec& spec, ExpertStyle style, ObsMode mode,
                                        int max_steps = 200) {
  ResetResult r = reset(spec, mode);
  WorldState s = r.state;
  ExpertEpisode ep;
  ep.goal = r.goal;
  ep.observations.push_back(observe(s, spec, mode));
  for (int t = 0; t < max_steps; ++t) {
    ExpertDecision dec = scripted_expert(s, spec, style);
    if (dec.done) {
      ep.gripper.push_back(s.gripper_closed ? 1 : 0);
      ep.final_state = s;
      return ep;
    }
    ep.actions.push_back(dec.action);
    ep.gripper.push_back(dec.gripper_closed ? 1 : 0);
    s = step(s, dec.action, dec.gripper_closed, spec);
    ep.observations.push_back(observe(s, spec, mode));
  }
  throw std::runtime_error(std::string("expert episode did not terminate in ") +
                           std::to_string(max_steps) + " steps (task " + task_name(spec.kind) +
                           ", seed " + std::to_string(spec.seed) + ")");
}

}  // namespace seer
