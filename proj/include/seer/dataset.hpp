#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "seer/expert.hpp"
#include "seer/sim.hpp"

namespace seer {

struct Trajectory {
  std::vector<double> goal;
  std::vector<std::vector<double>> obs;
  std::vector<std::vector<double>> actions;
  std::vector<int> gripper;

  size_t n_transitions() const { return actions.size(); }
};

struct DatasetHeader {
  int format_version = 1;
  std::string task;
  std::string mode;
  int action_dim = 2;
  int obs_dim = 8;
  uint64_t seed = 0;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Trajectory> trajectories;

  size_t n_transitions() const {
    size_t n = 0;
    for (const auto& t : trajectories) n += t.n_transitions();
    return n;
  }

  TaskKind task_kind() const { return task_from_name(header.task); }
  ObsMode mode() const { return obs_mode_from_name(header.mode); }
};

// Flat (trajectory, step) index over every transition, fixed ordering.
struct TransitionIndex {
  std::vector<std::pair<size_t, size_t>> entries;

  explicit TransitionIndex(const Dataset& data) {
    for (size_t ti = 0; ti < data.trajectories.size(); ++ti) {
      for (size_t si = 0; si < data.trajectories[ti].n_transitions(); ++si) {
        entries.emplace_back(ti, si);
      }
    }
  }
  size_t size() const { return entries.size(); }
};

namespace dataset_detail {

inline nlohmann::json header_json(const DatasetHeader& h) {
  nlohmann::json j;
  j["format_version"] = h.format_version;
  j["task"] = h.task;
  j["mode"] = h.mode;
  j["action_dim"] = h.action_dim;
  j["obs_dim"] = h.obs_dim;
  j["seed"] = h.seed;
  return j;
}

}  // namespace dataset_detail

inline void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("dataset: cannot open for write: " + path);
  os << dataset_detail::header_json(data.header).dump() << "\n";
  for (const auto& t : data.trajectories) {
    nlohmann::json j;
    j["goal"] = t.goal;
    j["obs"] = t.obs;
    j["actions"] = t.actions;
    j["gripper"] = t.gripper;
    os << j.dump() << "\n";
  }
  if (!os) throw std::runtime_error("dataset: write failed: " + path);
}

/// Parses and validates a JSON-Lines dataset. Malformed lines report their
/// line number; per-trajectory length and width invariants are enforced
/// against the header.
inline Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("dataset: cannot open: " + path);
  Dataset data;
  std::string line;
  size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": parse error: " + e.what());
    }
    if (line_no == 1) {
      try {
        data.header.format_version = j.at("format_version").get<int>();
        data.header.task = j.at("task").get<std::string>();
        data.header.mode = j.at("mode").get<std::string>();
        data.header.action_dim = j.at("action_dim").get<int>();
        data.header.obs_dim = j.at("obs_dim").get<int>();
        data.header.seed = j.at("seed").get<uint64_t>();
      } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path + ":1: bad header: " + e.what());
      }
      if (data.header.format_version != 1) {
        throw std::runtime_error(path + ": unsupported format_version " +
                                 std::to_string(data.header.format_version));
      }
      continue;
    }
    Trajectory t;
    try {
      t.goal = j.at("goal").get<std::vector<double>>();
      t.obs = j.at("obs").get<std::vector<std::vector<double>>>();
      t.actions = j.at("actions").get<std::vector<std::vector<double>>>();
      t.gripper = j.at("gripper").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": bad trajectory: " + e.what());
    }
    if (t.obs.size() != t.actions.size() + 1) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": len(obs)=" +
                               std::to_string(t.obs.size()) + " != len(actions)+1=" +
                               std::to_string(t.actions.size() + 1));
    }
    if (t.gripper.size() != t.obs.size()) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": len(gripper)=" +
                               std::to_string(t.gripper.size()) + " != len(obs)=" +
                               std::to_string(t.obs.size()));
    }
    auto check_width = [&](size_t got, int want, const char* what) {
      if (got != static_cast<size_t>(want)) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what + " width " +
                                 std::to_string(got) + " != header " + std::to_string(want));
      }
    };
    check_width(t.goal.size(), data.header.obs_dim, "goal");
    for (const auto& o : t.obs) check_width(o.size(), data.header.obs_dim, "obs");
    for (const auto& a : t.actions) check_width(a.size(), data.header.action_dim, "action");
    data.trajectories.push_back(std::move(t));
  }
  if (line_no == 0) throw std::runtime_error(path + ": empty file (missing header line)");
  return data;
}

/// Per-episode seeds derive from the dataset seed; obstacle-push alternates
/// expert style left/right by episode index.
inline Dataset generate_dataset(const TaskSpec& spec, int n_episodes, ObsMode mode) {
  Dataset data;
  data.header.task = task_name(spec.kind);
  data.header.mode = obs_mode_name(mode);
  data.header.action_dim = 2;
  data.header.obs_dim = obs_dim(spec, mode);
  data.header.seed = spec.seed;
  data.trajectories.reserve(static_cast<size_t>(n_episodes));
  for (int i = 0; i < n_episodes; ++i) {
    TaskSpec ep_spec = spec;
    ep_spec.seed = derive_seed(spec.seed, static_cast<uint64_t>(i));
    ExpertStyle style = ExpertStyle::direct;
    if (spec.kind == TaskKind::obstacle_push) {
      style = (i % 2 == 0) ? ExpertStyle::left : ExpertStyle::right;
    }
    ExpertEpisode ep = run_expert_episode(ep_spec, style, mode);
    if (!success(ep.final_state, ep_spec)) {
      throw std::runtime_error("generate_dataset: expert episode " + std::to_string(i) +
                               " ended without success (simulator bug)");
    }
    Trajectory t;
    t.goal = ep.goal.values;
    t.obs.reserve(ep.observations.size());
    for (const auto& o : ep.observations) t.obs.push_back(o.values);
    t.actions.reserve(ep.actions.size());
    for (const auto& a : ep.actions) t.actions.push_back({a.x(), a.y()});
    t.gripper = ep.gripper;
    data.trajectories.push_back(std::move(t));
  }
  return data;
}

inline void generate_dataset_file(const TaskSpec& spec, int n_episodes, ObsMode mode,
                                  const std::string& out_path) {
  save_dataset(generate_dataset(spec, n_episodes, mode), out_path);
}

struct ReplayReport {
  size_t episodes = 0;
  size_t successes = 0;
  size_t observation_mismatches = 0;
  bool all_ok() const { return successes == episodes && observation_mismatches == 0; }
};

/// Re-simulates every stored trajectory from its derived seed and checks that
/// observations match bit for bit and the final state is a success. Assumes
/// the dataset was generated with `base_spec`'s ranges (the CLI uses default
/// ranges for the header's task).
inline ReplayReport replay_dataset(const Dataset& data, const TaskSpec& base_spec) {
  ReplayReport report;
  ObsMode mode = data.mode();
  for (size_t i = 0; i < data.trajectories.size(); ++i) {
    const Trajectory& t = data.trajectories[i];
    TaskSpec spec = base_spec;
    spec.kind = data.task_kind();
    spec.seed = derive_seed(data.header.seed, i);
    WorldState s = reset(spec, mode).state;
    bool mismatch = observe(s, spec, mode).values != t.obs[0];
    for (size_t k = 0; k < t.actions.size(); ++k) {
      s = step(s, Vec2(t.actions[k][0], t.actions[k][1]), t.gripper[k] == 1, spec);
      if (!mismatch && observe(s, spec, mode).values != t.obs[k + 1]) mismatch = true;
    }
    report.episodes += 1;
    if (success(s, spec)) report.successes += 1;
    if (mismatch) report.observation_mismatches += 1;
  }
  return report;
}

inline uint64_t file_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("file_hash: cannot open: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  std::string bytes = ss.str();
  return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace seer
