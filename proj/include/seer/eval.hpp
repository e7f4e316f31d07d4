#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "seer/baselines.hpp"
#include "seer/config.hpp"
#include "seer/controller.hpp"
#include "seer/dataset.hpp"
#include "seer/training.hpp"

namespace seer {

// ---------------------------------------------------------------------------
// Config translation
// ---------------------------------------------------------------------------

inline TrainConfig train_config_from(const KVConfig& cfg) {
  TrainConfig tc;
  tc.lr = cfg.get_double("lr");
  tc.batch = cfg.get_int("batch");
  tc.epochs = cfg.get_int("epochs");
  tc.k_negatives = cfg.get_int("k_negatives");
  tc.lambda_d = cfg.get_double("lambda_d");
  tc.lambda_f = cfg.get_double("lambda_F");
  tc.seed = cfg.get_u64("seed");
  tc.augment_sigma = cfg.get_double("augment_sigma");
  tc.encoder_mode = cfg.get("encoder_mode");
  tc.dynamics_mode = cfg.get("dynamics_mode");
  tc.embed_dim = cfg.get_int("embed_dim");
  tc.encoder_hidden = cfg.get_int("encoder_hidden");
  tc.action_scale = cfg.get_double("action_scale");
  tc.residual_dynamics = cfg.get_bool("residual_dynamics");
  tc.stop_grad_target = cfg.get_bool("stop_grad_target");
  tc.val_fraction = cfg.get_double("val_fraction");
  tc.early_stop = cfg.get_bool("early_stop");
  return tc;
}

inline BCConfig bc_config_from(const KVConfig& cfg) {
  BCConfig bc;
  bc.lr = cfg.get_double("bc_lr");
  bc.batch = cfg.get_int("batch");
  bc.epochs = cfg.get_int("bc_epochs");
  bc.seed = cfg.get_u64("seed");
  bc.hidden = cfg.get_int_list("bc_hidden");
  bc.augment_sigma = cfg.get_double("augment_sigma");
  bc.val_fraction = cfg.get_double("val_fraction");
  return bc;
}

inline IBCConfig ibc_config_from(const KVConfig& cfg) {
  IBCConfig ibc;
  ibc.lr = cfg.get_double("lr");
  ibc.batch = cfg.get_int("batch");
  ibc.epochs = cfg.get_int("ibc_epochs");
  ibc.k_negatives = cfg.get_int("ibc_k");
  ibc.embed_dim = cfg.get_int("embed_dim");
  ibc.seed = cfg.get_u64("seed");
  ibc.augment_sigma = cfg.get_double("augment_sigma");
  ibc.val_fraction = cfg.get_double("val_fraction");
  return ibc;
}

inline PlannerConfig planner_config_from(const KVConfig& cfg) {
  PlannerConfig pc;
  pc.n_candidates = cfg.get_int("n_candidates");
  pc.max_steps = cfg.get_int("max_steps");
  return pc;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct EpisodeOutcome {
  int episode = 0;
  uint64_t seed = 0;
  bool success = false;
  int steps = 0;
  std::string stop_reason;
  double final_distance = 0.0;
  int obstacle_contact_steps = 0;
};

struct ExperimentReport {
  std::string study;
  std::string method;
  std::string task;
  int n_demos = 0;
  int n_episodes = 0;
  int successes = 0;
  double success_rate = 0.0;  // successes / n_episodes exactly (0 when empty)
  double mean_steps = 0.0;
  double threshold_stop_rate = 0.0;
  double obstacle_contact_rate = 0.0;  // episodes with any object-obstacle contact
  double lateral_ratio = 0.0;          // multimodal study, BC rows only
  uint64_t config_hash = 0;
  uint64_t dataset_hash = 0;
  std::string status = "ok";
  std::vector<EpisodeOutcome> outcomes;
};

inline void finalize_report(ExperimentReport& r) {
  r.n_episodes = static_cast<int>(r.outcomes.size());
  r.successes = 0;
  long steps = 0, thresh = 0, contact = 0;
  for (const auto& o : r.outcomes) {
    r.successes += o.success ? 1 : 0;
    steps += o.steps;
    thresh += o.stop_reason == "threshold-stop" ? 1 : 0;
    contact += o.obstacle_contact_steps > 0 ? 1 : 0;
  }
  double n = static_cast<double>(r.n_episodes);
  r.success_rate = r.n_episodes > 0 ? r.successes / n : 0.0;
  r.mean_steps = r.n_episodes > 0 ? steps / n : 0.0;
  r.threshold_stop_rate = r.n_episodes > 0 ? thresh / n : 0.0;
  r.obstacle_contact_rate = r.n_episodes > 0 ? contact / n : 0.0;
}

inline const char* kSummaryCsvHeader =
    "study,method,task,n_demos,n_episodes,successes,success_rate,mean_steps,"
    "threshold_stop_rate,obstacle_contact_rate,lateral_ratio,config_hash,dataset_hash,status";

inline std::string summary_csv_row(const ExperimentReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%s,%s,%d,%d,%d,%.6f,%.2f,%.4f,%.4f,%.4f,%016llx,%016llx,%s",
                r.study.c_str(), r.method.c_str(), r.task.c_str(), r.n_demos, r.n_episodes,
                r.successes, r.success_rate, r.mean_steps, r.threshold_stop_rate,
                r.obstacle_contact_rate, r.lateral_ratio,
                static_cast<unsigned long long>(r.config_hash),
                static_cast<unsigned long long>(r.dataset_hash), r.status.c_str());
  return buf;
}

inline void write_summary_csv(const std::string& path, const std::vector<ExperimentReport>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("report: cannot open for write: " + path);
  os << kSummaryCsvHeader << "\n";
  for (const auto& r : rows) os << summary_csv_row(r) << "\n";
}

/// Column-count check against the documented schema.
inline bool validate_summary_csv(const std::string& path, std::string* error = nullptr) {
  std::ifstream is(path);
  if (!is) {
    if (error) *error = "cannot open " + path;
    return false;
  }
  std::string line;
  if (!std::getline(is, line) || line != kSummaryCsvHeader) {
    if (error) *error = "bad header";
    return false;
  }
  size_t want = std::count(line.begin(), line.end(), ',');
  size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (static_cast<size_t>(std::count(line.begin(), line.end(), ',')) != want) {
      if (error) *error = "column count mismatch at line " + std::to_string(line_no);
      return false;
    }
  }
  return true;
}

inline void write_episode_csv(const std::string& path, const ExperimentReport& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("report: cannot open for write: " + path);
  os << "episode,seed,success,steps,stop_reason,final_distance,obstacle_contact_steps\n";
  char buf[256];
  for (const auto& o : r.outcomes) {
    std::snprintf(buf, sizeof(buf), "%d,%llu,%d,%d,%s,%.6f,%d\n", o.episode,
                  static_cast<unsigned long long>(o.seed), o.success ? 1 : 0, o.steps,
                  o.stop_reason.c_str(), o.final_distance, o.obstacle_contact_steps);
    os << buf;
  }
  std::snprintf(buf, sizeof(buf), "summary,,%d,%d,%s,%.6f,%d\n", r.successes, r.n_episodes,
                "total", r.success_rate, 0);
  os << buf;
}

// ---------------------------------------------------------------------------
// Trained policy bundle
// ---------------------------------------------------------------------------

enum class MethodKind { ours, bc, ibc };

inline const char* method_name(MethodKind m) {
  switch (m) {
    case MethodKind::ours: return "ours";
    case MethodKind::bc: return "bc";
    case MethodKind::ibc: return "ibc";
  }
  return "?";
}

inline MethodKind method_from_name(const std::string& s) {
  if (s == "ours") return MethodKind::ours;
  if (s == "bc") return MethodKind::bc;
  if (s == "ibc") return MethodKind::ibc;
  throw std::invalid_argument("unknown method '" + s + "' (ours | bc | ibc)");
}

/// Everything needed to run one method on one task: the policy nets, the
/// candidate pool, the stop threshold, and the shared gripper classifier
/// (always the primary model's, for every method).
struct PolicyBundle {
  MethodKind kind = MethodKind::ours;
  DistanceModel ours;  // also the gripper/distance source for baselines
  bool has_ours = false;
  BCPolicy bc;
  IBCModel ibc;
  double lambda_stop = -1.0;
  std::optional<double> gripper_holdout_accuracy;
};

/// Trains the primary model on a dataset: joint loss, then the gripper head
/// when the task has both gripper classes, then stop-threshold calibration.
inline PolicyBundle train_ours_bundle(const Dataset& data, const KVConfig& cfg) {
  PolicyBundle bundle;
  bundle.kind = MethodKind::ours;
  TrainConfig tc = train_config_from(cfg);
  TrainResult tr = train(data, tc);
  if (tr.aborted_non_finite) {
    throw std::runtime_error("train: aborted on non-finite loss");
  }
  bundle.ours = std::move(tr.model);
  bundle.has_ours = true;
  if (task_uses_gripper(data.task_kind())) {
    GripperTrainResult g =
        train_gripper(bundle.ours, data, cfg.get_int("gripper_labels"), tc.seed);
    bundle.gripper_holdout_accuracy = g.held_out_accuracy;
  }
  bundle.lambda_stop = calibrate_stop_threshold(bundle.ours, data);
  return bundle;
}

// ---------------------------------------------------------------------------
// Seeded evaluation (parallel over episodes, outcome order fixed by index)
// ---------------------------------------------------------------------------

inline ExperimentReport evaluate_policy(const PolicyBundle& bundle, const Dataset& data,
                                        TaskKind task, const KVConfig& cfg, int n_episodes,
                                        const std::string& study_name) {
  ExperimentReport report;
  report.study = study_name;
  report.method = method_name(bundle.kind);
  report.task = task_name(task);
  report.n_demos = static_cast<int>(data.trajectories.size());
  report.config_hash = cfg.hash();
  ActionPool pool(data);
  PlannerConfig pc = planner_config_from(cfg);
  pc.lambda_stop = bundle.lambda_stop;
  uint64_t eval_seed = cfg.get_u64("eval_seed");
  ObsMode mode = obs_mode_from_name(cfg.get("obs_mode"));

  report.outcomes.resize(static_cast<size_t>(n_episodes));
  parallel_for(static_cast<size_t>(n_episodes), [&](size_t ep) {
    TaskSpec spec;
    spec.kind = task;
    spec.seed = derive_seed(eval_seed, ep);
    PlannerConfig epc = pc;
    epc.seed = derive_seed(eval_seed ^ 0x5EEDCAFEULL, ep);
    EpisodeTrace trace;
    switch (bundle.kind) {
      case MethodKind::ours:
        trace = run_episode(bundle.ours, pool, spec, epc, mode);
        break;
      case MethodKind::bc:
        trace = run_bc_episode(bundle.bc, bundle.has_ours ? &bundle.ours : nullptr, spec, epc,
                               mode);
        break;
      case MethodKind::ibc:
        trace = run_ibc_episode(bundle.ibc, pool, bundle.has_ours ? &bundle.ours : nullptr, spec,
                                epc, mode);
        break;
    }
    EpisodeOutcome& out = report.outcomes[ep];
    out.episode = static_cast<int>(ep);
    out.seed = spec.seed;
    out.success = trace.success;
    out.steps = trace.steps_taken;
    out.stop_reason = trace.stop_reason;
    out.final_distance = trace.final_distance;
    out.obstacle_contact_steps = trace.obstacle_contact_steps;
  });
  finalize_report(report);
  return report;
}

/// Expert reference row over the same seeded episodes (sanity oracle).
inline ExperimentReport evaluate_expert(TaskKind task, const KVConfig& cfg, int n_episodes,
                                        const std::string& study_name) {
  ExperimentReport report;
  report.study = study_name;
  report.method = "expert";
  report.task = task_name(task);
  report.config_hash = cfg.hash();
  uint64_t eval_seed = cfg.get_u64("eval_seed");
  report.outcomes.resize(static_cast<size_t>(n_episodes));
  parallel_for(static_cast<size_t>(n_episodes), [&](size_t ep) {
    TaskSpec spec;
    spec.kind = task;
    spec.seed = derive_seed(eval_seed, ep);
    ExpertStyle style =
        task == TaskKind::obstacle_push ? (ep % 2 == 0 ? ExpertStyle::left : ExpertStyle::right)
                                        : ExpertStyle::direct;
    ExpertEpisode epi = run_expert_episode(spec, style, ObsMode::state);
    EpisodeOutcome& out = report.outcomes[ep];
    out.episode = static_cast<int>(ep);
    out.seed = spec.seed;
    out.success = success(epi.final_state, spec);
    out.steps = static_cast<int>(epi.actions.size());
    out.stop_reason = "expert-done";
  });
  finalize_report(report);
  return report;
}

// ---------------------------------------------------------------------------
// Artifact store: datasets and checkpoints under a working directory,
// content-addressed so study reruns reuse identical artifacts.
// ---------------------------------------------------------------------------

class ArtifactStore {
 public:
  explicit ArtifactStore(std::string workdir, bool reuse = true)
      : dir_(std::move(workdir)), reuse_(reuse) {
    std::filesystem::create_directories(dir_);
  }

  const std::string& dir() const { return dir_; }

  /// Dataset for (task, n, master seed); generated on demand. Smaller counts
  /// of the same seed are byte prefixes of larger ones by construction.
  std::string dataset_path(TaskKind task, int n_demos, uint64_t seed, ObsMode mode) {
    char name[160];
    std::snprintf(name, sizeof(name), "data_%s_%d_%llu_%s.jsonl", task_name(task), n_demos,
                  static_cast<unsigned long long>(seed), obs_mode_name(mode));
    std::string path = dir_ + "/" + name;
    if (!reuse_ || !std::filesystem::exists(path)) {
      TaskSpec spec;
      spec.kind = task;
      spec.seed = seed;
      generate_dataset_file(spec, n_demos, mode, path);
    }
    return path;
  }

  /// Deterministically trained primary bundle, cached as a checkpoint keyed
  /// by (dataset hash, config hash).
  PolicyBundle ours_bundle(const Dataset& data, uint64_t data_hash, const KVConfig& cfg) {
    char name[128];
    std::snprintf(name, sizeof(name), "ours_%016llx_%016llx.ckpt",
                  static_cast<unsigned long long>(data_hash),
                  static_cast<unsigned long long>(cfg.hash()));
    std::string path = dir_ + "/" + name;
    PolicyBundle bundle;
    if (reuse_ && std::filesystem::exists(path)) {
      Checkpoint ckpt = load_checkpoint(path);
      bundle.kind = MethodKind::ours;
      bundle.ours = DistanceModel::from_checkpoint(ckpt);
      bundle.has_ours = true;
      bundle.lambda_stop = ckpt.meta_double("lambda_stop");
      return bundle;
    }
    bundle = train_ours_bundle(data, cfg);
    Checkpoint ckpt = bundle.ours.to_checkpoint();
    ckpt.meta["lambda_stop"] = std::to_string(bundle.lambda_stop);
    ckpt.meta["task"] = data.header.task;
    save_checkpoint(path, ckpt);
    return bundle;
  }

 private:
  std::string dir_;
  bool reuse_;
};

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

namespace study_detail {

inline int demos_for(const KVConfig& cfg, TaskKind task) {
  switch (task) {
    case TaskKind::push: return cfg.get_int("demos_push");
    case TaskKind::pick_place: return cfg.get_int("demos_pick");
    case TaskKind::obstacle_push: return cfg.get_int("demos_obstacle");
  }
  return 0;
}

/// Per-task epoch override (pick-place trains on ~4x the transitions).
inline KVConfig task_train_config(const KVConfig& cfg, TaskKind task) {
  KVConfig out = cfg;
  if (task == TaskKind::pick_place) out.set("epochs", cfg.get("epochs_pick"));
  return out;
}

inline PolicyBundle train_method(MethodKind method, const Dataset& data, const KVConfig& cfg,
                                 const PolicyBundle* shared_ours) {
  if (method == MethodKind::ours) {
    throw std::logic_error("train_method: primary model goes through ArtifactStore");
  }
  PolicyBundle bundle;
  bundle.kind = method;
  if (shared_ours && shared_ours->has_ours) {
    bundle.ours = shared_ours->ours;  // shared gripper + distance diagnostics
    bundle.has_ours = true;
    bundle.lambda_stop = shared_ours->lambda_stop;
  }
  if (method == MethodKind::bc) {
    BCConfig bc_cfg = bc_config_from(cfg);
    Rng rng(derive_seed(bc_cfg.seed, 0xBC0));
    bundle.bc = BCPolicy(data.header.obs_dim, data.header.action_dim, bc_cfg, rng);
    BaselineTrainResult r = train_bc(bundle.bc, data, bc_cfg);
    if (r.aborted_non_finite) throw std::runtime_error("train_bc: non-finite loss");
  } else {
    IBCConfig ibc_cfg = ibc_config_from(cfg);
    Rng rng(derive_seed(ibc_cfg.seed, 0x1BC0));
    bundle.ibc = IBCModel(data.header.obs_dim, data.header.action_dim, ibc_cfg, rng);
    BaselineTrainResult r = train_ibc(bundle.ibc, data, ibc_cfg);
    if (r.aborted_non_finite) throw std::runtime_error("train_ibc: non-finite loss");
  }
  return bundle;
}

/// Mean |lateral| of the BC action relative to the expert's at the first
/// push-contact state of mirror-symmetric obstacle resets. Mean-collapsed
/// policies push straight at the obstacle: ratio near zero.
inline double bc_lateral_ratio(const BCPolicy& bc, const KVConfig& cfg, int n_resets = 20) {
  uint64_t seed = cfg.get_u64("eval_seed") ^ 0x1a7e7a1ULL;
  double bc_lat = 0.0, expert_lat = 0.0;
  int counted = 0;
  for (int i = 0; i < n_resets; ++i) {
    TaskSpec spec;
    spec.kind = TaskKind::obstacle_push;
    spec.seed = derive_seed(seed, static_cast<uint64_t>(i));
    spec.obstacle_lateral_jitter = 0.0;  // obstacle exactly on the axis
    ResetResult r = reset(spec);
    WorldState s = r.state;
    double contact = spec.agent_radius + spec.object_radius;
    bool found = false;
    for (int t = 0; t < 200 && !found; ++t) {
      ExpertDecision dec = scripted_expert(s, spec, ExpertStyle::left);
      if (dec.done) break;
      if ((s.agent_pos - s.objects[0].pos).norm() <= contact + 0.012) {
        Vec2 axis = (s.target.pos - s.objects[0].pos).normalized();
        Vec2 lat(-axis.y(), axis.x());
        Observation obs = observe(s, spec, ObsMode::state);
        Vec2 bc_action = bc.act(obs.values, r.goal.values, spec.a_max);
        bc_lat += std::abs(bc_action.dot(lat));
        expert_lat += std::abs(dec.action.dot(lat));
        ++counted;
        found = true;
      }
      s = step(s, dec.action, dec.gripper_closed, spec);
    }
  }
  if (counted == 0 || expert_lat <= 0.0) return 0.0;
  return bc_lat / expert_lat;
}

}  // namespace study_detail

/// Baseline comparison: every method trained on the identical per-task
/// dataset and evaluated on identical seeded episodes. Cell failures are
/// recorded in the status column and the study continues.
inline std::vector<ExperimentReport> run_baseline_study(const std::vector<TaskKind>& tasks,
                                                        const std::vector<MethodKind>& methods,
                                                        const KVConfig& cfg, ArtifactStore& store,
                                                        int n_episodes = -1) {
  std::vector<ExperimentReport> rows;
  ObsMode mode = obs_mode_from_name(cfg.get("obs_mode"));
  if (n_episodes < 0) n_episodes = cfg.get_int("episodes");
  for (TaskKind task : tasks) {
    int n_demos = study_detail::demos_for(cfg, task);
    KVConfig task_cfg = study_detail::task_train_config(cfg, task);
    std::string data_path;
    Dataset data;
    uint64_t data_hash = 0;
    PolicyBundle ours;
    bool ours_ok = false;
    std::string ours_error;
    try {
      data_path = store.dataset_path(task, n_demos, cfg.get_u64("seed"), mode);
      data_hash = file_hash(data_path);
      data = load_dataset(data_path);
      ours = store.ours_bundle(data, data_hash, task_cfg);
      ours_ok = true;
    } catch (const std::exception& e) {
      ours_error = e.what();
    }
    for (MethodKind method : methods) {
      ExperimentReport row;
      row.study = "baselines";
      row.method = method_name(method);
      row.task = task_name(task);
      row.n_demos = n_demos;
      row.config_hash = task_cfg.hash();
      row.dataset_hash = data_hash;
      try {
        if (!ours_ok) throw std::runtime_error(ours_error.empty() ? "setup failed" : ours_error);
        if (method == MethodKind::ours) {
          row = evaluate_policy(ours, data, task, task_cfg, n_episodes, "baselines");
        } else {
          PolicyBundle bundle = study_detail::train_method(method, data, task_cfg, &ours);
          row = evaluate_policy(bundle, data, task, task_cfg, n_episodes, "baselines");
        }
        row.dataset_hash = data_hash;
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// Data-scaling sweep with nested demo sets: each smaller dataset is a byte
/// prefix of the larger ones (same master seed).
inline std::vector<ExperimentReport> run_scaling_study(TaskKind task,
                                                       const std::vector<MethodKind>& methods,
                                                       const std::vector<int>& demo_counts,
                                                       const KVConfig& cfg, ArtifactStore& store,
                                                       int n_episodes = -1) {
  std::vector<ExperimentReport> rows;
  ObsMode mode = obs_mode_from_name(cfg.get("obs_mode"));
  KVConfig task_cfg = study_detail::task_train_config(cfg, task);
  if (n_episodes < 0) n_episodes = cfg.get_int("episodes");
  for (int count : demo_counts) {
    uint64_t data_hash = 0;
    Dataset data;
    bool setup_ok = false;
    std::string setup_error;
    PolicyBundle ours;
    bool ours_needed = false;
    for (MethodKind m : methods) ours_needed |= m == MethodKind::ours;
    try {
      if (count > 0) {
        std::string path = store.dataset_path(task, count, cfg.get_u64("seed"), mode);
        data_hash = file_hash(path);
        data = load_dataset(path);
      } else {
        data.header.task = task_name(task);
        data.header.mode = obs_mode_name(mode);
        data.header.obs_dim = 8;
        data.header.action_dim = 2;
      }
      setup_ok = true;
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (MethodKind method : methods) {
      ExperimentReport row;
      row.study = "scaling";
      row.method = method_name(method);
      row.task = task_name(task);
      row.n_demos = count;
      row.config_hash = task_cfg.hash();
      row.dataset_hash = data_hash;
      try {
        if (!setup_ok) throw std::runtime_error(setup_error);
        PolicyBundle bundle;
        if (count == 0) {
          // No training signal: untrained nets, empty candidate pool.
          bundle.kind = method;
          Rng rng(1);
          ModelConfig mc;
          mc.embed_dim = task_cfg.get_int("embed_dim");
          mc.encoder_hidden = task_cfg.get_int("encoder_hidden");
          bundle.ours = DistanceModel(mc, rng);
          bundle.has_ours = true;
          bundle.lambda_stop = -2.0;  // never fires
          if (method == MethodKind::bc) {
            BCConfig bc_cfg = bc_config_from(task_cfg);
            Rng brng(2);
            bundle.bc = BCPolicy(8, 2, bc_cfg, brng);
          } else if (method == MethodKind::ibc) {
            IBCConfig ibc_cfg = ibc_config_from(task_cfg);
            Rng irng(3);
            bundle.ibc = IBCModel(8, 2, ibc_cfg, irng);
          }
        } else if (method == MethodKind::ours) {
          bundle = store.ours_bundle(data, data_hash, task_cfg);
        } else {
          PolicyBundle shared = store.ours_bundle(data, data_hash, task_cfg);
          bundle = study_detail::train_method(method, data, task_cfg, &shared);
        }
        (void)ours_needed;
        row = evaluate_policy(bundle, data, task, task_cfg, n_episodes, "scaling");
        row.n_demos = count;
        row.dataset_hash = data_hash;
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

/// Multi-modality probe on obstacle-push: ours and BC trained on the same
/// 50/50 left-right demonstrations, plus an expert sanity row. Reports the
/// object-obstacle contact rate (the mean-action signature) and BC's lateral
/// collapse ratio on symmetric resets.
inline std::vector<ExperimentReport> run_multimodal_study(const KVConfig& cfg,
                                                          ArtifactStore& store) {
  std::vector<ExperimentReport> rows;
  ObsMode mode = obs_mode_from_name(cfg.get("obs_mode"));
  int n_episodes = cfg.get_int("multimodal_episodes");
  TaskKind task = TaskKind::obstacle_push;
  int n_demos = cfg.get_int("demos_obstacle");

  ExperimentReport expert_row = evaluate_expert(task, cfg, n_episodes, "multimodal");
  expert_row.n_demos = n_demos;
  expert_row.config_hash = cfg.hash();
  rows.push_back(expert_row);

  try {
    std::string path = store.dataset_path(task, n_demos, cfg.get_u64("seed"), mode);
    uint64_t data_hash = file_hash(path);
    Dataset data = load_dataset(path);

    PolicyBundle ours = store.ours_bundle(data, data_hash, cfg);
    ExperimentReport ours_row = evaluate_policy(ours, data, task, cfg, n_episodes, "multimodal");
    ours_row.dataset_hash = data_hash;
    rows.push_back(ours_row);

    PolicyBundle bc = study_detail::train_method(MethodKind::bc, data, cfg, &ours);
    ExperimentReport bc_row = evaluate_policy(bc, data, task, cfg, n_episodes, "multimodal");
    bc_row.dataset_hash = data_hash;
    bc_row.lateral_ratio = study_detail::bc_lateral_ratio(bc.bc, cfg);
    rows.push_back(bc_row);
  } catch (const std::exception& e) {
    ExperimentReport err;
    err.study = "multimodal";
    err.method = "ours/bc";
    err.task = task_name(task);
    err.status = std::string("error: ") + e.what();
    rows.push_back(err);
  }
  return rows;
}

/// Ablation arms on identical data and evaluation seeds: full model,
/// frozen-random encoder, and no-dynamics training.
inline std::vector<ExperimentReport> run_ablation_study(const std::vector<TaskKind>& tasks,
                                                        const KVConfig& cfg, ArtifactStore& store,
                                                        int n_episodes = -1) {
  std::vector<ExperimentReport> rows;
  ObsMode mode = obs_mode_from_name(cfg.get("obs_mode"));
  if (n_episodes < 0) n_episodes = cfg.get_int("episodes");
  struct Arm {
    const char* name;
    const char* encoder_mode;
    const char* dynamics_mode;
  };
  const Arm arms[] = {{"full", "trainable", "joint"},
                      {"frozen-random", "frozen-random", "joint"},
                      {"no-dynamics", "trainable", "ablated"}};
  for (TaskKind task : tasks) {
    int n_demos = study_detail::demos_for(cfg, task);
    for (const Arm& arm : arms) {
      KVConfig arm_cfg = study_detail::task_train_config(cfg, task);
      arm_cfg.set("encoder_mode", arm.encoder_mode);
      arm_cfg.set("dynamics_mode", arm.dynamics_mode);
      ExperimentReport row;
      row.study = "ablation";
      row.method = arm.name;
      row.task = task_name(task);
      row.n_demos = n_demos;
      row.config_hash = arm_cfg.hash();
      try {
        std::string path = store.dataset_path(task, n_demos, cfg.get_u64("seed"), mode);
        uint64_t data_hash = file_hash(path);
        Dataset data = load_dataset(path);
        PolicyBundle bundle = store.ours_bundle(data, data_hash, arm_cfg);
        row = evaluate_policy(bundle, data, task, arm_cfg, n_episodes, "ablation");
        row.method = arm.name;
        row.dataset_hash = data_hash;
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace seer
