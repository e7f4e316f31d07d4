#pragma once

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "seer/eval.hpp"
#include "seer/grad_check.hpp"

namespace seer {
namespace cli {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;  // key=value
  uint64_t seed = 0;
  bool seed_set = false;
};

inline KVConfig resolve_config(const CommonArgs& args) {
  KVConfig cfg = KVConfig::defaults();
  if (!args.config_path.empty()) cfg.load_file(args.config_path);
  for (const auto& kv : args.overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) throw std::runtime_error("--set expects key=value, got " + kv);
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed_set) cfg.set("seed", std::to_string(args.seed));
  return cfg;
}

inline void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  cmd->add_option("--set", args.overrides, "override a config key (key=value, repeatable)");
  cmd->add_option("--seed", args.seed, "master seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
}

inline std::vector<TaskKind> parse_tasks(const std::string& csv) {
  std::vector<TaskKind> tasks;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) tasks.push_back(task_from_name(item));
  }
  if (tasks.empty()) throw std::runtime_error("no tasks given");
  return tasks;
}

inline std::vector<MethodKind> parse_methods(const std::string& csv) {
  std::vector<MethodKind> methods;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) methods.push_back(method_from_name(item));
  }
  if (methods.empty()) throw std::runtime_error("no methods given");
  return methods;
}

// ---------------------------------------------------------------------------
// grad-check: every learned loss against central differences.
// ---------------------------------------------------------------------------

struct GradCheckOutcome {
  std::string name;
  GradCheckReport report;
  bool ok = false;
};

inline GradCheckOutcome check_loss(const std::string& name, ParameterSet& params,
                                   const std::function<LossEval()>& loss_fn, uint64_t seed,
                                   size_t coords) {
  GradCheckOutcome outcome;
  outcome.name = name;
  Rng rng(derive_seed(seed, fnv1a64(name)));
  outcome.report = grad_check(loss_fn, params, rng, 1e-5, coords);
  outcome.ok = outcome.report.checked > 0 && outcome.report.max_rel_err < 1e-4;
  return outcome;
}

/// Gradient integrity over the encoder/dynamics joint loss, the gripper BCE,
/// and both baseline losses, on seeded synthetic batches.
inline std::vector<GradCheckOutcome> run_grad_checks(uint64_t seed) {
  std::vector<GradCheckOutcome> outcomes;
  auto mat = [](Rng& rng, int r, int c, double lo, double hi) {
    Tensor2D m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
  };

  {  // joint loss: encoder + dynamics
    ModelConfig mc;
    mc.obs_dim = 8;
    mc.action_dim = 2;
    mc.embed_dim = 12;
    mc.encoder_hidden = 16;
    Rng init(derive_seed(seed, 1));
    DistanceModel model(mc, init);
    Rng data(derive_seed(seed, 2));
    TransitionBatch batch;
    batch.obs_t = mat(data, 4, 8, 0, 1);
    batch.obs_next = mat(data, 4, 8, 0, 1);
    batch.obs_goal = mat(data, 4, 8, 0, 1);
    batch.actions = mat(data, 4, 2, -0.012, 0.012);
    batch.neg_actions = mat(data, 4 * 8, 2, -0.012, 0.012);
    ParameterSet params = model.trainable_params();
    auto loss_fn = [&]() {
      JointLossResult r = model.joint_loss(batch);
      LossEval ev;
      ev.loss = r.loss;
      ev.grads = std::move(r.grads);
      ev.min_abs_preact = r.min_abs_preact;
      ev.kink_pos = r.kink_pos;
      ev.kink_neg = r.kink_neg;
      ev.degenerate_pairs = r.degenerate_pairs;
      return ev;
    };
    outcomes.push_back(check_loss("joint(encoder+dynamics)", params, loss_fn, seed, 300));
  }

  {  // gripper BCE through the sigmoid head
    ModelConfig mc;
    mc.obs_dim = 8;
    mc.action_dim = 2;
    mc.embed_dim = 12;
    mc.encoder_hidden = 16;
    Rng init(derive_seed(seed, 3));
    DistanceModel model(mc, init);
    Rng data(derive_seed(seed, 4));
    Tensor2D obs = mat(data, 16, 8, 0, 1);
    std::vector<int> labels(16);
    for (auto& l : labels) l = data.uniform() < 0.5 ? 0 : 1;
    Tensor2D emb = model.encode(obs);
    ParameterSet params;
    params.add_net("gripper", model.gripper());
    auto loss_fn = [&]() {
      ForwardCache cache;
      const Tensor2D& logits = model.gripper().forward(emb, cache);
      LossEval ev;
      Tensor2D upstream(logits.rows(), 1);
      for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        BceResult b = bce_with_logits(logits(i, 0), labels[static_cast<size_t>(i)]);
        ev.loss += b.loss / static_cast<double>(logits.rows());
        upstream(i, 0) = b.dp / static_cast<double>(logits.rows());
      }
      NetGrads g = model.gripper().backward(cache, upstream);
      ev.grads = {g.dw[0], g.db[0]};
      ev.min_abs_preact = cache.min_abs_preact;
      ev.kink_pos = cache.kink_pos;
      ev.kink_neg = cache.kink_neg;
      return ev;
    };
    outcomes.push_back(check_loss("gripper(bce)", params, loss_fn, seed, 13));
  }

  {  // BC regression loss
    BCConfig bc_cfg;
    Rng init(derive_seed(seed, 5));
    BCPolicy policy(8, 2, bc_cfg, init);
    Rng data(derive_seed(seed, 6));
    Tensor2D obs = mat(data, 6, 8, 0, 1);
    Tensor2D goal = mat(data, 6, 8, 0, 1);
    Tensor2D actions = mat(data, 6, 2, -0.012, 0.012);
    ParameterSet params = policy.params();
    auto loss_fn = [&]() {
      BCLossResult r = bc_loss(policy, obs, goal, actions);
      LossEval ev;
      ev.loss = r.loss;
      ev.grads = std::move(r.grads);
      ev.min_abs_preact = r.min_abs_preact;
      ev.kink_pos = r.kink_pos;
      ev.kink_neg = r.kink_neg;
      return ev;
    };
    outcomes.push_back(check_loss("bc(mse)", params, loss_fn, seed, 300));
  }

  {  // IBC InfoNCE loss
    IBCConfig ibc_cfg;
    ibc_cfg.embed_dim = 10;
    ibc_cfg.obs_hidden = 14;
    ibc_cfg.act_hidden = {6, 10};
    Rng init(derive_seed(seed, 7));
    IBCModel model(8, 2, ibc_cfg, init);
    Rng data(derive_seed(seed, 8));
    TransitionBatch batch;
    batch.obs_t = mat(data, 4, 8, 0, 1);
    batch.obs_goal = mat(data, 4, 8, 0, 1);
    batch.actions = mat(data, 4, 2, -0.012, 0.012);
    batch.neg_actions = mat(data, 4 * 6, 2, -0.012, 0.012);
    ParameterSet params = model.params();
    auto loss_fn = [&]() {
      IBCLossResult r = ibc_loss(model, batch);
      LossEval ev;
      ev.loss = r.loss;
      ev.grads = std::move(r.grads);
      ev.min_abs_preact = r.min_abs_preact;
      ev.kink_pos = r.kink_pos;
      ev.kink_neg = r.kink_neg;
      ev.degenerate_pairs = r.degenerate_pairs;
      return ev;
    };
    outcomes.push_back(check_loss("ibc(infonce)", params, loss_fn, seed, 300));
  }
  return outcomes;
}

// ---------------------------------------------------------------------------
// Subcommand bodies
// ---------------------------------------------------------------------------

inline int cmd_gen_data(const std::string& task, int episodes, const KVConfig& cfg,
                        const std::string& out) {
  TaskSpec spec;
  spec.kind = task_from_name(task);
  spec.seed = cfg.get_u64("seed");
  generate_dataset_file(spec, episodes, obs_mode_from_name(cfg.get("obs_mode")), out);
  std::cout << "wrote " << episodes << " " << task << " trajectories to " << out << "\n";
  return 0;
}

inline int cmd_train(const std::string& data_path, const KVConfig& cfg, const std::string& out,
                     const std::string& log_path) {
  Dataset data = load_dataset(data_path);
  PolicyBundle bundle = train_ours_bundle(data, cfg);
  Checkpoint ckpt = bundle.ours.to_checkpoint();
  ckpt.meta["lambda_stop"] = std::to_string(bundle.lambda_stop);
  ckpt.meta["task"] = data.header.task;
  save_checkpoint(out, ckpt);
  if (!log_path.empty()) {
    TrainConfig tc = train_config_from(cfg);
    // Re-run is wasteful; log from a fresh deterministic run only when asked.
    TrainResult tr = train(data, tc);
    write_train_log(log_path, tc, tr);
  }
  DataSplit split = split_dataset(data, cfg.get_double("val_fraction"));
  const Dataset& val = split.val.trajectories.empty() ? data : split.val;
  double mono = expert_monotonicity(bundle.ours, val);
  ActionPool pool(data);
  Rng mrng(derive_seed(cfg.get_u64("seed"), 0x70F1));
  double top1 = nce_top1_accuracy(bundle.ours, val, pool, cfg.get_int("k_negatives"), mrng);
  std::cout << "model -> " << out << "\n"
            << "lambda_stop = " << bundle.lambda_stop << "\n"
            << "held-out monotonicity = " << mono << ", nce top-1 = " << top1 << "\n";
  if (bundle.gripper_holdout_accuracy) {
    std::cout << "gripper held-out accuracy = " << *bundle.gripper_holdout_accuracy << "\n";
  }
  return 0;
}

inline int cmd_train_baseline(const std::string& method, const std::string& data_path,
                              const KVConfig& cfg, const std::string& out) {
  Dataset data = load_dataset(data_path);
  MethodKind kind = method_from_name(method);
  if (kind == MethodKind::ours) {
    throw std::runtime_error("train-baseline expects bc or ibc; use `train` for the primary model");
  }
  PolicyBundle bundle = study_detail::train_method(kind, data, cfg, nullptr);
  Checkpoint ckpt = kind == MethodKind::bc ? bundle.bc.to_checkpoint() : bundle.ibc.to_checkpoint();
  ckpt.meta["task"] = data.header.task;
  save_checkpoint(out, ckpt);
  std::cout << method << " model -> " << out << "\n";
  return 0;
}

inline int cmd_eval(const std::string& model_path, const std::string& task, int episodes,
                    const KVConfig& cfg, const std::string& data_path,
                    const std::string& gripper_path, const std::string& report_path,
                    const std::string& trace_path) {
  Checkpoint ckpt = load_checkpoint(model_path);
  std::string kind = ckpt.meta_at("kind");
  PolicyBundle bundle;
  if (kind == "ours") {
    bundle.kind = MethodKind::ours;
    bundle.ours = DistanceModel::from_checkpoint(ckpt);
    bundle.has_ours = true;
    if (ckpt.meta.count("lambda_stop")) bundle.lambda_stop = ckpt.meta_double("lambda_stop");
  } else if (kind == "bc") {
    bundle.kind = MethodKind::bc;
    bundle.bc = BCPolicy::from_checkpoint(ckpt);
  } else if (kind == "ibc") {
    bundle.kind = MethodKind::ibc;
    bundle.ibc = IBCModel::from_checkpoint(ckpt);
  } else {
    throw std::runtime_error("unknown checkpoint kind '" + kind + "'");
  }
  TaskKind task_kind = task_from_name(task);
  if (!bundle.has_ours && !gripper_path.empty()) {
    Checkpoint g = load_checkpoint(gripper_path);
    bundle.ours = DistanceModel::from_checkpoint(g);
    bundle.has_ours = true;
    if (g.meta.count("lambda_stop")) bundle.lambda_stop = g.meta_double("lambda_stop");
  }
  if (task_uses_gripper(task_kind) && !bundle.has_ours) {
    throw std::runtime_error("task '" + task +
                             "' needs the shared gripper classifier; pass --gripper <ours.ckpt>");
  }

  Dataset data;
  if (!data_path.empty()) {
    data = load_dataset(data_path);
  } else if (bundle.kind != MethodKind::bc) {
    throw std::runtime_error("method '" + kind + "' samples candidate actions; pass --data");
  } else {
    data.header.task = task;
    data.header.obs_dim = bundle.bc.obs_dim();
    data.header.action_dim = bundle.bc.action_dim();
    data.header.mode = cfg.get("obs_mode");
  }

  ExperimentReport report = evaluate_policy(bundle, data, task_kind, cfg, episodes, "eval");
  if (!report_path.empty()) write_episode_csv(report_path, report);
  if (!trace_path.empty() && episodes > 0) {
    // Re-run episode 0 to emit a step trace.
    TaskSpec spec;
    spec.kind = task_kind;
    spec.seed = derive_seed(cfg.get_u64("eval_seed"), 0);
    PlannerConfig pc = planner_config_from(cfg);
    pc.lambda_stop = bundle.lambda_stop;
    pc.seed = derive_seed(cfg.get_u64("eval_seed") ^ 0x5EEDCAFEULL, 0);
    ActionPool pool(data);
    EpisodeTrace trace;
    switch (bundle.kind) {
      case MethodKind::ours: trace = run_episode(bundle.ours, pool, spec, pc); break;
      case MethodKind::bc:
        trace = run_bc_episode(bundle.bc, bundle.has_ours ? &bundle.ours : nullptr, spec, pc);
        break;
      case MethodKind::ibc:
        trace = run_ibc_episode(bundle.ibc, pool, bundle.has_ours ? &bundle.ours : nullptr, spec,
                                pc);
        break;
    }
    write_trace(trace_path, trace);
  }
  std::printf("%s on %s: %d/%d success (%.1f%%), mean steps %.1f\n", kind.c_str(), task.c_str(),
              report.successes, report.n_episodes, 100.0 * report.success_rate, report.mean_steps);
  return 0;
}

inline int cmd_replay(const std::string& data_path) {
  Dataset data = load_dataset(data_path);
  TaskSpec base;
  base.kind = data.task_kind();
  ReplayReport report = replay_dataset(data, base);
  std::printf("replayed %zu episodes: %zu successes, %zu observation mismatches\n", report.episodes,
              report.successes, report.observation_mismatches);
  if (!report.all_ok()) {
    std::cerr << "replay check failed (dataset generated with non-default ranges?)\n";
    return 2;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

inline int dispatch(int argc, const char* const* argv) {
  CLI::App app{"desk-scale goal-conditioned manipulation: learned distance + dynamics control"};
  app.require_subcommand(1);

  CommonArgs common;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate expert demonstration dataset");
  std::string gen_task = "push";
  int gen_episodes = 100;
  std::string gen_out = "data.jsonl";
  gen->add_option("--task", gen_task, "push | pick-place | obstacle-push");
  gen->add_option("--episodes", gen_episodes, "number of demonstrations");
  gen->add_option("--out", gen_out, "output JSONL path");
  add_common(gen, common);

  // train
  auto* train_cmd = app.add_subcommand("train", "train the distance+dynamics model");
  std::string train_data, train_out = "model.ckpt", train_log;
  train_cmd->add_option("--data", train_data, "training dataset (JSONL)")->required();
  train_cmd->add_option("--out", train_out, "checkpoint output path");
  train_cmd->add_option("--log", train_log, "per-epoch CSV run log");
  add_common(train_cmd, common);

  // train-baseline
  auto* tb = app.add_subcommand("train-baseline", "train bc or ibc baseline");
  std::string tb_method = "bc", tb_data, tb_out = "baseline.ckpt";
  tb->add_option("--method", tb_method, "bc | ibc");
  tb->add_option("--data", tb_data, "training dataset (JSONL)")->required();
  tb->add_option("--out", tb_out, "checkpoint output path");
  add_common(tb, common);

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on seeded episodes");
  std::string ev_model, ev_task = "push", ev_data, ev_gripper, ev_report, ev_trace;
  int ev_episodes = 50;
  ev->add_option("--model", ev_model, "checkpoint path")->required();
  ev->add_option("--task", ev_task, "push | pick-place | obstacle-push");
  ev->add_option("--episodes", ev_episodes, "number of evaluation episodes");
  ev->add_option("--data", ev_data, "dataset for the candidate action pool");
  ev->add_option("--gripper", ev_gripper, "ours checkpoint providing the shared gripper");
  ev->add_option("--report", ev_report, "per-episode CSV output");
  ev->add_option("--trace", ev_trace, "JSONL step trace of episode 0");
  add_common(ev, common);

  // studies
  auto* sb = app.add_subcommand("study-baselines", "ours vs baselines per task");
  std::string sb_tasks = "push,pick-place", sb_methods = "ours,bc", sb_out = "study_baselines";
  sb->add_option("--tasks", sb_tasks, "comma-separated tasks");
  sb->add_option("--methods", sb_methods, "comma-separated methods (ours,bc,ibc)");
  sb->add_option("--out", sb_out, "output directory");
  add_common(sb, common);

  auto* sc = app.add_subcommand("study-scaling", "success vs demonstration count");
  std::string sc_task = "push", sc_methods = "ours", sc_out = "study_scaling", sc_counts;
  sc->add_option("--task", sc_task, "task");
  sc->add_option("--methods", sc_methods, "comma-separated methods");
  sc->add_option("--counts", sc_counts, "comma-separated demo counts (default: config)");
  sc->add_option("--out", sc_out, "output directory");
  add_common(sc, common);

  auto* sm = app.add_subcommand("study-multimodal", "obstacle-push multi-modality probe");
  std::string sm_out = "study_multimodal";
  sm->add_option("--out", sm_out, "output directory");
  add_common(sm, common);

  auto* sa = app.add_subcommand("study-ablation", "full vs frozen-random vs no-dynamics");
  std::string sa_tasks = "push", sa_out = "study_ablation";
  sa->add_option("--tasks", sa_tasks, "comma-separated tasks");
  sa->add_option("--out", sa_out, "output directory");
  add_common(sa, common);

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "finite-difference check of every learned loss");
  add_common(gc, common);

  // replay
  auto* rp = app.add_subcommand("replay", "re-simulate a dataset and verify it");
  std::string rp_data;
  rp->add_option("--data", rp_data, "dataset JSONL")->required();
  add_common(rp, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    KVConfig cfg = resolve_config(common);
    if (gen->parsed()) return cmd_gen_data(gen_task, gen_episodes, cfg, gen_out);
    if (train_cmd->parsed()) return cmd_train(train_data, cfg, train_out, train_log);
    if (tb->parsed()) return cmd_train_baseline(tb_method, tb_data, cfg, tb_out);
    if (ev->parsed()) {
      return cmd_eval(ev_model, ev_task, ev_episodes, cfg, ev_data, ev_gripper, ev_report,
                      ev_trace);
    }
    if (sb->parsed()) {
      ArtifactStore store(sb_out + "/artifacts");
      auto rows = run_baseline_study(parse_tasks(sb_tasks), parse_methods(sb_methods), cfg, store);
      write_summary_csv(sb_out + "/baselines.csv", rows);
      for (const auto& r : rows) std::cout << summary_csv_row(r) << "\n";
      return 0;
    }
    if (sc->parsed()) {
      ArtifactStore store(sc_out + "/artifacts");
      std::vector<int> counts;
      if (sc_counts.empty()) {
        counts = cfg.get_int_list("scaling_counts");
      } else {
        std::stringstream ss(sc_counts);
        std::string item;
        while (std::getline(ss, item, ',')) counts.push_back(std::stoi(item));
      }
      auto rows = run_scaling_study(task_from_name(sc_task), parse_methods(sc_methods), counts,
                                    cfg, store);
      write_summary_csv(sc_out + "/scaling.csv", rows);
      for (const auto& r : rows) std::cout << summary_csv_row(r) << "\n";
      return 0;
    }
    if (sm->parsed()) {
      ArtifactStore store(sm_out + "/artifacts");
      auto rows = run_multimodal_study(cfg, store);
      write_summary_csv(sm_out + "/multimodal.csv", rows);
      for (const auto& r : rows) std::cout << summary_csv_row(r) << "\n";
      return 0;
    }
    if (sa->parsed()) {
      ArtifactStore store(sa_out + "/artifacts");
      auto rows = run_ablation_study(parse_tasks(sa_tasks), cfg, store);
      write_summary_csv(sa_out + "/ablation.csv", rows);
      for (const auto& r : rows) std::cout << summary_csv_row(r) << "\n";
      return 0;
    }
    if (gc->parsed()) {
      auto outcomes = run_grad_checks(cfg.get_u64("seed"));
      bool all_ok = true;
      for (const auto& o : outcomes) {
        std::printf("%-24s max rel err %.3e  (checked %zu, skipped %zu)  %s\n", o.name.c_str(),
                    o.report.max_rel_err, o.report.checked, o.report.skipped,
                    o.ok ? "OK" : "FAIL");
        all_ok &= o.ok;
      }
      return all_ok ? 0 : 2;
    }
    if (rp->parsed()) return cmd_replay(rp_data);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace cli
}  // namespace seer
