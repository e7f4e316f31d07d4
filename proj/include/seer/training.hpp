#pragma once

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "seer/dataset.hpp"
#include "seer/model.hpp"

namespace seer {

struct TrainConfig {
  double lr = 1e-3;
  int batch = 64;
  int epochs = 500;
  int k_negatives = 64;
  double lambda_d = 1.0;
  double lambda_f = 1.0;
  uint64_t seed = 0;
  double augment_sigma = 0.002;
  std::string encoder_mode = "trainable";  // trainable | frozen-random
  std::string dynamics_mode = "joint";     // joint | ablated
  int embed_dim = 32;
  int encoder_hidden = 256;
  double action_scale = 100.0;
  bool residual_dynamics = true;
  bool stop_grad_target = false;
  double val_fraction = 0.1;
  bool early_stop = false;   // stop when the 20-epoch moving average stalls
  double action_noise = 0.01;  // fallback perturbation for degenerate pools

  bool frozen_encoder() const { return encoder_mode == "frozen-random"; }
  bool ablated_dynamics() const { return dynamics_mode == "ablated"; }
};

// Trajectory split by index: the tail `val_fraction` of trajectories is held
// out for the monotonicity / top-1 metrics.
struct DataSplit {
  Dataset train;
  Dataset val;
};

inline DataSplit split_dataset(const Dataset& data, double val_fraction) {
  DataSplit split;
  split.train.header = data.header;
  split.val.header = data.header;
  size_t n = data.trajectories.size();
  size_t n_val = static_cast<size_t>(std::ceil(val_fraction * static_cast<double>(n)));
  if (n_val >= n) n_val = n > 1 ? 1 : 0;
  size_t n_train = n - n_val;
  for (size_t i = 0; i < n; ++i) {
    (i < n_train ? split.train : split.val).trajectories.push_back(data.trajectories[i]);
  }
  return split;
}

// Every action in the dataset, flattened in trajectory order. The planner's
// candidate pool and the negative sampler both draw from this.
struct ActionPool {
  std::vector<std::vector<double>> actions;

  explicit ActionPool(const Dataset& data) {
    for (const auto& t : data.trajectories)
      for (const auto& a : t.actions) actions.push_back(a);
  }
  size_t size() const { return actions.size(); }
};

struct ObservationPool {
  std::vector<const std::vector<double>*> obs;

  explicit ObservationPool(const Dataset& data) {
    for (const auto& t : data.trajectories)
      for (const auto& o : t.obs) obs.push_back(&o);
  }
  size_t size() const { return obs.size(); }
};

namespace training_detail {

inline void fill_row(Tensor2D& m, Eigen::Index row, const std::vector<double>& values) {
  for (size_t i = 0; i < values.size(); ++i) m(row, static_cast<Eigen::Index>(i)) = values[i];
}

inline void add_noise(Tensor2D& m, double sigma, Rng& rng) {
  if (sigma <= 0.0) return;
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += sigma * rng.normal();
}

}  // namespace training_detail

/// Uniform minibatch over the given dataset's transitions. Negatives are K
/// actions per element drawn from the pooled action set, excluding the
/// positive action's global index; a pool with no admissible negative falls
/// back to a perturbed copy of the positive. Gaussian observation noise is
/// the augmentation (applied to current/next/goal independently).
inline TransitionBatch sample_batch(const Dataset& data, const TransitionIndex& index,
                                    const ActionPool& pool, const TrainConfig& cfg, Rng& rng,
                                    const ObservationPool* obs_pool = nullptr) {
  if (index.size() == 0) throw std::invalid_argument("sample_batch: dataset has no transitions");
  const int b = cfg.batch;
  const int k = cfg.k_negatives;
  const int obs_dim = data.header.obs_dim;
  const int act_dim = data.header.action_dim;

  TransitionBatch batch;
  batch.obs_t.resize(b, obs_dim);
  batch.obs_next.resize(b, obs_dim);
  batch.obs_goal.resize(b, obs_dim);
  batch.actions.resize(b, act_dim);
  batch.neg_actions.resize(static_cast<Eigen::Index>(b) * k, act_dim);
  if (obs_pool) batch.neg_obs.resize(static_cast<Eigen::Index>(b) * k, obs_dim);

  // Global action index offsets per trajectory, to exclude the positive.
  // (Recomputed on the fly from the transition index entry.)
  std::vector<size_t> traj_offset(data.trajectories.size() + 1, 0);
  for (size_t t = 0; t < data.trajectories.size(); ++t) {
    traj_offset[t + 1] = traj_offset[t] + data.trajectories[t].n_transitions();
  }

  for (int bi = 0; bi < b; ++bi) {
    auto [ti, si] = index.entries[rng.index(index.size())];
    const Trajectory& traj = data.trajectories[ti];
    training_detail::fill_row(batch.obs_t, bi, traj.obs[si]);
    training_detail::fill_row(batch.obs_next, bi, traj.obs[si + 1]);
    training_detail::fill_row(batch.obs_goal, bi, traj.goal);
    training_detail::fill_row(batch.actions, bi, traj.actions[si]);
    size_t positive_global = traj_offset[ti] + si;

    for (int j = 0; j < k; ++j) {
      Eigen::Index row = static_cast<Eigen::Index>(bi) * k + j;
      bool filled = false;
      if (pool.size() > 1) {
        for (int attempt = 0; attempt < 100; ++attempt) {
          size_t cand = rng.index(pool.size());
          if (cand == positive_global) continue;
          training_detail::fill_row(batch.neg_actions, row, pool.actions[cand]);
          filled = true;
          break;
        }
      }
      if (!filled) {
        // Degenerate pool: perturbed positive.
        for (int c = 0; c < act_dim; ++c) {
          batch.neg_actions(row, c) = traj.actions[si][static_cast<size_t>(c)] +
                                      cfg.action_noise * rng.normal();
        }
      }
      if (obs_pool) {
        size_t cand = rng.index(obs_pool->size());
        training_detail::fill_row(batch.neg_obs, row, *obs_pool->obs[cand]);
      }
    }
  }

  training_detail::add_noise(batch.obs_t, cfg.augment_sigma, rng);
  training_detail::add_noise(batch.obs_next, cfg.augment_sigma, rng);
  training_detail::add_noise(batch.obs_goal, cfg.augment_sigma, rng);
  return batch;
}

struct EpochLog {
  int epoch = 0;
  double loss_total = 0.0;
  double loss_d = 0.0;
  double loss_f = 0.0;
  double nce_top1_train = 0.0;
};

struct TrainResult {
  DistanceModel model;
  std::vector<EpochLog> log;
  bool aborted_non_finite = false;
  int steps_run = 0;
};

/// Joint training loop. Deterministic for a fixed seed and input data; on a
/// non-finite loss the last epoch-end parameters are restored and training
/// stops. frozen-random mode never updates the encoder; ablated mode uses the
/// observation-negative distance loss and detached dynamics fitting.
inline TrainResult train(const Dataset& data, const TrainConfig& cfg) {
  ModelConfig mc;
  mc.obs_dim = data.header.obs_dim;
  mc.action_dim = data.header.action_dim;
  mc.embed_dim = cfg.embed_dim;
  mc.encoder_hidden = cfg.encoder_hidden;
  mc.obs_mode = data.header.mode;
  mc.weights.lambda_d = cfg.lambda_d;
  mc.weights.lambda_f = cfg.lambda_f;
  mc.action_scale = cfg.action_scale;
  mc.residual_dynamics = cfg.residual_dynamics;
  mc.stop_grad_target = cfg.stop_grad_target;

  Rng init_rng(derive_seed(cfg.seed, 0x1417));
  TrainResult result;
  result.model = DistanceModel(mc, init_rng);

  DataSplit split = split_dataset(data, cfg.val_fraction);
  const Dataset& train_data = split.train.trajectories.empty() ? data : split.train;
  TransitionIndex index(train_data);
  if (index.size() == 0 || cfg.epochs == 0) return result;
  ActionPool pool(train_data);
  ObservationPool obs_pool(train_data);
  const ObservationPool* obs_pool_ptr = cfg.ablated_dynamics() ? &obs_pool : nullptr;

  ParameterSet params = result.model.trainable_params();
  const size_t encoder_grad_count = 2 * result.model.encoder().n_layers();
  AdamState adam;
  adam.lr = cfg.lr;
  adam.init(params);

  Rng batch_rng(derive_seed(cfg.seed, 0x6A77));
  int steps_per_epoch = std::max<int>(1, static_cast<int>(index.size()) / cfg.batch);

  std::vector<NamedTensor> snapshot = snapshot_params(params);
  std::vector<double> recent_total;
  LossWorkspace workspace;
  workspace.disable_kink_tracking();

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    long top1 = 0;
    for (int s = 0; s < steps_per_epoch; ++s) {
      TransitionBatch batch =
          sample_batch(train_data, index, pool, cfg, batch_rng, obs_pool_ptr);
      JointLossResult loss =
          result.model.joint_loss(batch, cfg.ablated_dynamics(), &workspace);
      if (!std::isfinite(loss.loss)) {
        Checkpoint rollback;
        rollback.params = snapshot;
        restore_params(params, rollback);
        result.aborted_non_finite = true;
        result.log.push_back(log);
        return result;
      }
      if (cfg.frozen_encoder()) {
        for (size_t gi = 0; gi < encoder_grad_count; ++gi) loss.grads[gi].setZero();
      }
      adam_step(params, loss.grads, adam);
      log.loss_total += loss.loss;
      log.loss_d += loss.loss_d;
      log.loss_f += loss.loss_f;
      top1 += loss.top1_correct;
      result.steps_run += 1;
    }
    log.loss_total /= steps_per_epoch;
    log.loss_d /= steps_per_epoch;
    log.loss_f /= steps_per_epoch;
    log.nce_top1_train =
        static_cast<double>(top1) / (static_cast<double>(steps_per_epoch) * cfg.batch);
    result.log.push_back(log);
    snapshot = snapshot_params(params);

    if (cfg.early_stop) {
      recent_total.push_back(log.loss_total);
      if (recent_total.size() >= 40) {
        double prev = 0, cur = 0;
        for (size_t i = recent_total.size() - 40; i < recent_total.size() - 20; ++i)
          prev += recent_total[i];
        for (size_t i = recent_total.size() - 20; i < recent_total.size(); ++i)
          cur += recent_total[i];
        if (cur >= prev - 1e-6) break;
      }
    }
  }
  return result;
}

/// Writes the run log as CSV with the configuration echoed as '#' comments.
inline void write_train_log(const std::string& path, const TrainConfig& cfg,
                            const TrainResult& result) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_train_log: cannot open: " + path);
  char buf[256];
  os << "# lr=" << cfg.lr << " batch=" << cfg.batch << " epochs=" << cfg.epochs
     << " k_negatives=" << cfg.k_negatives << " lambda_d=" << cfg.lambda_d
     << " lambda_F=" << cfg.lambda_f << " seed=" << cfg.seed
     << " augment_sigma=" << cfg.augment_sigma << " encoder_mode=" << cfg.encoder_mode
     << " dynamics_mode=" << cfg.dynamics_mode << "\n";
  os << "epoch,loss_total,loss_d,loss_F,nce_top1_train\n";
  for (const auto& e : result.log) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.6f\n", e.epoch, e.loss_total, e.loss_d,
                  e.loss_f, e.nce_top1_train);
    os << buf;
  }
}

// ---------------------------------------------------------------------------
// Held-out metrics for the distance premise.
// ---------------------------------------------------------------------------

/// Fraction of expert steps where d(i_t+1, i_g) < d(i_t, i_g).
inline double expert_monotonicity(const DistanceModel& model, const Dataset& data) {
  long total = 0, monotone = 0;
  for (const auto& traj : data.trajectories) {
    RowVec i_g = model.encode_row(traj.goal);
    RowVec prev = model.encode_row(traj.obs[0]);
    double d_prev = DistanceModel::distance(prev, i_g);
    for (size_t t = 1; t < traj.obs.size(); ++t) {
      RowVec cur = model.encode_row(traj.obs[t]);
      double d_cur = DistanceModel::distance(cur, i_g);
      if (d_cur < d_prev) ++monotone;
      ++total;
      d_prev = d_cur;
    }
  }
  return total > 0 ? static_cast<double>(monotone) / static_cast<double>(total) : 0.0;
}

/// Fraction of transitions where the expert action's predicted next state is
/// more goal-similar than all K sampled negative actions.
inline double nce_top1_accuracy(const DistanceModel& model, const Dataset& data,
                                const ActionPool& pool, int k, Rng& rng) {
  long total = 0, correct = 0;
  const int act_dim = data.header.action_dim;
  for (const auto& traj : data.trajectories) {
    RowVec i_g = model.encode_row(traj.goal);
    for (size_t t = 0; t < traj.n_transitions(); ++t) {
      RowVec i_t = model.encode_row(traj.obs[t]);
      Tensor2D acts(1 + k, act_dim);
      training_detail::fill_row(acts, 0, traj.actions[t]);
      for (int j = 0; j < k; ++j) {
        training_detail::fill_row(acts, 1 + j, pool.actions[rng.index(pool.size())]);
      }
      Tensor2D embs(1 + k, i_t.size());
      embs.rowwise() = i_t;
      Tensor2D preds = model.predict_next(embs, acts);
      double s_pos = cosine_similarity(preds.row(0), i_g).value;
      bool best = true;
      for (int j = 1; j <= k; ++j) {
        if (cosine_similarity(preds.row(j), i_g).value >= s_pos) {
          best = false;
          break;
        }
      }
      if (best) ++correct;
      ++total;
    }
  }
  return total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

// ---------------------------------------------------------------------------
// Gripper classifier training (single layer on a frozen encoder).
// ---------------------------------------------------------------------------

struct GripperTrainResult {
  double held_out_accuracy = 0.0;
  int n_used = 0;
  bool clamped = false;  // requested more labels than available
};

/// Trains only the gripper layer on `n_labels` class-balanced frames.
/// Throws if the dataset lacks one of the classes (e.g. pushing data).
inline GripperTrainResult train_gripper(DistanceModel& model, const Dataset& data, int n_labels,
                                        uint64_t seed, double lr = 1e-2, int steps = 400) {
  struct Frame {
    const std::vector<double>* obs;
    int label;
  };
  std::vector<Frame> open_frames, closed_frames;
  for (const auto& traj : data.trajectories) {
    for (size_t t = 0; t < traj.obs.size(); ++t) {
      (traj.gripper[t] == 1 ? closed_frames : open_frames).push_back({&traj.obs[t], traj.gripper[t]});
    }
  }
  if (open_frames.empty() || closed_frames.empty()) {
    throw std::runtime_error(
        "train_gripper: dataset lacks both gripper classes (task without gripper control)");
  }

  Rng rng(derive_seed(seed, 0x6717));
  auto take = [&](std::vector<Frame>& src, size_t want) {
    // Deterministic Fisher-Yates prefix.
    for (size_t i = 0; i < std::min(want, src.size()); ++i) {
      size_t j = i + rng.index(src.size() - i);
      std::swap(src[i], src[j]);
    }
    return std::min(want, src.size());
  };

  GripperTrainResult result;
  size_t half = static_cast<size_t>(n_labels) / 2;
  size_t n_closed = take(closed_frames, half);
  size_t n_open = take(open_frames, static_cast<size_t>(n_labels) - n_closed);
  if (n_open + n_closed < static_cast<size_t>(n_labels)) result.clamped = true;
  result.n_used = static_cast<int>(n_open + n_closed);

  const int obs_dim = data.header.obs_dim;
  Tensor2D x(result.n_used, obs_dim);
  std::vector<int> y(static_cast<size_t>(result.n_used));
  for (size_t i = 0; i < n_closed; ++i) {
    training_detail::fill_row(x, static_cast<Eigen::Index>(i), *closed_frames[i].obs);
    y[i] = 1;
  }
  for (size_t i = 0; i < n_open; ++i) {
    training_detail::fill_row(x, static_cast<Eigen::Index>(n_closed + i), *open_frames[i].obs);
    y[n_closed + i] = 0;
  }

  // Frozen encoder: embed once.
  Tensor2D emb = model.encode(x);
  DenseNet& g = model.gripper();
  ParameterSet params;
  params.add_net("gripper", g);
  AdamState adam;
  adam.lr = lr;
  adam.init(params);
  for (int s = 0; s < steps; ++s) {
    ForwardCache cache;
    Tensor2D logits = g.forward(emb, cache);
    Tensor2D upstream(logits.rows(), 1);
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
      BceResult b = bce_with_logits(logits(i, 0), y[static_cast<size_t>(i)]);
      upstream(i, 0) = b.dp / static_cast<double>(logits.rows());
    }
    NetGrads grads = g.backward(cache, upstream);
    GradList gl = {grads.dw[0], grads.db[0]};
    adam_step(params, gl, adam);
  }

  // Held-out accuracy over all remaining labeled frames.
  long correct = 0, total = 0;
  auto eval_range = [&](const std::vector<Frame>& frames, size_t skip) {
    for (size_t i = skip; i < frames.size(); ++i) {
      RowVec e = model.encode_row(*frames[i].obs);
      int pred = model.gripper_prob(e) > 0.5 ? 1 : 0;
      if (pred == frames[i].label) ++correct;
      ++total;
    }
  };
  eval_range(closed_frames, n_closed);
  eval_range(open_frames, n_open);
  result.held_out_accuracy =
      total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 1.0;
  return result;
}

}  // namespace seer
