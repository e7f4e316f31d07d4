#pragma once

#include <string>
#include <vector>

#include "seer/controller.hpp"
#include "seer/model.hpp"
#include "seer/training.hpp"

namespace seer {

// ---------------------------------------------------------------------------
// Behavior cloning: regress expert actions from (obs, goal).
// ---------------------------------------------------------------------------

struct BCConfig {
  double lr = 1e-3;
  int batch = 64;
  int epochs = 200;
  uint64_t seed = 0;
  std::vector<int> hidden = {64, 32, 16};
  double augment_sigma = 0.01;
  double val_fraction = 0.1;  // same split as the primary method
  // The net regresses actions multiplied by this scale (planar actions are
  // O(a_max); O(1) targets condition the regression).
  double action_scale = 20.0;
};

class BCPolicy {
 public:
  BCPolicy() = default;

  BCPolicy(int obs_dim, int action_dim, const BCConfig& cfg, Rng& rng)
      : obs_dim_(obs_dim), action_dim_(action_dim), action_scale_(cfg.action_scale) {
    std::vector<int> sizes;
    sizes.push_back(2 * obs_dim);
    for (int h : cfg.hidden) sizes.push_back(h);
    sizes.push_back(action_dim);
    net_ = DenseNet(sizes, rng);
  }

  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }
  double action_scale() const { return action_scale_; }
  DenseNet& net() { return net_; }
  const DenseNet& net() const { return net_; }

  ParameterSet params() {
    ParameterSet p;
    p.add_net("bc", net_);
    return p;
  }

  /// Deterministic action for (obs, goal), clipped to a_max.
  Vec2 act(const std::vector<double>& obs, const std::vector<double>& goal, double a_max) const {
    Tensor2D x(1, 2 * obs_dim_);
    for (int i = 0; i < obs_dim_; ++i) {
      x(0, i) = obs[static_cast<size_t>(i)];
      x(0, obs_dim_ + i) = goal[static_cast<size_t>(i)];
    }
    Tensor2D y = net_.forward(x);
    Vec2 a(y(0, 0) / action_scale_, y(0, 1) / action_scale_);
    double n = a.norm();
    if (n > a_max) a *= a_max / n;
    return a;
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.meta["kind"] = "bc";
    ckpt.meta["obs_dim"] = std::to_string(obs_dim_);
    ckpt.meta["action_dim"] = std::to_string(action_dim_);
    std::string sizes;
    for (size_t i = 1; i + 1 < net_.sizes().size(); ++i) {
      if (!sizes.empty()) sizes += ",";
      sizes += std::to_string(net_.sizes()[i]);
    }
    ckpt.meta["hidden"] = sizes;
    ckpt.meta["action_scale"] = std::to_string(action_scale_);
    BCPolicy* self = const_cast<BCPolicy*>(this);
    ckpt.params = snapshot_params(self->params());
    return ckpt;
  }

  static BCPolicy from_checkpoint(const Checkpoint& ckpt) {
    BCConfig cfg;
    cfg.hidden.clear();
    std::string hidden = ckpt.meta_at("hidden");
    size_t pos = 0;
    while (pos < hidden.size()) {
      size_t comma = hidden.find(',', pos);
      if (comma == std::string::npos) comma = hidden.size();
      cfg.hidden.push_back(std::stoi(hidden.substr(pos, comma - pos)));
      pos = comma + 1;
    }
    cfg.action_scale = ckpt.meta_double("action_scale");
    Rng rng(0);
    BCPolicy policy(ckpt.meta_int("obs_dim"), ckpt.meta_int("action_dim"), cfg, rng);
    ParameterSet p = policy.params();
    restore_params(p, ckpt);
    return policy;
  }

 private:
  int obs_dim_ = 0;
  int action_dim_ = 0;
  double action_scale_ = 20.0;
  DenseNet net_;
};

struct BCLossResult {
  double loss = 0.0;
  GradList grads;
  double min_abs_preact = std::numeric_limits<double>::infinity();
  long kink_pos = 0;
  long kink_neg = 0;
  long degenerate_pairs = 0;  // always 0: the regression has no cosine
};

inline BCLossResult bc_loss(const BCPolicy& policy, const Tensor2D& obs, const Tensor2D& goal,
                            const Tensor2D& actions) {
  Tensor2D x(obs.rows(), obs.cols() + goal.cols());
  x.leftCols(obs.cols()) = obs;
  x.rightCols(goal.cols()) = goal;
  ForwardCache cache;
  const DenseNet& net = policy.net();
  Tensor2D pred = net.forward(x, cache);
  Tensor2D target = policy.action_scale() * actions;
  MseResult mse = mse_loss(pred, target);
  NetGrads g = net.backward(cache, mse.dpred);
  BCLossResult res;
  res.loss = mse.loss;
  res.min_abs_preact = cache.min_abs_preact;
  res.kink_pos = cache.kink_pos;
  res.kink_neg = cache.kink_neg;
  for (size_t l = 0; l < net.n_layers(); ++l) {
    res.grads.push_back(g.dw[l]);
    res.grads.push_back(g.db[l]);
  }
  return res;
}

struct BaselineTrainResult {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_top1;  // filled by train_ibc
  bool aborted_non_finite = false;
};

inline BaselineTrainResult train_bc(BCPolicy& policy, const Dataset& data, const BCConfig& cfg) {
  BaselineTrainResult result;
  DataSplit split = split_dataset(data, cfg.val_fraction);
  const Dataset& train_data = split.train.trajectories.empty() ? data : split.train;
  TransitionIndex index(train_data);
  if (index.size() == 0 || cfg.epochs == 0) return result;
  ActionPool pool(train_data);

  TrainConfig sample_cfg;
  sample_cfg.batch = cfg.batch;
  sample_cfg.k_negatives = 1;  // unused by the loss
  sample_cfg.augment_sigma = cfg.augment_sigma;

  ParameterSet params = policy.params();
  AdamState adam;
  adam.lr = cfg.lr;
  adam.init(params);
  Rng rng(derive_seed(cfg.seed, 0xBC));
  int steps_per_epoch = std::max<int>(1, static_cast<int>(index.size()) / cfg.batch);
  std::vector<NamedTensor> snapshot = snapshot_params(params);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (int s = 0; s < steps_per_epoch; ++s) {
      TransitionBatch batch = sample_batch(train_data, index, pool, sample_cfg, rng);
      BCLossResult loss = bc_loss(policy, batch.obs_t, batch.obs_goal, batch.actions);
      if (!std::isfinite(loss.loss)) {
        Checkpoint rollback;
        rollback.params = snapshot;
        restore_params(params, rollback);
        result.aborted_non_finite = true;
        return result;
      }
      adam_step(params, loss.grads, adam);
      total += loss.loss;
    }
    result.epoch_loss.push_back(total / steps_per_epoch);
    snapshot = snapshot_params(params);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Implicit BC: score candidate actions against the observation embedding.
// ---------------------------------------------------------------------------

struct IBCConfig {
  double lr = 1e-3;
  int batch = 64;
  int epochs = 500;
  int k_negatives = 64;
  int embed_dim = 32;
  int obs_hidden = 64;
  std::vector<int> act_hidden = {16, 32};
  uint64_t seed = 0;
  double augment_sigma = 0.01;
  double val_fraction = 0.1;
  double action_scale = 20.0;
};

class IBCModel {
 public:
  IBCModel() = default;

  IBCModel(int obs_dim, int action_dim, const IBCConfig& cfg, Rng& rng)
      : obs_dim_(obs_dim),
        action_dim_(action_dim),
        embed_dim_(cfg.embed_dim),
        action_scale_(cfg.action_scale) {
    obs_encoder_ = DenseNet({2 * obs_dim, cfg.obs_hidden, cfg.embed_dim}, rng);
    std::vector<int> act_sizes;
    act_sizes.push_back(action_dim);
    for (int h : cfg.act_hidden) act_sizes.push_back(h);
    act_sizes.push_back(cfg.embed_dim);
    act_encoder_ = DenseNet(act_sizes, rng);
  }

  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return action_dim_; }
  double action_scale() const { return action_scale_; }
  DenseNet& obs_encoder() { return obs_encoder_; }
  const DenseNet& obs_encoder() const { return obs_encoder_; }
  DenseNet& act_encoder() { return act_encoder_; }
  const DenseNet& act_encoder() const { return act_encoder_; }

  ParameterSet params() {
    ParameterSet p;
    p.add_net("ibc_obs", obs_encoder_);
    p.add_net("ibc_act", act_encoder_);
    return p;
  }

  RowVec embed_obs(const std::vector<double>& obs, const std::vector<double>& goal) const {
    Tensor2D x(1, 2 * obs_dim_);
    for (int i = 0; i < obs_dim_; ++i) {
      x(0, i) = obs[static_cast<size_t>(i)];
      x(0, obs_dim_ + i) = goal[static_cast<size_t>(i)];
    }
    return obs_encoder_.forward(x).row(0);
  }

  /// Candidate maximizing cos(obs embedding, action embedding); ties break
  /// toward the lowest index.
  size_t act_index(const RowVec& obs_emb, const Tensor2D& candidates) const {
    if (candidates.rows() < 1) throw std::invalid_argument("act_ibc: need at least one candidate");
    Tensor2D kemb = act_encoder_.forward(Tensor2D(action_scale_ * candidates));
    size_t best = 0;
    double best_sim = -2.0;
    for (Eigen::Index c = 0; c < kemb.rows(); ++c) {
      double s = cosine_similarity(kemb.row(c), obs_emb).value;
      if (s > best_sim) {
        best_sim = s;
        best = static_cast<size_t>(c);
      }
    }
    return best;
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.meta["kind"] = "ibc";
    ckpt.meta["obs_dim"] = std::to_string(obs_dim_);
    ckpt.meta["action_dim"] = std::to_string(action_dim_);
    ckpt.meta["embed_dim"] = std::to_string(embed_dim_);
    ckpt.meta["obs_hidden"] = std::to_string(obs_encoder_.sizes()[1]);
    std::string act_sizes;
    for (size_t i = 1; i + 1 < act_encoder_.sizes().size(); ++i) {
      if (!act_sizes.empty()) act_sizes += ",";
      act_sizes += std::to_string(act_encoder_.sizes()[i]);
    }
    ckpt.meta["act_hidden"] = act_sizes;
    ckpt.meta["action_scale"] = std::to_string(action_scale_);
    IBCModel* self = const_cast<IBCModel*>(this);
    ckpt.params = snapshot_params(self->params());
    return ckpt;
  }

  static IBCModel from_checkpoint(const Checkpoint& ckpt) {
    IBCConfig cfg;
    cfg.embed_dim = ckpt.meta_int("embed_dim");
    cfg.obs_hidden = ckpt.meta_int("obs_hidden");
    cfg.act_hidden.clear();
    std::string hidden = ckpt.meta_at("act_hidden");
    size_t pos = 0;
    while (pos < hidden.size()) {
      size_t comma = hidden.find(',', pos);
      if (comma == std::string::npos) comma = hidden.size();
      cfg.act_hidden.push_back(std::stoi(hidden.substr(pos, comma - pos)));
      pos = comma + 1;
    }
    cfg.action_scale = ckpt.meta_double("action_scale");
    Rng rng(0);
    IBCModel model(ckpt.meta_int("obs_dim"), ckpt.meta_int("action_dim"), cfg, rng);
    ParameterSet p = model.params();
    restore_params(p, ckpt);
    return model;
  }

 private:
  int obs_dim_ = 0;
  int action_dim_ = 0;
  int embed_dim_ = 0;
  double action_scale_ = 20.0;
  DenseNet obs_encoder_;
  DenseNet act_encoder_;
};

struct IBCLossResult {
  double loss = 0.0;
  GradList grads;  // aligned with IBCModel::params()
  int top1_correct = 0;
  double min_abs_preact = std::numeric_limits<double>::infinity();
  long kink_pos = 0;
  long kink_neg = 0;
  long degenerate_pairs = 0;
};

/// InfoNCE over actions: the ground-truth action embedding is the positive,
/// K pooled dataset actions the negatives, all scored by cosine similarity
/// against the (obs, goal) embedding.
inline IBCLossResult ibc_loss(const IBCModel& model, const TransitionBatch& batch) {
  const Eigen::Index b = batch.batch();
  const Eigen::Index k = batch.k();
  if (b < 1 || k < 1) throw std::invalid_argument("ibc_loss: empty batch or no negatives");

  Tensor2D x(b, 2 * model.obs_dim());
  x.leftCols(model.obs_dim()) = batch.obs_t;
  x.rightCols(model.obs_dim()) = batch.obs_goal;
  ForwardCache cache_obs, cache_pos, cache_neg;
  const DenseNet& obs_net = model.obs_encoder();
  const DenseNet& act_net = model.act_encoder();
  Tensor2D obs_emb = obs_net.forward(x, cache_obs);
  Tensor2D pos_emb = act_net.forward(Tensor2D(model.action_scale() * batch.actions), cache_pos);
  Tensor2D neg_emb =
      act_net.forward(Tensor2D(model.action_scale() * batch.neg_actions), cache_neg);

  IBCLossResult res;
  res.min_abs_preact =
      std::min({cache_obs.min_abs_preact, cache_pos.min_abs_preact, cache_neg.min_abs_preact});
  for (const ForwardCache* c : {&cache_obs, &cache_pos, &cache_neg}) {
    res.kink_pos += c->kink_pos;
    res.kink_neg += c->kink_neg;
  }

  Tensor2D d_obs(obs_emb.rows(), obs_emb.cols());
  Tensor2D d_pos(pos_emb.rows(), pos_emb.cols());
  Tensor2D d_neg(neg_emb.rows(), neg_emb.cols());

  const double inv_b = 1.0 / static_cast<double>(b);
  double loss = 0.0;
  // Same floored row cosine as the primary loss: zero rows must not abort
  // training (the bias gradient revives dead stacks).
  long degenerate = 0;
  auto row_cos = [&degenerate](const Tensor2D& m, Eigen::Index i, const Tensor2D& n,
                               Eigen::Index j) {
    double na2 = m.row(i).squaredNorm();
    double nb2 = n.row(j).squaredNorm();
    struct { double value, inv_norms, inv_a2, inv_b2; } r{};
    if (na2 <= 1e-24 || nb2 <= 1e-24) {
      ++degenerate;  // neutral logit, no gradient (see model.hpp row_cosine)
      return r;
    }
    double norms = std::sqrt(na2 * nb2);
    r.value = m.row(i).dot(n.row(j)) / norms;
    r.inv_norms = 1.0 / norms;
    r.inv_a2 = 1.0 / na2;
    r.inv_b2 = 1.0 / nb2;
    return r;
  };
  std::vector<double> negs(static_cast<size_t>(k));
  std::vector<double> neg_inv_norms(static_cast<size_t>(k));
  std::vector<double> neg_inv_a2(static_cast<size_t>(k));
  for (Eigen::Index bi = 0; bi < b; ++bi) {
    auto pos = row_cos(pos_emb, bi, obs_emb, bi);
    bool beats_all = true;
    for (Eigen::Index j = 0; j < k; ++j) {
      auto nc = row_cos(neg_emb, bi * k + j, obs_emb, bi);
      negs[static_cast<size_t>(j)] = nc.value;
      neg_inv_norms[static_cast<size_t>(j)] = nc.inv_norms;
      neg_inv_a2[static_cast<size_t>(j)] = nc.inv_a2;
      if (nc.value >= pos.value) beats_all = false;
    }
    if (beats_all) ++res.top1_correct;
    NceResult nce = nce_loss(pos.value, negs);
    loss += nce.loss * inv_b;
    double w_pos = inv_b * nce.dpos;
    d_pos.row(bi) = w_pos * (pos.inv_norms * obs_emb.row(bi) -
                             (pos.value * pos.inv_a2) * pos_emb.row(bi));
    d_obs.row(bi) = w_pos * (pos.inv_norms * pos_emb.row(bi) -
                             (pos.value * pos.inv_b2) * obs_emb.row(bi));
    for (Eigen::Index j = 0; j < k; ++j) {
      double w = inv_b * nce.dneg[static_cast<size_t>(j)];
      double v = negs[static_cast<size_t>(j)];
      d_neg.row(bi * k + j) = w * (neg_inv_norms[static_cast<size_t>(j)] * obs_emb.row(bi) -
                                   (v * neg_inv_a2[static_cast<size_t>(j)]) * neg_emb.row(bi * k + j));
      d_obs.row(bi) += w * (neg_inv_norms[static_cast<size_t>(j)] * neg_emb.row(bi * k + j) -
                            (v * pos.inv_b2) * obs_emb.row(bi));
    }
  }
  res.loss = loss;
  res.degenerate_pairs = degenerate;

  NetGrads g_obs = obs_net.backward(cache_obs, d_obs);
  NetGrads g_pos = act_net.backward(cache_pos, d_pos);
  NetGrads g_neg = act_net.backward(cache_neg, d_neg);
  for (size_t l = 0; l < obs_net.n_layers(); ++l) {
    res.grads.push_back(g_obs.dw[l]);
    res.grads.push_back(g_obs.db[l]);
  }
  for (size_t l = 0; l < act_net.n_layers(); ++l) {
    res.grads.push_back(g_pos.dw[l] + g_neg.dw[l]);
    res.grads.push_back(g_pos.db[l] + g_neg.db[l]);
  }
  return res;
}

inline BaselineTrainResult train_ibc(IBCModel& model, const Dataset& data, const IBCConfig& cfg) {
  BaselineTrainResult result;
  DataSplit split = split_dataset(data, cfg.val_fraction);
  const Dataset& train_data = split.train.trajectories.empty() ? data : split.train;
  TransitionIndex index(train_data);
  if (index.size() == 0 || cfg.epochs == 0) return result;
  ActionPool pool(train_data);

  TrainConfig sample_cfg;
  sample_cfg.batch = cfg.batch;
  sample_cfg.k_negatives = cfg.k_negatives;
  sample_cfg.augment_sigma = cfg.augment_sigma;

  ParameterSet params = model.params();
  AdamState adam;
  adam.lr = cfg.lr;
  adam.init(params);
  Rng rng(derive_seed(cfg.seed, 0x1BC));
  int steps_per_epoch = std::max<int>(1, static_cast<int>(index.size()) / cfg.batch);
  std::vector<NamedTensor> snapshot = snapshot_params(params);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    long top1 = 0;
    for (int s = 0; s < steps_per_epoch; ++s) {
      TransitionBatch batch = sample_batch(train_data, index, pool, sample_cfg, rng);
      IBCLossResult loss = ibc_loss(model, batch);
      if (!std::isfinite(loss.loss)) {
        Checkpoint rollback;
        rollback.params = snapshot;
        restore_params(params, rollback);
        result.aborted_non_finite = true;
        return result;
      }
      adam_step(params, loss.grads, adam);
      total += loss.loss;
      top1 += loss.top1_correct;
    }
    result.epoch_loss.push_back(total / steps_per_epoch);
    result.epoch_top1.push_back(static_cast<double>(top1) /
                                (static_cast<double>(steps_per_epoch) * cfg.batch));
    snapshot = snapshot_params(params);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Episode rollout adapters (shared loop in controller.hpp).
// ---------------------------------------------------------------------------

inline EpisodeTrace run_bc_episode(const BCPolicy& policy, const DistanceModel* gripper_source,
                                   const TaskSpec& spec, const PlannerConfig& cfg,
                                   ObsMode mode = ObsMode::state) {
  ActFn act = [&](const Observation& obs, const Observation& goal, const RowVec&, const RowVec&,
                  Rng&) {
    ActChoice choice;
    choice.action = policy.act(obs.values, goal.values, spec.a_max);
    return choice;
  };
  return run_policy_episode(gripper_source, act, spec, cfg, mode, /*use_threshold_stop=*/false);
}

inline EpisodeTrace run_ibc_episode(const IBCModel& model, const ActionPool& pool,
                                    const DistanceModel* gripper_source, const TaskSpec& spec,
                                    const PlannerConfig& cfg, ObsMode mode = ObsMode::state) {
  ActFn act = [&](const Observation& obs, const Observation& goal, const RowVec&, const RowVec&,
                  Rng& rng) {
    ActChoice choice;
    Tensor2D candidates;
    if (pool.size() == 0) {
      candidates = Tensor2D::Zero(1, model.action_dim());
    } else {
      candidates.resize(cfg.n_candidates, model.action_dim());
      for (int c = 0; c < cfg.n_candidates; ++c) {
        const auto& a = pool.actions[rng.index(pool.size())];
        for (int j = 0; j < model.action_dim(); ++j) candidates(c, j) = a[static_cast<size_t>(j)];
      }
    }
    RowVec obs_emb = model.embed_obs(obs.values, goal.values);
    size_t idx = model.act_index(obs_emb, candidates);
    choice.action = Vec2(candidates(static_cast<Eigen::Index>(idx), 0),
                         candidates(static_cast<Eigen::Index>(idx), 1));
    return choice;
  };
  return run_policy_episode(gripper_source, act, spec, cfg, mode, /*use_threshold_stop=*/false);
}

}  // namespace seer
