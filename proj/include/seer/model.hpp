#pragma once

#include <string>
#include <vector>

#include "seer/checkpoint.hpp"
#include "seer/net.hpp"
#include "seer/sim.hpp"

namespace seer {

struct LossWeights {
  double lambda_d = 1.0;
  double lambda_f = 1.0;
};

struct ModelConfig {
  int obs_dim = 8;
  int action_dim = 2;
  int embed_dim = 32;
  int encoder_hidden = 256;
  std::string obs_mode = "state";
  LossWeights weights;
  // Input conditioning: raw planar actions are O(a_max) while embeddings are
  // O(1); the dynamics net sees actions multiplied by this scale.
  double action_scale = 100.0;
  // Residual dynamics: F(i, a) = i + net(i, a). The net then models the
  // action-conditioned embedding change directly instead of reproducing the
  // whole embedding, which keeps the action pathway from drowning in the
  // state pathway.
  bool residual_dynamics = true;
  // Open question in the training recipe: whether the dynamics target
  // embedding receives gradient. Default follows the pseudo-code (it does).
  bool stop_grad_target = false;
};

/// Minibatch of transitions plus per-element negatives. `neg_actions` holds
/// K rows per batch element (row b*K + j); `neg_obs` is only populated when
/// training with the no-dynamics ablation, which contrasts observation
/// embeddings instead of predicted next states.
struct TransitionBatch {
  Tensor2D obs_t;
  Tensor2D obs_next;
  Tensor2D obs_goal;
  Tensor2D actions;
  Tensor2D neg_actions;
  Tensor2D neg_obs;

  Eigen::Index batch() const { return obs_t.rows(); }
  Eigen::Index k() const { return batch() > 0 ? neg_rows() / batch() : 0; }
  Eigen::Index neg_rows() const {
    return neg_actions.rows() > 0 ? neg_actions.rows() : neg_obs.rows();
  }
};

struct JointLossResult {
  double loss = 0.0;
  double loss_d = 0.0;
  double loss_f = 0.0;
  // Gradients aligned with DistanceModel::trainable_params() order.
  GradList grads;
  // Batch elements whose positive similarity beats every negative.
  int top1_correct = 0;
  double min_abs_preact = std::numeric_limits<double>::infinity();
  long kink_pos = 0;
  long kink_neg = 0;
  long degenerate_pairs = 0;
};

/// Reusable buffers for joint_loss. The negatives branch works on B*K-row
/// matrices; keeping them alive across steps avoids re-mapping megabyte
/// buffers every step.
struct LossWorkspace {
  ForwardCache cache_t, cache_n, cache_g, cache_pos, cache_neg;
  Tensor2D pos_in, neg_in;
  Tensor2D d_pos_out, d_neg_out, d_ig, d_in;
  NetGrads g_pos, g_neg, g_enc_t, g_enc_g, g_enc_n, g_dyn;
  Eigen::VectorXd neg_sq, dots, alpha, beta;

  void disable_kink_tracking() {
    for (ForwardCache* c : {&cache_t, &cache_n, &cache_g, &cache_pos, &cache_neg}) {
      c->track_kinks = false;
    }
  }
};

/// The learned control stack: encoder R mapping observations to embeddings,
/// one-step dynamics F in embedding space, the functional distance
/// d(i, g) = -cos(i, g), and a single-layer gripper classifier G.
class DistanceModel {
 public:
  DistanceModel() = default;

  DistanceModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    encoder_ = DenseNet({cfg.obs_dim, cfg.encoder_hidden, cfg.embed_dim}, rng);
    dynamics_ = DenseNet(
        {cfg.embed_dim + cfg.action_dim, cfg.embed_dim, cfg.embed_dim, cfg.embed_dim}, rng);
    gripper_ = DenseNet({cfg.embed_dim, 1}, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  DenseNet& encoder() { return encoder_; }
  const DenseNet& encoder() const { return encoder_; }
  DenseNet& dynamics() { return dynamics_; }
  const DenseNet& dynamics() const { return dynamics_; }
  DenseNet& gripper() { return gripper_; }
  const DenseNet& gripper() const { return gripper_; }

  /// Encoder + dynamics parameters, the set updated by the joint loss.
  ParameterSet trainable_params() {
    ParameterSet p;
    p.add_net("encoder", encoder_);
    p.add_net("dynamics", dynamics_);
    return p;
  }

  ParameterSet all_params() {
    ParameterSet p;
    p.add_net("encoder", encoder_);
    p.add_net("dynamics", dynamics_);
    p.add_net("gripper", gripper_);
    return p;
  }

  Tensor2D encode(const Tensor2D& obs) const { return encoder_.forward(obs); }

  RowVec encode_row(const std::vector<double>& obs) const {
    Tensor2D x(1, static_cast<Eigen::Index>(obs.size()));
    for (size_t i = 0; i < obs.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = obs[i];
    return encoder_.forward(x).row(0);
  }

  /// F(i_t, a): embeddings and actions row-aligned.
  Tensor2D predict_next(const Tensor2D& embeddings, const Tensor2D& actions) const {
    require_shape(actions, embeddings.rows(), cfg_.action_dim, "predict_next actions");
    Tensor2D input(embeddings.rows(), cfg_.embed_dim + cfg_.action_dim);
    input.leftCols(cfg_.embed_dim) = embeddings;
    input.rightCols(cfg_.action_dim) = cfg_.action_scale * actions;
    Tensor2D out = dynamics_.forward(input);
    if (cfg_.residual_dynamics) out += embeddings;
    return out;
  }

  /// Functional distance d = -cos. In [-1, 1]; d(i, i) = -1.
  static double distance(const RowVec& i, const RowVec& g) {
    return -cosine_similarity(i, g).value;
  }

  double gripper_prob(const RowVec& embedding) const {
    Tensor2D x = embedding;
    return sigmoid(gripper_.forward(x)(0, 0));
  }

  /// Joint training loss: lambda_d * InfoNCE over predicted next-state
  /// similarities + lambda_f * MSE(F(i_t,a_t), R(I_t+1)). In ablated mode the
  /// InfoNCE ranks the true next-state embedding against observation
  /// negatives, and L_F carries no gradient into the encoder. Pass a
  /// LossWorkspace when calling in a loop.
  JointLossResult joint_loss(const TransitionBatch& batch, bool ablated_dynamics = false,
                             LossWorkspace* ws = nullptr) const {
    LossWorkspace local;
    LossWorkspace& w = ws ? *ws : local;
    return ablated_dynamics ? joint_loss_ablated(batch, w) : joint_loss_joint(batch, w);
  }

  Checkpoint to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.meta["kind"] = "ours";
    ckpt.meta["obs_dim"] = std::to_string(cfg_.obs_dim);
    ckpt.meta["action_dim"] = std::to_string(cfg_.action_dim);
    ckpt.meta["embed_dim"] = std::to_string(cfg_.embed_dim);
    ckpt.meta["encoder_hidden"] = std::to_string(cfg_.encoder_hidden);
    ckpt.meta["obs_mode"] = cfg_.obs_mode;
    ckpt.meta["lambda_d"] = std::to_string(cfg_.weights.lambda_d);
    ckpt.meta["lambda_F"] = std::to_string(cfg_.weights.lambda_f);
    ckpt.meta["action_scale"] = std::to_string(cfg_.action_scale);
    ckpt.meta["residual_dynamics"] = cfg_.residual_dynamics ? "1" : "0";
    DistanceModel* self = const_cast<DistanceModel*>(this);
    ckpt.params = snapshot_params(self->all_params());
    return ckpt;
  }

  static DistanceModel from_checkpoint(const Checkpoint& ckpt) {
    ModelConfig cfg;
    cfg.obs_dim = ckpt.meta_int("obs_dim");
    cfg.action_dim = ckpt.meta_int("action_dim");
    cfg.embed_dim = ckpt.meta_int("embed_dim");
    cfg.encoder_hidden = ckpt.meta_int("encoder_hidden");
    cfg.obs_mode = ckpt.meta_at("obs_mode");
    cfg.weights.lambda_d = ckpt.meta_double("lambda_d");
    cfg.weights.lambda_f = ckpt.meta_double("lambda_F");
    cfg.action_scale = ckpt.meta_double("action_scale");
    cfg.residual_dynamics = ckpt.meta_int("residual_dynamics") != 0;
    Rng rng(0);
    DistanceModel model(cfg, rng);
    ParameterSet params = model.all_params();
    restore_params(params, ckpt);
    return model;
  }

 private:
  // Cosine similarity of two matrix rows plus the scalars needed to
  // accumulate its gradient without temporaries.
  struct RowCos {
    double value;
    double inv_norms;  // 1 / (|a| |b|)
    double inv_a2;     // 1 / |a|^2
    double inv_b2;     // 1 / |b|^2
    bool degenerate;
  };

  // An exactly-zero row (freshly dead ReLU stack with a zero output bias) has
  // no well-defined cosine: the pair scores a neutral 0 logit and contributes
  // no gradient. Shared-weight updates from other rows move the net off the
  // dead configuration. Degenerate pairs are reported so gradient checks can
  // skip coordinates that toggle them.
  static RowCos row_cosine(const Tensor2D& a, Eigen::Index ai, const Tensor2D& b,
                           Eigen::Index bi) {
    double na2 = a.row(ai).squaredNorm();
    double nb2 = b.row(bi).squaredNorm();
    RowCos r;
    if (na2 <= 1e-24 || nb2 <= 1e-24) {
      r.value = 0.0;
      r.inv_norms = 0.0;
      r.inv_a2 = 0.0;
      r.inv_b2 = 0.0;
      r.degenerate = true;
      return r;
    }
    double norms = std::sqrt(na2 * nb2);
    r.value = a.row(ai).dot(b.row(bi)) / norms;
    r.inv_norms = 1.0 / norms;
    r.inv_a2 = 1.0 / na2;
    r.inv_b2 = 1.0 / nb2;
    r.degenerate = false;
    return r;
  }

  JointLossResult joint_loss_joint(const TransitionBatch& batch, LossWorkspace& ws) const {
    const Eigen::Index b = batch.batch();
    const Eigen::Index k = batch.k();
    if (b < 1) throw std::invalid_argument("joint_loss: empty batch");
    if (k < 1) throw std::invalid_argument("joint_loss: need at least one negative per element");
    const int e = cfg_.embed_dim;
    const double lam_d = cfg_.weights.lambda_d;
    const double lam_f = cfg_.weights.lambda_f;

    ForwardCache& cache_t = ws.cache_t;
    ForwardCache& cache_n = ws.cache_n;
    ForwardCache& cache_g = ws.cache_g;
    ForwardCache& cache_pos = ws.cache_pos;
    ForwardCache& cache_neg = ws.cache_neg;
    const Tensor2D& i_t = encoder_.forward(batch.obs_t, cache_t);
    const Tensor2D& i_n = encoder_.forward(batch.obs_next, cache_n);
    const Tensor2D& i_g = encoder_.forward(batch.obs_goal, cache_g);

    Tensor2D& pos_in = ws.pos_in;
    pos_in.resize(b, e + cfg_.action_dim);
    pos_in.leftCols(e) = i_t;
    pos_in.rightCols(cfg_.action_dim) = cfg_.action_scale * batch.actions;
    // The residual shortcut is added in place on the cache output; backward
    // only reads hidden activations and layer inputs from the cache.
    Tensor2D& pos_out = const_cast<Tensor2D&>(dynamics_.forward(pos_in, cache_pos));
    if (cfg_.residual_dynamics) pos_out += i_t;

    Tensor2D& neg_in = ws.neg_in;
    neg_in.resize(b * k, e + cfg_.action_dim);
    for (Eigen::Index bi = 0; bi < b; ++bi) {
      neg_in.block(bi * k, 0, k, e) = i_t.row(bi).replicate(k, 1);
    }
    neg_in.rightCols(cfg_.action_dim) = cfg_.action_scale * batch.neg_actions;
    Tensor2D& neg_out = const_cast<Tensor2D&>(dynamics_.forward(neg_in, cache_neg));
    if (cfg_.residual_dynamics) neg_out += neg_in.leftCols(e);

    JointLossResult res;
    res.min_abs_preact = std::min({cache_t.min_abs_preact, cache_n.min_abs_preact,
                                   cache_g.min_abs_preact, cache_pos.min_abs_preact,
                                   cache_neg.min_abs_preact});
    for (const ForwardCache* c : {&cache_t, &cache_n, &cache_g, &cache_pos, &cache_neg}) {
      res.kink_pos += c->kink_pos;
      res.kink_neg += c->kink_neg;
    }

    Tensor2D& d_pos_out = ws.d_pos_out;
    Tensor2D& d_neg_out = ws.d_neg_out;
    Tensor2D& d_ig = ws.d_ig;
    d_pos_out.resize(b, e);
    d_neg_out.resize(b * k, e);
    d_ig.resize(b, e);

    double loss_d = 0.0;
    int top1 = 0;
    const double inv_b = 1.0 / static_cast<double>(b);
    std::vector<double> negs(static_cast<size_t>(k));
    ws.neg_sq = neg_out.rowwise().squaredNorm();
    ws.dots.resize(k);
    ws.alpha.resize(k);
    ws.beta.resize(k);
    for (Eigen::Index bi = 0; bi < b; ++bi) {
      RowCos pos = row_cosine(pos_out, bi, i_g, bi);
      if (pos.degenerate) ++res.degenerate_pairs;
      auto neg_block = neg_out.middleRows(bi * k, k);
      ws.dots.noalias() = neg_block * i_g.row(bi).transpose();
      const double ng =
          pos.inv_b2 > 0.0 ? std::sqrt(1.0 / pos.inv_b2) : std::sqrt(i_g.row(bi).squaredNorm());
      bool beats_all = true;
      for (Eigen::Index j = 0; j < k; ++j) {
        double na2 = ws.neg_sq(bi * k + j);
        double inv_norms, value;
        if (na2 <= 1e-24 || ng <= 1e-12) {
          inv_norms = 0.0;
          value = 0.0;
          ++res.degenerate_pairs;
          ws.beta(j) = 0.0;
        } else {
          inv_norms = 1.0 / (std::sqrt(na2) * ng);
          value = ws.dots(j) * inv_norms;
          ws.beta(j) = value / na2;
        }
        negs[static_cast<size_t>(j)] = value;
        if (value >= pos.value) beats_all = false;
        ws.dots(j) = inv_norms;  // reuse as the 1/(|a||g|) buffer
      }
      if (beats_all) ++top1;
      NceResult nce = nce_loss(pos.value, negs);
      loss_d += nce.loss * inv_b;
      double w_pos = lam_d * inv_b * nce.dpos;
      d_pos_out.row(bi) = w_pos * (pos.inv_norms * i_g.row(bi) -
                                   (pos.value * pos.inv_a2) * pos_out.row(bi));
      d_ig.row(bi) = w_pos * (pos.inv_norms * pos_out.row(bi) -
                              (pos.value * pos.inv_b2) * i_g.row(bi));
      // Vectorized gradient for the K negatives of this element:
      //   d_neg_j = w_j (inv_norms_j * i_g - value_j/|n_j|^2 * n_j)
      //   d_ig   += sum_j w_j inv_norms_j n_j - (sum_j w_j value_j) / |g|^2 * i_g
      double wv_sum = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) {
        double w = lam_d * inv_b * nce.dneg[static_cast<size_t>(j)];
        wv_sum += w * negs[static_cast<size_t>(j)];
        ws.alpha(j) = w * ws.dots(j);       // w_j / (|n_j||g|)
        ws.beta(j) = w * ws.beta(j);        // w_j value_j / |n_j|^2
      }
      auto d_block = d_neg_out.middleRows(bi * k, k);
      d_block.noalias() = ws.alpha * i_g.row(bi);
      d_block.array() -= neg_block.array().colwise() * ws.beta.array();
      d_ig.row(bi).noalias() += ws.alpha.transpose() * neg_block;
      d_ig.row(bi) -= (wv_sum * pos.inv_b2) * i_g.row(bi);
    }

    MseResult mse = mse_loss(pos_out, i_n);
    d_pos_out += lam_f * mse.dpred;

    res.loss_d = loss_d;
    res.loss_f = mse.loss;
    res.loss = lam_d * loss_d + lam_f * mse.loss;
    res.top1_correct = top1;

    // Backprop through F for both branches.
    dynamics_.backward(cache_pos, d_pos_out, ws.g_pos);
    dynamics_.backward(cache_neg, d_neg_out, ws.g_neg);

    // Embedding gradient: positive branch plus the K negative rows summed
    // back onto their batch element; the residual shortcut adds the upstream
    // gradients directly.
    Tensor2D d_it = ws.g_pos.dinput.leftCols(e);
    if (cfg_.residual_dynamics) d_it += d_pos_out;
    for (Eigen::Index bi = 0; bi < b; ++bi) {
      for (Eigen::Index j = 0; j < k; ++j) {
        d_it.row(bi) += ws.g_neg.dinput.row(bi * k + j).head(e);
        if (cfg_.residual_dynamics) d_it.row(bi) += d_neg_out.row(bi * k + j);
      }
    }

    encoder_.backward(cache_t, d_it, ws.g_enc_t);
    encoder_.backward(cache_g, d_ig, ws.g_enc_g);

    GradList grads;
    const size_t n_enc = encoder_.n_layers();
    for (size_t l = 0; l < n_enc; ++l) {
      Tensor2D dw = ws.g_enc_t.dw[l] + ws.g_enc_g.dw[l];
      Tensor2D db = ws.g_enc_t.db[l] + ws.g_enc_g.db[l];
      grads.push_back(std::move(dw));
      grads.push_back(std::move(db));
    }
    if (!cfg_.stop_grad_target) {
      Tensor2D d_in_target = lam_f * mse.dtarget;
      encoder_.backward(cache_n, d_in_target, ws.g_enc_n);
      for (size_t l = 0; l < n_enc; ++l) {
        grads[2 * l] += ws.g_enc_n.dw[l];
        grads[2 * l + 1] += ws.g_enc_n.db[l];
      }
    }
    for (size_t l = 0; l < dynamics_.n_layers(); ++l) {
      grads.push_back(ws.g_pos.dw[l] + ws.g_neg.dw[l]);
      grads.push_back(ws.g_pos.db[l] + ws.g_neg.db[l]);
    }
    res.grads = std::move(grads);
    return res;
  }

  // No-dynamics ablation: the distance loss contrasts the true next-state
  // embedding against embeddings of observations drawn from the dataset; F is
  // fit by L_F on detached embeddings (no encoder gradient from L_F).
  JointLossResult joint_loss_ablated(const TransitionBatch& batch, LossWorkspace& ws) const {
    const Eigen::Index b = batch.batch();
    if (b < 1) throw std::invalid_argument("joint_loss: empty batch");
    if (batch.neg_obs.rows() == 0) {
      throw std::invalid_argument("joint_loss(ablated): batch lacks negative observations");
    }
    const Eigen::Index k = batch.neg_obs.rows() / b;
    const int e = cfg_.embed_dim;
    const double lam_d = cfg_.weights.lambda_d;
    const double lam_f = cfg_.weights.lambda_f;

    ForwardCache& cache_t = ws.cache_t;
    ForwardCache& cache_n = ws.cache_n;
    ForwardCache& cache_g = ws.cache_g;
    ForwardCache& cache_negobs = ws.cache_neg;
    ForwardCache& cache_pos = ws.cache_pos;
    const Tensor2D& i_t = encoder_.forward(batch.obs_t, cache_t);
    const Tensor2D& i_n = encoder_.forward(batch.obs_next, cache_n);
    const Tensor2D& i_g = encoder_.forward(batch.obs_goal, cache_g);
    const Tensor2D& i_negs = encoder_.forward(batch.neg_obs, cache_negobs);

    JointLossResult res;
    res.min_abs_preact =
        std::min({cache_t.min_abs_preact, cache_n.min_abs_preact, cache_g.min_abs_preact,
                  cache_negobs.min_abs_preact});
    for (const ForwardCache* c : {&cache_t, &cache_n, &cache_g, &cache_negobs}) {
      res.kink_pos += c->kink_pos;
      res.kink_neg += c->kink_neg;
    }

    Tensor2D& d_in = ws.d_in;
    Tensor2D& d_negs = ws.d_neg_out;
    Tensor2D& d_ig = ws.d_ig;
    d_in.resize(b, e);
    d_negs.resize(b * k, e);
    d_ig.resize(b, e);

    double loss_d = 0.0;
    int top1 = 0;
    const double inv_b = 1.0 / static_cast<double>(b);
    std::vector<double> negs(static_cast<size_t>(k));
    std::vector<RowCos> neg_cos(static_cast<size_t>(k));
    for (Eigen::Index bi = 0; bi < b; ++bi) {
      RowCos pos = row_cosine(i_n, bi, i_g, bi);
      if (pos.degenerate) ++res.degenerate_pairs;
      bool beats_all = true;
      for (Eigen::Index j = 0; j < k; ++j) {
        RowCos nc = row_cosine(i_negs, bi * k + j, i_g, bi);
        if (nc.degenerate) ++res.degenerate_pairs;
        neg_cos[static_cast<size_t>(j)] = nc;
        negs[static_cast<size_t>(j)] = nc.value;
        if (nc.value >= pos.value) beats_all = false;
      }
      if (beats_all) ++top1;
      NceResult nce = nce_loss(pos.value, negs);
      loss_d += nce.loss * inv_b;
      double w_pos = lam_d * inv_b * nce.dpos;
      d_in.row(bi) =
          w_pos * (pos.inv_norms * i_g.row(bi) - (pos.value * pos.inv_a2) * i_n.row(bi));
      d_ig.row(bi) =
          w_pos * (pos.inv_norms * i_n.row(bi) - (pos.value * pos.inv_b2) * i_g.row(bi));
      for (Eigen::Index j = 0; j < k; ++j) {
        const RowCos& nc = neg_cos[static_cast<size_t>(j)];
        double w = lam_d * inv_b * nce.dneg[static_cast<size_t>(j)];
        d_negs.row(bi * k + j) = w * (nc.inv_norms * i_g.row(bi) -
                                      (nc.value * nc.inv_a2) * i_negs.row(bi * k + j));
        d_ig.row(bi) += w * (nc.inv_norms * i_negs.row(bi * k + j) -
                             (nc.value * nc.inv_b2) * i_g.row(bi));
      }
    }

    // L_F on detached embeddings.
    Tensor2D& pos_in = ws.pos_in;
    pos_in.resize(b, e + cfg_.action_dim);
    pos_in.leftCols(e) = i_t;
    pos_in.rightCols(cfg_.action_dim) = cfg_.action_scale * batch.actions;
    Tensor2D& pos_out = const_cast<Tensor2D&>(dynamics_.forward(pos_in, cache_pos));
    if (cfg_.residual_dynamics) pos_out += i_t;
    res.min_abs_preact = std::min(res.min_abs_preact, cache_pos.min_abs_preact);
    res.kink_pos += cache_pos.kink_pos;
    res.kink_neg += cache_pos.kink_neg;
    MseResult mse = mse_loss(pos_out, i_n);
    dynamics_.backward(cache_pos, Tensor2D(lam_f * mse.dpred), ws.g_dyn);

    res.loss_d = loss_d;
    res.loss_f = mse.loss;
    res.loss = lam_d * loss_d + lam_f * mse.loss;
    res.top1_correct = top1;

    encoder_.backward(cache_n, d_in, ws.g_enc_n);
    encoder_.backward(cache_g, d_ig, ws.g_enc_g);
    encoder_.backward(cache_negobs, d_negs, ws.g_enc_t);

    GradList grads;
    for (size_t l = 0; l < encoder_.n_layers(); ++l) {
      grads.push_back(Tensor2D(ws.g_enc_n.dw[l] + ws.g_enc_g.dw[l] + ws.g_enc_t.dw[l]));
      grads.push_back(Tensor2D(ws.g_enc_n.db[l] + ws.g_enc_g.db[l] + ws.g_enc_t.db[l]));
    }
    for (size_t l = 0; l < dynamics_.n_layers(); ++l) {
      grads.push_back(ws.g_dyn.dw[l]);
      grads.push_back(ws.g_dyn.db[l]);
    }
    res.grads = std::move(grads);
    return res;
  }

  ModelConfig cfg_;
  DenseNet encoder_;
  DenseNet dynamics_;
  DenseNet gripper_;
};

}  // namespace seer
