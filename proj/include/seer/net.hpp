#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "seer/common.hpp"
#include "seer/tensor.hpp"

namespace seer {

struct DegenerateEmbeddingError : std::runtime_error {
  explicit DegenerateEmbeddingError(const std::string& what) : std::runtime_error(what) {}
};

struct DenseLayer {
  Tensor2D w;  // in x out
  Tensor2D b;  // 1 x out
};

struct ForwardCache {
  Tensor2D input;
  std::vector<Tensor2D> post;  // post-activation per layer (post.back() == output)
  // Kink bookkeeping for finite-difference checks: the smallest hidden ReLU
  // |pre-activation| plus per-side counts of units within 1e-6 of the kink.
  // A coordinate whose perturbation changes these counts crossed a kink and
  // is skipped by grad_check. The ReLU mask itself is recovered from
  // post > 0. Tracking costs a scalar pass per hidden layer; training loops
  // that never kink-check turn it off.
  bool track_kinks = true;
  double min_abs_preact = std::numeric_limits<double>::infinity();
  long kink_pos = 0;  // units with 0 < z < 1e-6
  long kink_neg = 0;  // units with -1e-6 < z <= 0
};

struct NetGrads {
  std::vector<Tensor2D> dw;
  std::vector<Tensor2D> db;
  Tensor2D dinput;
  // Delta buffers; kept here so repeated backward calls into the same
  // NetGrads reuse their allocations.
  Tensor2D scratch_delta;
  Tensor2D scratch_next;
};

/// Fully connected net: affine layers with ReLU on hidden layers and identity
/// on the output. Double precision, batched row-wise.
class DenseNet {
 public:
  DenseNet() = default;

  /// He-initialized weights (seeded), zero biases.
  DenseNet(std::vector<int> sizes, Rng& rng) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw std::invalid_argument("DenseNet: need at least 2 layer sizes");
    layers_.reserve(sizes_.size() - 1);
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
      int fan_in = sizes_[l];
      int fan_out = sizes_[l + 1];
      DenseLayer layer;
      layer.w.resize(fan_in, fan_out);
      double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < layer.w.rows(); ++i)
        for (Eigen::Index j = 0; j < layer.w.cols(); ++j) layer.w(i, j) = scale * rng.normal();
      layer.b = Tensor2D::Zero(1, fan_out);
      layers_.push_back(std::move(layer));
    }
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  size_t n_layers() const { return layers_.size(); }
  DenseLayer& layer(size_t i) { return layers_[i]; }
  const DenseLayer& layer(size_t i) const { return layers_[i]; }

  size_t n_params() const {
    size_t n = 0;
    for (const auto& l : layers_) n += static_cast<size_t>(l.w.size() + l.b.size());
    return n;
  }

  Tensor2D forward(const Tensor2D& x) const {
    ForwardCache cache;
    return forward(x, cache);
  }

  /// Returns a reference into the cache; valid until the next forward call.
  const Tensor2D& forward(const Tensor2D& x, ForwardCache& cache) const {
    require_cols(x, sizes_.front(), "DenseNet::forward input");
    cache.input = x;
    cache.post.resize(layers_.size());
    cache.min_abs_preact = std::numeric_limits<double>::infinity();
    cache.kink_pos = 0;
    cache.kink_neg = 0;
    const Tensor2D* cur = &cache.input;
    for (size_t l = 0; l < layers_.size(); ++l) {
      Tensor2D& z = cache.post[l];
      z.resize(cur->rows(), layers_[l].w.cols());
      z.noalias() = (*cur) * layers_[l].w;
      z.rowwise() += layers_[l].b.row(0);
      if (l + 1 < layers_.size()) {
        if (cache.track_kinks) {
          // Fused ReLU + kink tracking in one pass.
          double m = cache.min_abs_preact;
          long kp = 0, kn = 0;
          double* p = z.data();
          const Eigen::Index n = z.size();
          for (Eigen::Index i = 0; i < n; ++i) {
            double v = p[i];
            double a = std::abs(v);
            if (a < m) m = a;
            if (a < 1e-6) {
              if (v > 0.0) ++kp; else ++kn;
            }
            p[i] = v > 0.0 ? v : 0.0;
          }
          cache.min_abs_preact = m;
          cache.kink_pos += kp;
          cache.kink_neg += kn;
        } else {
          z = z.cwiseMax(0.0);
        }
      }
      cur = &z;
    }
    return cache.post.back();
  }

  /// Reverse-mode gradients of the forward map. `upstream` is dLoss/dOutput
  /// for the batch the cache was built from. Writing into a reused NetGrads
  /// keeps the large buffers allocated across calls.
  void backward(const ForwardCache& cache, const Tensor2D& upstream, NetGrads& grads) const {
    if (cache.post.size() != layers_.size()) {
      throw std::invalid_argument("DenseNet::backward: cache does not match this net");
    }
    require_shape(upstream, cache.post.back().rows(), cache.post.back().cols(),
                  "DenseNet::backward upstream");
    grads.dw.resize(layers_.size());
    grads.db.resize(layers_.size());
    Tensor2D& delta = grads.scratch_delta;
    Tensor2D& next_delta = grads.scratch_next;
    delta = upstream;
    for (size_t l = layers_.size(); l-- > 0;) {
      if (l + 1 < layers_.size()) {
        // ReLU mask: zero exactly where the stored activation is zero.
        delta.array() *= (cache.post[l].array() > 0.0).cast<double>();
      }
      const Tensor2D& layer_in = (l == 0) ? cache.input : cache.post[l - 1];
      grads.dw[l].resize(layer_in.cols(), delta.cols());
      grads.dw[l].noalias() = layer_in.transpose() * delta;
      grads.db[l] = delta.colwise().sum();
      if (l > 0) {
        next_delta.resize(delta.rows(), layers_[l].w.rows());
        next_delta.noalias() = delta * layers_[l].w.transpose();
        delta.swap(next_delta);
      } else {
        grads.dinput.resize(delta.rows(), layers_[0].w.rows());
        grads.dinput.noalias() = delta * layers_[0].w.transpose();
      }
    }
  }

  NetGrads backward(const ForwardCache& cache, const Tensor2D& upstream) const {
    NetGrads grads;
    backward(cache, upstream, grads);
    return grads;
  }

 private:
  std::vector<int> sizes_;
  std::vector<DenseLayer> layers_;
};

// ---------------------------------------------------------------------------
// Parameter bookkeeping: named views over module tensors, used by Adam and by
// checkpoint serialization. Order is the contract.
// ---------------------------------------------------------------------------

struct ParamRef {
  std::string name;
  Tensor2D* value;
};

class ParameterSet {
 public:
  void add(std::string name, Tensor2D* value) { refs_.push_back({std::move(name), value}); }

  void add_net(const std::string& prefix, DenseNet& net) {
    for (size_t l = 0; l < net.n_layers(); ++l) {
      add(prefix + ".w" + std::to_string(l), &net.layer(l).w);
      add(prefix + ".b" + std::to_string(l), &net.layer(l).b);
    }
  }

  size_t size() const { return refs_.size(); }
  const ParamRef& operator[](size_t i) const { return refs_[i]; }
  ParamRef& operator[](size_t i) { return refs_[i]; }

  size_t total_coeffs() const {
    size_t n = 0;
    for (const auto& r : refs_) n += static_cast<size_t>(r.value->size());
    return n;
  }

  uint64_t content_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& r : refs_) {
      h = fnv1a64(r.name, h);
      h = fnv1a64(r.value->data(), sizeof(double) * static_cast<size_t>(r.value->size()), h);
    }
    return h;
  }

  auto begin() { return refs_.begin(); }
  auto end() { return refs_.end(); }
  auto begin() const { return refs_.begin(); }
  auto end() const { return refs_.end(); }

 private:
  std::vector<ParamRef> refs_;
};

// Gradients aligned with a ParameterSet, index for index.
using GradList = std::vector<Tensor2D>;

inline GradList zero_grads(const ParameterSet& params) {
  GradList g;
  g.reserve(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    g.push_back(Tensor2D::Zero(params[i].value->rows(), params[i].value->cols()));
  }
  return g;
}

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t step = 0;
  std::vector<Tensor2D> m;
  std::vector<Tensor2D> v;

  void init(const ParameterSet& params) {
    step = 0;
    m.clear();
    v.clear();
    for (size_t i = 0; i < params.size(); ++i) {
      m.push_back(Tensor2D::Zero(params[i].value->rows(), params[i].value->cols()));
      v.push_back(Tensor2D::Zero(params[i].value->rows(), params[i].value->cols()));
    }
  }
};

/// Bias-corrected Adam update in place.
inline void adam_step(ParameterSet& params, const GradList& grads, AdamState& state) {
  if (state.m.size() != params.size()) state.init(params);
  if (grads.size() != params.size()) {
    throw std::invalid_argument("adam_step: gradient list does not match parameter set");
  }
  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor2D& m = state.m[i];
    Tensor2D& v = state.v[i];
    const Tensor2D& g = grads[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    Tensor2D mhat = m / bc1;
    Tensor2D vhat = v / bc2;
    params[i].value->array() -= state.lr * mhat.array() / (vhat.array().sqrt() + state.eps);
  }
}

// ---------------------------------------------------------------------------
// Losses. Each returns the scalar plus analytic gradients.
// ---------------------------------------------------------------------------

struct CosineResult {
  double value;
  RowVec da;
  RowVec db;
};

/// Cosine similarity of two row vectors with gradients w.r.t. both inputs.
/// Throws DegenerateEmbeddingError when either norm is <= 1e-12.
inline CosineResult cosine_similarity(const RowVec& a, const RowVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine_similarity: size mismatch");
  double na = a.norm();
  double nb = b.norm();
  if (na <= 1e-12 || nb <= 1e-12) {
    throw DegenerateEmbeddingError("cosine_similarity: embedding norm below 1e-12");
  }
  double dot = a.dot(b);
  double c = dot / (na * nb);
  CosineResult r;
  r.value = c;
  r.da = b / (na * nb) - (c / (na * na)) * a;
  r.db = a / (na * nb) - (c / (nb * nb)) * b;
  return r;
}

struct NceResult {
  double loss;
  double dpos;
  std::vector<double> dneg;
};

/// InfoNCE with the positive as class 0: -log(exp(pos) / (exp(pos) + sum_j
/// exp(neg_j))), computed with max subtraction. Equals ln(1+K) when all
/// similarities are equal.
inline NceResult nce_loss(double pos_sim, const std::vector<double>& neg_sims) {
  if (neg_sims.empty()) throw std::invalid_argument("nce_loss: need at least one negative");
  double mx = pos_sim;
  for (double s : neg_sims) mx = std::max(mx, s);
  double zp = std::exp(pos_sim - mx);
  double denom = zp;
  for (double s : neg_sims) denom += std::exp(s - mx);
  NceResult r;
  r.loss = -std::log(zp / denom);
  double p0 = zp / denom;
  r.dpos = p0 - 1.0;
  r.dneg.resize(neg_sims.size());
  for (size_t j = 0; j < neg_sims.size(); ++j) r.dneg[j] = std::exp(neg_sims[j] - mx) / denom;
  return r;
}

struct MseResult {
  double loss;
  Tensor2D dpred;
  Tensor2D dtarget;
};

/// Mean of squared elementwise differences (mean over all entries).
inline MseResult mse_loss(const Tensor2D& pred, const Tensor2D& target) {
  require_shape(target, pred.rows(), pred.cols(), "mse_loss target");
  Tensor2D diff = pred - target;
  double n = static_cast<double>(diff.size());
  MseResult r;
  r.loss = diff.squaredNorm() / n;
  r.dpred = (2.0 / n) * diff;
  r.dtarget = -r.dpred;
  return r;
}

struct BceResult {
  double loss;
  double dp;  // d loss / d p
};

/// Binary cross-entropy on a probability p in (0,1); p is clamped away from
/// {0,1} for stability.
inline BceResult bce_loss(double p, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("bce_loss: label must be 0 or 1");
  double pc = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
  BceResult r;
  r.loss = label == 1 ? -std::log(pc) : -std::log(1.0 - pc);
  r.dp = label == 1 ? -1.0 / pc : 1.0 / (1.0 - pc);
  if (p != pc) r.dp = 0.0;  // clamped: flat
  return r;
}

/// Numerically stable BCE on a logit; gradient w.r.t. the logit is p - y.
inline BceResult bce_with_logits(double z, int label) {
  if (label != 0 && label != 1) throw std::invalid_argument("bce_with_logits: label must be 0 or 1");
  double y = static_cast<double>(label);
  BceResult r;
  r.loss = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  double p = 1.0 / (1.0 + std::exp(-z));
  r.dp = p - y;  // gradient w.r.t. the logit
  return r;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace seer
