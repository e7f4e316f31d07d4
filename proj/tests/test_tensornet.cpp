#include <gtest/gtest.h>

#include <cmath>

#include "seer/grad_check.hpp"
#include "seer/net.hpp"

namespace seer {
namespace {

TEST(DenseNet, IdentityLayerPassesThrough) {
  Rng rng(1);
  DenseNet net({3, 3}, rng);
  net.layer(0).w = Tensor2D::Identity(3, 3);
  net.layer(0).b = Tensor2D::Zero(1, 3);
  Tensor2D x(2, 3);
  x << 1, -2, 3, 0.5, 0, -1;
  Tensor2D y = net.forward(x);
  EXPECT_TRUE(y.isApprox(x));
}

TEST(DenseNet, ReluZeroesNegativePreactivations) {
  Rng rng(2);
  DenseNet net({2, 4, 1}, rng);
  net.layer(0).w = Tensor2D::Ones(2, 4);
  net.layer(0).b = Tensor2D::Constant(1, 4, -100.0);  // all hidden units dead
  net.layer(1).w = Tensor2D::Ones(4, 1);
  net.layer(1).b = Tensor2D::Zero(1, 1);
  Tensor2D x(1, 2);
  x << 1.0, 2.0;
  EXPECT_DOUBLE_EQ(net.forward(x)(0, 0), 0.0);
}

// Hand-computed 2-2-1 forward pass.
TEST(DenseNet, HandForwardOracle) {
  Rng rng(3);
  DenseNet net({2, 2, 1}, rng);
  net.layer(0).w << 1.0, -1.0, 2.0, 0.5;
  net.layer(0).b << 0.1, -0.2;
  net.layer(1).w << 0.3, -2.0;
  net.layer(1).b << 0.05;
  // x = (1, 1): z1 = (1+2+0.1, -1+0.5-0.2) = (3.1, -0.7); relu = (3.1, 0)
  // out = 3.1*0.3 + 0*(-2.0) + 0.05 = 0.98
  Tensor2D x(1, 2);
  x << 1.0, 1.0;
  EXPECT_NEAR(net.forward(x)(0, 0), 0.98, 1e-12);
}

TEST(DenseNet, LinearNetInputGradientIsWTransposed) {
  Rng rng(4);
  DenseNet net({3, 2}, rng);
  Tensor2D x(1, 3);
  x << 0.2, -0.4, 1.0;
  ForwardCache cache;
  net.forward(x, cache);
  Tensor2D upstream = Tensor2D::Zero(1, 2);
  upstream(0, 0) = 1.0;
  NetGrads g = net.backward(cache, upstream);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(g.dinput(0, i), net.layer(0).w(i, 0), 1e-14);
}

TEST(DenseNet, DeadReluUnitGetsZeroGradient) {
  Rng rng(5);
  DenseNet net({1, 1, 1}, rng);
  net.layer(0).w << 1.0;
  net.layer(0).b << -10.0;  // dead for x = 1
  net.layer(1).w << 3.0;
  net.layer(1).b << 0.0;
  Tensor2D x(1, 1);
  x << 1.0;
  ForwardCache cache;
  net.forward(x, cache);
  NetGrads g = net.backward(cache, Tensor2D::Ones(1, 1));
  EXPECT_DOUBLE_EQ(g.dw[0](0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g.db[0](0, 0), 0.0);
  EXPECT_DOUBLE_EQ(g.dinput(0, 0), 0.0);
}

TEST(DenseNet, BackwardMatchesFiniteDifferences) {
  Rng rng(6);
  DenseNet net({4, 8, 3}, rng);
  Rng data_rng(7);
  Tensor2D x(5, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = data_rng.normal();
  Tensor2D w_lin(3, 1);  // fixed projection so loss is scalar
  for (Eigen::Index i = 0; i < w_lin.size(); ++i) w_lin.data()[i] = data_rng.normal();

  ParameterSet params;
  params.add_net("net", net);

  auto loss_fn = [&]() {
    LossEval ev;
    ForwardCache cache;
    Tensor2D y = net.forward(x, cache);
    ev.loss = (y * w_lin).sum();
    ev.min_abs_preact = cache.min_abs_preact;
    ev.kink_pos = cache.kink_pos;
    ev.kink_neg = cache.kink_neg;
    Tensor2D upstream = Tensor2D::Ones(y.rows(), 1) * w_lin.transpose();
    NetGrads g = net.backward(cache, upstream);
    for (size_t l = 0; l < net.n_layers(); ++l) {
      ev.grads.push_back(g.dw[l]);
      ev.grads.push_back(g.db[l]);
    }
    return ev;
  };

  Rng check_rng(8);
  GradCheckReport report = grad_check(loss_fn, params, check_rng, 1e-5, 200);
  EXPECT_GT(report.checked, 0u);
  EXPECT_LT(report.max_rel_err, 1e-6) << "worst: " << report.worst_param;
}

TEST(Losses, CosineBasics) {
  RowVec v(3);
  v << 1.0, 2.0, -0.5;
  EXPECT_NEAR(cosine_similarity(v, v).value, 1.0, 1e-12);
  EXPECT_NEAR(cosine_similarity(v, RowVec(-v)).value, -1.0, 1e-12);
  RowVec a(2), b(2);
  a << 1, 0;
  b << 1, 1;
  EXPECT_NEAR(cosine_similarity(a, b).value, std::sqrt(0.5), 1e-12);
}

TEST(Losses, CosineScaleInvariance) {
  Rng rng(9);
  for (int k = 0; k < 100; ++k) {
    RowVec a(6), b(6);
    for (int i = 0; i < 6; ++i) {
      a(i) = rng.normal();
      b(i) = rng.normal();
    }
    double alpha = rng.uniform(0.01, 50.0);
    EXPECT_NEAR(cosine_similarity(a, b).value, cosine_similarity(RowVec(alpha * a), b).value,
                1e-12);
  }
}

TEST(Losses, CosineDegenerateThrows) {
  RowVec z = RowVec::Zero(4);
  RowVec v = RowVec::Ones(4);
  EXPECT_THROW(cosine_similarity(z, v), DegenerateEmbeddingError);
  EXPECT_THROW(cosine_similarity(v, z), DegenerateEmbeddingError);
}

TEST(Losses, CosineGradientsMatchFiniteDifferences) {
  Rng rng(10);
  for (int k = 0; k < 20; ++k) {
    RowVec a(5), b(5);
    for (int i = 0; i < 5; ++i) {
      a(i) = rng.normal();
      b(i) = rng.normal();
    }
    CosineResult r = cosine_similarity(a, b);
    double h = 1e-6;
    for (int i = 0; i < 5; ++i) {
      RowVec ap = a, am = a;
      ap(i) += h;
      am(i) -= h;
      double num = (cosine_similarity(ap, b).value - cosine_similarity(am, b).value) / (2 * h);
      EXPECT_NEAR(r.da(i), num, 1e-8);
      RowVec bp = b, bm = b;
      bp(i) += h;
      bm(i) -= h;
      num = (cosine_similarity(a, bp).value - cosine_similarity(a, bm).value) / (2 * h);
      EXPECT_NEAR(r.db(i), num, 1e-8);
    }
  }
}

TEST(Losses, NceKnownValues) {
  EXPECT_NEAR(nce_loss(0.4, {0.4}).loss, std::log(2.0), 1e-12);
  // pos=1, negs=[0,0,0] -> -log(e / (e + 3)) = 0.74366838...
  double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 3.0));
  EXPECT_NEAR(nce_loss(1.0, {0.0, 0.0, 0.0}).loss, expected, 1e-12);
  EXPECT_NEAR(expected, 0.74366838, 1e-7);
  // Dominant positive drives the loss to zero.
  EXPECT_LT(nce_loss(60.0, {0.0, 1.0}).loss, 1e-20);
}

TEST(Losses, NceEqualSimilaritiesGiveLogKPlus1) {
  for (int k = 1; k <= 16; ++k) {
    std::vector<double> negs(static_cast<size_t>(k), 0.73);
    EXPECT_NEAR(nce_loss(0.73, negs).loss, std::log(1.0 + k), 1e-12);
  }
}

TEST(Losses, NcePermutationInvariant) {
  std::vector<double> negs = {0.1, -0.4, 0.9, 0.3};
  double base = nce_loss(0.5, negs).loss;
  std::vector<double> perm = {0.9, 0.3, 0.1, -0.4};
  EXPECT_NEAR(nce_loss(0.5, perm).loss, base, 1e-15);
  EXPECT_GE(base, 0.0);
}

TEST(Losses, NceGradientsSumToZero) {
  // Softmax CE gradient: dpos + sum(dneg) == 0.
  NceResult r = nce_loss(0.2, {0.6, -0.1, 0.05});
  double s = r.dpos;
  for (double d : r.dneg) s += d;
  EXPECT_NEAR(s, 0.0, 1e-14);
}

TEST(Losses, MseKnownValues) {
  Tensor2D a = Tensor2D::Ones(2, 2);
  EXPECT_DOUBLE_EQ(mse_loss(a, a).loss, 0.0);
  Tensor2D b = Tensor2D::Zero(2, 2);
  EXPECT_DOUBLE_EQ(mse_loss(a, b).loss, 1.0);

  Rng rng(11);
  Tensor2D p(3, 4), t(3, 4);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    p.data()[i] = rng.normal();
    t.data()[i] = rng.normal();
  }
  double brute = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    double d = p.data()[i] - t.data()[i];
    brute += d * d;
  }
  brute /= static_cast<double>(p.size());
  MseResult r = mse_loss(p, t);
  EXPECT_NEAR(r.loss, brute, 1e-14);
  EXPECT_TRUE(r.dtarget.isApprox(-r.dpred));
}

TEST(Losses, BceKnownValues) {
  EXPECT_NEAR(bce_loss(0.5, 0).loss, std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(0.5, 1).loss, std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(0.8, 1).loss, 0.22314355, 1e-7);
  EXPECT_LT(bce_loss(1.0 - 1e-15, 1).loss, 1e-10);  // clamped, ~0
  // Logit form agrees with the probability form.
  double z = 1.3;
  EXPECT_NEAR(bce_with_logits(z, 1).loss, bce_loss(sigmoid(z), 1).loss, 1e-12);
  EXPECT_NEAR(bce_with_logits(z, 0).loss, bce_loss(sigmoid(z), 0).loss, 1e-12);
}

TEST(Adam, ZeroGradLeavesParamsUnchanged) {
  Rng rng(12);
  DenseNet net({2, 2}, rng);
  ParameterSet params;
  params.add_net("net", net);
  Tensor2D w_before = net.layer(0).w;
  AdamState state;
  state.init(params);
  GradList grads = zero_grads(params);
  adam_step(params, grads, state);
  EXPECT_TRUE(net.layer(0).w.isApprox(w_before));
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  Rng rng(13);
  DenseNet net({1, 1}, rng);
  net.layer(0).w(0, 0) = 0.5;
  ParameterSet params;
  params.add_net("net", net);
  AdamState state;
  state.lr = 0.1;
  state.init(params);
  GradList grads = zero_grads(params);
  grads[0](0, 0) = 3.7;  // positive gradient: step should be ~ -lr
  adam_step(params, grads, state);
  EXPECT_NEAR(net.layer(0).w(0, 0), 0.5 - 0.1, 1e-6);
}

// Reference Adam iteration on f(w) = w^2, hand-rolled update equations.
TEST(Adam, MatchesScalarReferenceIteration) {
  double w = 1.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> reference;
  for (int t = 1; t <= 3; ++t) {
    double g = 2.0 * w;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    double mhat = m / (1 - std::pow(b1, t));
    double vhat = v / (1 - std::pow(b2, t));
    w -= lr * mhat / (std::sqrt(vhat) + eps);
    reference.push_back(w);
  }

  Rng rng(14);
  DenseNet net({1, 1}, rng);
  net.layer(0).w(0, 0) = 1.0;
  net.layer(0).b(0, 0) = 0.0;
  ParameterSet params;
  ParameterSet just_w;
  just_w.add("w", &net.layer(0).w);
  AdamState state;
  state.lr = lr;
  state.init(just_w);
  for (int t = 0; t < 3; ++t) {
    GradList grads;
    grads.push_back(Tensor2D::Constant(1, 1, 2.0 * net.layer(0).w(0, 0)));
    adam_step(just_w, grads, state);
    EXPECT_NEAR(net.layer(0).w(0, 0), reference[static_cast<size_t>(t)], 1e-12);
  }
  (void)params;
}

TEST(GradCheck, LinearLossIsExact) {
  Rng rng(15);
  DenseNet net({3, 1}, rng);
  ParameterSet params;
  params.add_net("lin", net);
  Tensor2D x(4, 3);
  Rng dr(16);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = dr.normal();
  auto loss_fn = [&]() {
    LossEval ev;
    ForwardCache cache;
    Tensor2D y = net.forward(x, cache);
    ev.loss = y.sum();
    ev.min_abs_preact = cache.min_abs_preact;
    ev.kink_pos = cache.kink_pos;
    ev.kink_neg = cache.kink_neg;
    NetGrads g = net.backward(cache, Tensor2D::Ones(y.rows(), y.cols()));
    ev.grads = {g.dw[0], g.db[0]};
    return ev;
  };
  Rng check_rng(17);
  GradCheckReport r = grad_check(loss_fn, params, check_rng);
  EXPECT_LT(r.max_rel_err, 1e-9);
}

TEST(GradCheck, ReportsSkippedKinkSamples) {
  Rng rng(18);
  DenseNet net({1, 1, 1}, rng);
  net.layer(0).w(0, 0) = 1.0;
  net.layer(0).b(0, 0) = -1.0;  // pre-activation exactly at the kink for x=1
  net.layer(1).w(0, 0) = 1.0;
  Tensor2D x = Tensor2D::Ones(1, 1);
  ParameterSet params;
  params.add_net("net", net);
  auto loss_fn = [&]() {
    LossEval ev;
    ForwardCache cache;
    Tensor2D y = net.forward(x, cache);
    ev.loss = y.sum();
    ev.min_abs_preact = cache.min_abs_preact;
    ev.kink_pos = cache.kink_pos;
    ev.kink_neg = cache.kink_neg;
    NetGrads g = net.backward(cache, Tensor2D::Ones(1, 1));
    for (size_t l = 0; l < net.n_layers(); ++l) {
      ev.grads.push_back(g.dw[l]);
      ev.grads.push_back(g.db[l]);
    }
    return ev;
  };
  Rng check_rng(19);
  GradCheckReport r = grad_check(loss_fn, params, check_rng);
  EXPECT_GT(r.skipped, 0u);
}

TEST(Tensor, FiniteCheck) {
  Tensor2D t = Tensor2D::Ones(2, 2);
  EXPECT_TRUE(all_finite(t));
  t(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(all_finite(t));
}

}  // namespace
}  // namespace seer
