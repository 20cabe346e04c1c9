// Copyright 2026 The ctxbandit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ctxbandit/kernel_bandit.hpp"
#include "ctxbandit/linear_policies.hpp"

namespace cb = ctxbandit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// phi(x, c) = tanh(A_x c) / sqrt(d), with random A_x.
cb::FeatureMap random_map(std::size_t actions, Eigen::Index d, Eigen::Index k, std::uint64_t seed) {
  cb::Stream rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  auto mats = std::make_shared<std::vector<MatrixXd>>();
  for (std::size_t x = 0; x < actions; ++x) mats->push_back(MatrixXd::NullaryExpr(d, k, [&]() { return n(rng); }));
  const double s = 1.0 / std::sqrt(double(d));
  return cb::FeatureMap(static_cast<std::size_t>(d),
                        [mats, s](cb::ActionId x, const cb::Context& c, Eigen::Ref<VectorXd> out) {
                          out = ((*mats)[x] * c).array().tanh().matrix() * s;
                        });
}

cb::ContextDistribution random_empirical(Eigen::Index k, int atoms, cb::Stream& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<cb::Context> pts;
  std::vector<double> w;
  double total = 0.0;
  for (int i = 0; i < atoms; ++i) {
    pts.push_back(VectorXd::NullaryExpr(k, [&]() { return n(rng); }));
    total += w.emplace_back(u(rng));
  }
  for (double& wi : w) wi /= total;
  return cb::ContextDistribution::empirical(std::move(pts), std::move(w));
}

// k = 1 everywhere on the diagonal: exp(-|c - c'|^2 / 2), action-independent.
cb::Kernel context_rbf() {
  return cb::Kernel("ctx_rbf", [](cb::ActionId, const cb::Context& a, cb::ActionId, const cb::Context& b) {
    return std::exp(-0.5 * (a - b).squaredNorm());
  });
}

VectorXd v(std::initializer_list<double> xs) {
  VectorXd out(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) out[i++] = x;
  return out;
}

}  // namespace

TEST(EmbeddingInner, DiracIsKernelEvaluation) {
  const auto k = context_rbf();
  const VectorXd a = v({0.1, 0.2}), b = v({-0.3, 0.5});
  const auto ha = cb::EmbeddingHandle::exact(0, cb::ContextDistribution::dirac(a));
  const auto hb = cb::EmbeddingHandle::exact(1, cb::ContextDistribution::dirac(b));
  EXPECT_EQ(cb::embedding_inner(ha, hb, k), k(0, a, 1, b));
}

TEST(EmbeddingInner, SingleSampleIsKernelEvaluation) {
  const auto k = context_rbf();
  const VectorXd a = v({0.1, 0.2}), b = v({-0.3, 0.5});
  const auto ha = cb::EmbeddingHandle::sampled(0, std::make_shared<const cb::SampleBatch>(cb::SampleBatch{a}));
  const auto hb = cb::EmbeddingHandle::sampled(1, std::make_shared<const cb::SampleBatch>(cb::SampleBatch{b}));
  EXPECT_EQ(cb::embedding_inner(ha, hb, k), k(0, a, 1, b));
}

TEST(EmbeddingInner, LinearKernelMatchesFeatures) {
  const auto map = random_map(4, 3, 2, 1);
  const auto k = cb::linear_kernel(map);
  cb::Stream rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const auto mu_a = random_empirical(2, 1 + rep % 5, rng);
    const auto mu_b = random_empirical(2, 1 + rep % 3, rng);
    const cb::ActionId xa = rep % 4, xb = (rep / 4) % 4;
    const double exact = cb::embedding_inner(cb::EmbeddingHandle::exact(xa, mu_a), cb::EmbeddingHandle::exact(xb, mu_b), k);
    EXPECT_NEAR(exact, cb::expected_feature(map, xa, mu_a).dot(cb::expected_feature(map, xb, mu_b)), 1e-10);

    auto ba = std::make_shared<const cb::SampleBatch>(cb::sample_contexts(mu_a, 7, rng));
    auto bb = std::make_shared<const cb::SampleBatch>(cb::sample_contexts(mu_b, 4, rng));
    const double sampled = cb::embedding_inner(cb::EmbeddingHandle::sampled(xa, ba), cb::EmbeddingHandle::sampled(xb, bb), k);
    EXPECT_NEAR(sampled, cb::sampled_feature(map, xa, *ba).dot(cb::sampled_feature(map, xb, *bb)), 1e-10);
  }
}

// The finite-feature shortcut agrees with the literal double sum.
TEST(EmbeddingInner, FeatureShortcutMatchesDoubleSum) {
  const auto map = random_map(3, 3, 2, 11);
  const auto fast = cb::linear_kernel(map);
  const cb::Kernel slow("linear_pairwise", [&map](cb::ActionId xa, const cb::Context& ca, cb::ActionId xb, const cb::Context& cb_) {
    return map.eval(xa, ca).dot(map.eval(xb, cb_));
  });
  ASSERT_NE(fast.features(), nullptr);
  ASSERT_EQ(slow.features(), nullptr);
  cb::Stream rng(12);
  for (int rep = 0; rep < 30; ++rep) {
    const auto mu_a = random_empirical(2, 1 + rep % 6, rng);
    const auto mu_b = random_empirical(2, 2, rng);
    const auto ea = cb::EmbeddingHandle::exact(rep % 3, mu_a), eb = cb::EmbeddingHandle::exact(1, mu_b);
    EXPECT_NEAR(cb::embedding_inner(ea, eb, fast), cb::embedding_inner(ea, eb, slow), 1e-10);
    EXPECT_NEAR(cb::embedding_inner(ea, ea, fast), cb::embedding_inner(ea, ea, slow), 1e-10);
    auto batch = std::make_shared<const cb::SampleBatch>(cb::sample_contexts(mu_a, 9, rng));
    const auto sa = cb::EmbeddingHandle::sampled(2, batch);
    EXPECT_NEAR(cb::embedding_inner(sa, eb, fast), cb::embedding_inner(sa, eb, slow), 1e-10);
  }
  cb::KernelState a(fast, 0.5, 1.0), b(slow, 0.5, 1.0);
  for (int t = 0; t < 15; ++t) {
    const auto h = cb::EmbeddingHandle::exact(t % 3, random_empirical(2, 3, rng));
    a.append(h, 0.1 * t);
    b.append(h, 0.1 * t);
  }
  EXPECT_LT((a.gram() - b.gram()).norm(), 1e-10);
  const auto q = cb::EmbeddingHandle::exact(0, random_empirical(2, 4, rng));
  EXPECT_NEAR(a.posterior_mean(q), b.posterior_mean(q), 1e-10);
  EXPECT_NEAR(a.posterior_width(q), b.posterior_width(q), 1e-10);
}

TEST(EmbeddingInner, Symmetry) {
  const auto k = context_rbf();
  cb::Stream rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const auto mu_a = random_empirical(2, 4, rng);
    const auto mu_b = random_empirical(2, 3, rng);
    const auto ea = cb::EmbeddingHandle::exact(rep % 3, mu_a), eb = cb::EmbeddingHandle::exact(rep % 2, mu_b);
    EXPECT_NEAR(cb::embedding_inner(ea, eb, k), cb::embedding_inner(eb, ea, k), 1e-12);
    auto ba = std::make_shared<const cb::SampleBatch>(cb::sample_contexts(mu_a, 5, rng));
    auto bb = std::make_shared<const cb::SampleBatch>(cb::sample_contexts(mu_b, 6, rng));
    const auto sa = cb::EmbeddingHandle::sampled(1, ba), sb = cb::EmbeddingHandle::sampled(2, bb);
    EXPECT_EQ(cb::embedding_inner(sa, sb, k), cb::embedding_inner(sb, sa, k));
  }
}

TEST(EmbeddingInner, SelfProductUsesIndependentCopies) {
  const auto k = context_rbf();
  const auto mu = cb::ContextDistribution::empirical_uniform({v({0.0}), v({1.0})});
  const double s = cb::embedding_inner(cb::EmbeddingHandle::exact(0, mu), cb::EmbeddingHandle::exact(0, mu), k);
  EXPECT_NEAR(s, 0.5 * (1.0 + std::exp(-0.5)), 1e-15);
}

TEST(EmbeddingInner, GaussianExactUnsupported) {
  const auto mu = cb::ContextDistribution::diagonal_gaussian(VectorXd::Zero(2), VectorXd::Ones(2));
  EXPECT_THROW(cb::EmbeddingHandle::exact(0, mu), cb::UnsupportedExpectation);
}

TEST(KernelState, EmptyStatePrior) {
  const cb::KernelState s(context_rbf(), 1.0, 1.0);
  const auto q = cb::EmbeddingHandle::exact(0, cb::ContextDistribution::dirac(v({0.4, 0.1})));
  EXPECT_EQ(s.posterior_mean(q), 0.0);
  EXPECT_DOUBLE_EQ(s.posterior_width(q), 1.0);
  const cb::KernelState s4(context_rbf(), 4.0, 1.0);
  EXPECT_DOUBLE_EQ(s4.posterior_width(q), 0.5);
}

TEST(KernelState, SinglePointMean) {
  cb::KernelState s(context_rbf(), 1.0, 1.0);
  const auto h = cb::EmbeddingHandle::exact(0, cb::ContextDistribution::dirac(v({0.4, 0.1})));
  s.append(h, 2.0);
  EXPECT_DOUBLE_EQ(s.posterior_mean(h), 1.0);
}

TEST(KernelState, OrthogonalQueryKeepsPriorWidth) {
  // Kernel vanishes across distinct actions.
  const cb::Kernel k("per_action", [](cb::ActionId a, const cb::Context& ca, cb::ActionId b, const cb::Context& cb_) {
    return a == b ? 0.5 * std::exp(-(ca - cb_).squaredNorm()) : 0.0;
  });
  cb::KernelState s(k, 2.0, 1.0);
  const auto mu = cb::ContextDistribution::dirac(v({0.2}));
  for (int i = 0; i < 4; ++i) s.append(cb::EmbeddingHandle::exact(0, mu), 1.0);
  const auto q = cb::EmbeddingHandle::exact(1, mu);
  EXPECT_DOUBLE_EQ(s.posterior_width(q), std::sqrt(0.5 / 2.0));
  EXPECT_EQ(s.posterior_mean(q), 0.0);
}

TEST(KernelState, BetaExamples) {
  const double delta = 0.1;
  cb::KernelState s(context_rbf(), 1.0, 1.0);
  EXPECT_DOUBLE_EQ(s.beta(delta, 1.0), std::sqrt(2.0 * std::log(10.0)) + 1.0);
  EXPECT_NEAR(s.beta(1.0 - 1e-15, 1.0), 1.0, 1e-7);
  s.append(cb::EmbeddingHandle::exact(0, cb::ContextDistribution::dirac(v({0.0}))), 0.3);
  EXPECT_DOUBLE_EQ(s.beta(delta, 1.0), std::sqrt(2.0 * (0.5 * std::log(2.0) + std::log(10.0))) + 1.0);

  const double rho = std::sqrt(4.01), lambda = 0.5;
  const cb::KernelState r(context_rbf(), lambda, rho);
  EXPECT_DOUBLE_EQ(r.beta(delta, 2.0), rho * (std::sqrt(2.0 * std::log(10.0)) + std::sqrt(lambda) * 2.0));
}

TEST(KernelState, BothLogdetConventions) {
  cb::Stream rng(4);
  const double lambda = 0.7, rho = 1.6;
  cb::KernelState s(context_rbf(), lambda, rho);
  for (int i = 0; i < 12; ++i) s.append(cb::EmbeddingHandle::exact(0, random_empirical(2, 3, rng)), 0.0);
  const auto n = static_cast<Eigen::Index>(s.size());
  const MatrixXd I = MatrixXd::Identity(n, n);
  EXPECT_NEAR(s.logdet_regularized(), std::log((I + s.gram() / lambda).determinant()), 1e-8);
  EXPECT_NEAR(s.logdet_scaled(), std::log((I + s.gram() / (lambda * rho)).determinant()), 1e-8);
}

TEST(KernelState, InterpolatesAtSmallLambda) {
  cb::KernelState s(context_rbf(), 1e-8, 1.0);
  const std::vector<VectorXd> pts{v({0.0, 0.0}), v({1.0, 0.5}), v({-0.7, 2.0})};
  const std::vector<double> ys{0.3, -1.2, 0.8};
  for (std::size_t i = 0; i < pts.size(); ++i) s.append(cb::EmbeddingHandle::exact(0, cb::ContextDistribution::dirac(pts[i])), ys[i]);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_NEAR(s.posterior_mean(cb::EmbeddingHandle::exact(0, cb::ContextDistribution::dirac(pts[i]))), ys[i], 1e-6);
  }
}

TEST(KernelState, DuplicateAppendStaysSolvable) {
  cb::KernelState s(context_rbf(), 1.0, 1.0);
  const auto h = cb::EmbeddingHandle::exact(0, cb::ContextDistribution::dirac(v({0.2, 0.2})));
  s.append(h, 1.0);
  s.append(h, 1.0);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(s.gram());
  EXPECT_GE(eig.eigenvalues().minCoeff(), -1e-12);
  EXPECT_NEAR(s.posterior_mean(h), 2.0 / 3.0, 1e-12);
}

TEST(KernelState, IncrementalFactorMatchesDense) {
  cb::Stream rng(5);
  const double lambda = 0.3;
  cb::KernelState s(context_rbf(), lambda, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    auto batch = std::make_shared<const cb::SampleBatch>(cb::sample_contexts(random_empirical(2, 4, rng), 6, rng));
    s.append(cb::EmbeddingHandle::sampled(0, batch), n(rng));
  }
  const auto t = static_cast<Eigen::Index>(s.size());
  const MatrixXd A = s.gram() + lambda * MatrixXd::Identity(t, t);
  const MatrixXd dense = A.llt().matrixL();
  EXPECT_LT((s.factor() - dense).norm(), 1e-8);
  EXPECT_EQ(s.jitter(), 0.0);
  const VectorXd r = VectorXd::NullaryExpr(t, [&]() { return n(rng); });
  EXPECT_LE((A * s.solve(r) - r).norm(), 1e-8 * r.norm());
  EXPECT_LT((s.alpha() - A.ldlt().solve(s.observations())).norm(), 1e-8);
}

TEST(KernelState, RepresenterAndMonotoneWidth) {
  cb::Stream rng(6);
  cb::KernelState s(context_rbf(), 0.5, 1.0);
  std::vector<cb::EmbeddingHandle> queries;
  for (int i = 0; i < 5; ++i) queries.push_back(cb::EmbeddingHandle::exact(0, random_empirical(2, 3, rng)));
  std::vector<double> prev(queries.size(), std::numeric_limits<double>::infinity());
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 25; ++t) {
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const double w = s.posterior_width(queries[q]);
      EXPECT_LE(w, prev[q] + 1e-8);
      prev[q] = w;
      double rep = 0.0;
      for (std::size_t j = 0; j < s.size(); ++j) {
        rep += s.alpha()[static_cast<Eigen::Index>(j)] * cb::embedding_inner(s.handles()[j], queries[q], s.kernel());
      }
      EXPECT_NEAR(s.posterior_mean(queries[q]), rep, 1e-12);
    }
    s.append(cb::EmbeddingHandle::exact(0, random_empirical(2, 2, rng)), n(rng));
  }
}

TEST(KernelState, RidgeEquivalenceUnderLinearKernel) {
  const auto map = random_map(5, 4, 3, 7);
  const auto k = cb::linear_kernel(map);
  const double lambda = 0.8;
  cb::KernelState ks(k, lambda, 1.0);
  cb::RidgeState rs(4, lambda);
  cb::Stream rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 40; ++t) {
    const auto mu = random_empirical(3, 1 + t % 4, rng);
    const cb::ActionId x = static_cast<cb::ActionId>(t % 5);
    const double y = n(rng);
    ks.append(cb::EmbeddingHandle::exact(x, mu), y);
    rs.update(cb::expected_feature(map, x, mu), y);
    const auto q_mu = random_empirical(3, 3, rng);
    for (cb::ActionId qx = 0; qx < 5; ++qx) {
      const auto q = cb::EmbeddingHandle::exact(qx, q_mu);
      const VectorXd psi = cb::expected_feature(map, qx, q_mu);
      EXPECT_NEAR(ks.posterior_mean(q), psi.dot(rs.theta_hat()), 1e-8);
      EXPECT_NEAR(ks.posterior_width(q), rs.width(psi), 1e-8);
    }
  }
  EXPECT_NEAR(ks.logdet_regularized(), rs.logdet_ratio(), 1e-8);
}

TEST(KernelPolicy, SelectExamplesMirrorLinear) {
  // phi(0, .) = e1, phi(1, .) = e2, under Dirac contexts.
  const cb::FeatureMap map(2, [](cb::ActionId x, const cb::Context&, Eigen::Ref<VectorXd> out) {
    out.setZero();
    out[static_cast<Eigen::Index>(x)] = 1.0;
  });
  cb::KernelPolicyConfig cfg;
  cfg.beta = cb::TunedBeta{1.0};
  cb::KernelPolicy p(cfg, cb::linear_kernel(map), 2);
  cb::Stream rng(1);
  const auto mu = cb::ContextDistribution::dirac(v({0.0}));
  auto emb = p.round_embeddings(mu, rng);
  EXPECT_EQ(p.select_action(emb).action, 0u);  // fresh state: tie
  EXPECT_THROW(p.select_action(emb), cb::ProtocolError);
  p.observe(2.0);
  EXPECT_THROW(p.observe(1.0), cb::ProtocolError);

  // Exploitation after learning theta_1 > 0 with beta = 0.
  cfg.beta = cb::TunedBeta{0.0};
  cb::KernelPolicy q(cfg, cb::linear_kernel(map), 2);
  emb = q.round_embeddings(mu, rng);
  q.select_action(emb);
  q.observe(-1.0);
  EXPECT_EQ(q.select_action(emb).action, 1u);
}

TEST(KernelPolicy, TheoreticalBetaUsesHalfDelta) {
  cb::KernelPolicyConfig cfg;
  cfg.beta = cb::TheoreticalBeta{0.1, 0.1, 1.0};
  cb::KernelPolicy p(cfg, context_rbf(), 3);
  const double rho = std::sqrt(4.01);
  EXPECT_DOUBLE_EQ(p.current_beta(), rho * (std::sqrt(2.0 * std::log(20.0)) + 1.0));
  EXPECT_DOUBLE_EQ(p.state().rho(), rho);
}

TEST(KernelPolicy, SampledEmbeddingsShareOneBatch) {
  cb::KernelPolicyConfig cfg;
  cfg.mode = cb::FeatureMode::Sampled;
  cfg.samples = cb::SampleSchedule::fixed(8);
  cb::KernelPolicy p(cfg, context_rbf(), 4);
  cb::Stream rng(2);
  const auto emb = p.round_embeddings(cb::ContextDistribution::diagonal_gaussian(VectorXd::Zero(2), VectorXd::Ones(2)), rng);
  ASSERT_EQ(emb.size(), 4u);
  for (const auto& e : emb) {
    EXPECT_EQ(&e.points(), &emb[0].points());
    EXPECT_EQ(e.points().size(), 8u);
  }
}

// The kernel policy under the linear kernel retraces the linear policy.
TEST(KernelPolicy, TrajectoryMatchesLinearPolicy) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto map = random_map(6, 4, 2, 100 + seed);
    cb::KernelPolicyConfig kcfg;
    kcfg.beta = cb::TunedBeta{1.5};
    kcfg.lambda = 0.9;
    cb::KernelPolicy kp(kcfg, cb::linear_kernel(map), 6);
    cb::PolicyConfig lcfg;
    lcfg.variant = cb::Variant::HiddenExpected;
    lcfg.beta = cb::TunedBeta{1.5};
    lcfg.lambda = 0.9;
    cb::LinearPolicy lp(lcfg, 4, 6, 60);
    cb::Stream rng(seed);
    std::normal_distribution<double> n(0.0, 0.1);
    for (int t = 0; t < 60; ++t) {
      const auto mu = random_empirical(2, 3, rng);
      const auto fs = cb::build_feature_set(map, 6, mu, cb::FeatureRequest::expected(), rng);
      const auto ld = lp.select_action(fs);
      const auto kd = kp.select_action(kp.round_embeddings(mu, rng));
      ASSERT_EQ(ld.action, kd.action) << "seed " << seed << " round " << t;
      EXPECT_NEAR(kd.width, ld.width, 1e-8);
      const double y = ld.feature.sum() + n(rng);
      lp.observe_hidden(y);
      kp.observe(y);
    }
  }
}

TEST(Kernel, CatalogueValidates) {
  const auto map = random_map(3, 3, 2, 9);
  cb::Stream rng(3);
  std::vector<cb::Context> probes;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 8; ++i) probes.push_back(VectorXd::NullaryExpr(2, [&]() { return n(rng); }));
  EXPECT_NO_THROW(cb::linear_kernel(map).validate(3, probes));
  const auto rbf = cb::rbf_kernel(0.7, [](cb::ActionId x) { return VectorXd::Constant(1, double(x)); });
  EXPECT_NO_THROW(rbf.validate(3, probes));
  EXPECT_THROW(cb::rbf_kernel(-1.0, [](cb::ActionId) { return VectorXd::Zero(1); }), cb::ValidationError);
  const cb::Kernel asym("asym", [](cb::ActionId a, const cb::Context&, cb::ActionId b, const cb::Context&) {
    return a < b ? 0.1 : 0.0;
  });
  EXPECT_THROW(asym.validate(2, probes), cb::ValidationError);
  const cb::Kernel big("big", [](cb::ActionId, const cb::Context&, cb::ActionId, const cb::Context&) { return 2.0; });
  EXPECT_THROW(big.validate(1, probes), cb::ValidationError);
  const cb::Kernel indefinite("neg", [](cb::ActionId, const cb::Context& a, cb::ActionId, const cb::Context& b) {
    return (a - b).squaredNorm() > 0 ? -0.9 : 1.0;
  });
  EXPECT_THROW(indefinite.validate(1, probes), cb::ValidationError);
}
