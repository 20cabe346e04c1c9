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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctxbandit/context_model.hpp"
#include "ctxbandit/errors.hpp"
#include "ctxbandit/linear_policies.hpp"

namespace ctxbandit {

// Symmetric kernel on (action, context) pairs.
class Kernel {
 public:
  using Fn = std::function<double(ActionId, const Context&, ActionId, const Context&)>;

  Kernel(std::string name, Fn fn, std::shared_ptr<const FeatureMap> features = nullptr)
      : name_(std::move(name)), fn_(std::move(fn)), features_(std::move(features)) {
    if (!fn_) throw ValidationError("kernel requires an evaluation function");
  }

  const std::string& name() const { return name_; }
  // Finite feature map with k = phi^T phi', when the kernel has one. Mean
  // embeddings are then inner products of mean features.
  const FeatureMap* features() const { return features_.get(); }

  double operator()(ActionId xa, const Context& ca, ActionId xb, const Context& cb) const {
    return fn_(xa, ca, xb, cb);
  }

  // Checks symmetry (1e-12), k(z, z) <= 1 + 1e-6 and that the Gram matrix of
  // all (action, probe) pairs has no eigenvalue below -1e-8.
  void validate(std::size_t num_actions, std::span<const Context> probes) const {
    std::vector<std::pair<ActionId, const Context*>> points;
    for (ActionId x = 0; x < num_actions; ++x)
      for (const auto& c : probes) points.emplace_back(x, &c);
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd G(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        G(i, j) = (*this)(points[i].first, *points[i].second, points[j].first, *points[j].second);
        if (!std::isfinite(G(i, j))) throw ValidationError("kernel '" + name_ + "' is not finite");
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      if (G(i, i) > 1.0 + kNormTolerance) {
        throw ValidationError("kernel '" + name_ + "' violates k(z, z) <= 1 on probes");
      }
      for (Eigen::Index j = 0; j < i; ++j) {
        if (std::abs(G(i, j) - G(j, i)) > 1e-12) {
          throw ValidationError("kernel '" + name_ + "' is not symmetric on probes");
        }
      }
    }
    if (n > 0) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(G, Eigen::EigenvaluesOnly);
      if (eig.eigenvalues().minCoeff() < -1e-8) {
        throw ValidationError("kernel '" + name_ + "' Gram matrix is not positive semidefinite");
      }
    }
  }

 private:
  std::string name_;
  Fn fn_;
  std::shared_ptr<const FeatureMap> features_;
};

// k((x, c), (x', c')) = phi(x, c)^T phi(x', c')
inline Kernel linear_kernel(FeatureMap map) {
  auto shared = std::make_shared<const FeatureMap>(std::move(map));
  return Kernel(
      "linear",
      [shared](ActionId xa, const Context& ca, ActionId xb, const Context& cb) {
        return shared->eval(xa, ca).dot(shared->eval(xb, cb));
      },
      shared);
}

// Gaussian kernel over the concatenation (action vector, context).
inline Kernel rbf_kernel(double lengthscale, std::function<Eigen::VectorXd(ActionId)> action_vector) {
  if (!(lengthscale > 0.0)) throw ValidationError("rbf: lengthscale must be positive");
  if (!action_vector) throw ValidationError("rbf: environment provides no action vectors");
  const double scale = 1.0 / (2.0 * lengthscale * lengthscale);
  return Kernel("rbf(" + std::to_string(lengthscale) + ")",
                [scale, action_vector = std::move(action_vector)](ActionId xa, const Context& ca,
                                                                  ActionId xb, const Context& cb) {
                  const double d2 = (action_vector(xa) - action_vector(xb)).squaredNorm() +
                                    (ca - cb).squaredNorm();
                  return std::exp(-scale * d2);
                });
}

// Mean embedding of one round's action under the context distribution, either
// exact (finite support: Dirac or empirical) or through a stored sample batch.
class EmbeddingHandle {
 public:
  enum class Mode { Exact, Sampled };

  static EmbeddingHandle exact(ActionId x, const ContextDistribution& mu) {
    EmbeddingHandle h;
    h.action_ = x;
    h.mode_ = Mode::Exact;
    std::visit(
        [&h](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Dirac>) {
            h.points_ = std::make_shared<const SampleBatch>(SampleBatch{v.point});
            h.weights_ = std::make_shared<const std::vector<double>>(std::vector<double>{1.0});
          } else if constexpr (std::is_same_v<T, Empirical>) {
            SampleBatch pts;
            std::vector<double> w;
            for (std::size_t i = 0; i < v.points.size(); ++i) {
              if (v.weights[i] == 0.0) continue;
              pts.push_back(v.points[i]);
              w.push_back(v.weights[i]);
            }
            h.points_ = std::make_shared<const SampleBatch>(std::move(pts));
            h.weights_ = std::make_shared<const std::vector<double>>(std::move(w));
          } else {
            throw UnsupportedExpectation(
                "exact kernel mean embeddings need a finite-support context distribution; "
                "use sampled embeddings");
          }
        },
        mu.variant());
    return h;
  }

  static EmbeddingHandle sampled(ActionId x, std::shared_ptr<const SampleBatch> batch) {
    if (!batch || batch->empty()) throw ValidationError("sampled embedding needs a nonempty batch");
    EmbeddingHandle h;
    h.action_ = x;
    h.mode_ = Mode::Sampled;
    h.points_ = std::move(batch);
    return h;
  }

  ActionId action() const { return action_; }
  Mode mode() const { return mode_; }
  const SampleBatch& points() const { return *points_; }
  // Null for sampled handles (uniform 1/L weights).
  const std::vector<double>* weights() const { return weights_.get(); }

  // Total order on content, used to evaluate inner products in a canonical
  // argument order.
  friend bool canonical_less(const EmbeddingHandle& a, const EmbeddingHandle& b) {
    if (a.action_ != b.action_) return a.action_ < b.action_;
    if (a.mode_ != b.mode_) return a.mode_ < b.mode_;
    if (a.points_ == b.points_) return false;
    const auto& pa = *a.points_;
    const auto& pb = *b.points_;
    if (pa.size() != pb.size()) return pa.size() < pb.size();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      if (pa[i].size() != pb[i].size()) return pa[i].size() < pb[i].size();
      for (Eigen::Index k = 0; k < pa[i].size(); ++k) {
        if (pa[i][k] != pb[i][k]) return pa[i][k] < pb[i][k];
      }
    }
    if (a.weights_ && b.weights_) return *a.weights_ < *b.weights_;
    return false;
  }

 private:
  EmbeddingHandle() = default;

  ActionId action_ = 0;
  Mode mode_ = Mode::Exact;
  std::shared_ptr<const SampleBatch> points_;
  std::shared_ptr<const std::vector<double>> weights_;
};

// Mean feature of an embedding under a finite feature map; the same
// arithmetic as expected_feature / sampled_feature.
inline Eigen::VectorXd mean_feature(const EmbeddingHandle& h, const FeatureMap& map) {
  if (h.weights() == nullptr) return sampled_feature(map, h.action(), h.points());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(map.dimension()));
  Eigen::VectorXd phi(out.size());
  const auto& w = *h.weights();
  for (std::size_t i = 0; i < w.size(); ++i) {
    map.eval_into(h.action(), h.points()[i], phi);
    out += w[i] * phi;
  }
  return out;
}

// <k_a, k_b> = E_{c ~ a, c' ~ b}[k(x_a, c, x_b, c')]: the weighted double sum
// over supports, or (1/(L_a L_b)) sum_{i,j} k(...) for sample batches. The two
// copies are independent, so <k_a, k_a> is not E[k(x, c, x, c)].
inline double embedding_inner(const EmbeddingHandle& a, const EmbeddingHandle& b, const Kernel& k) {
  if (canonical_less(b, a)) return embedding_inner(b, a, k);
  if (const auto* map = k.features()) return mean_feature(a, *map).dot(mean_feature(b, *map));
  const auto& pa = a.points();
  const auto& pb = b.points();
  const auto* wa = a.weights();
  const auto* wb = b.weights();
  double total = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < pb.size(); ++j) {
      const double kij = k(a.action(), pa[i], b.action(), pb[j]);
      row += wb ? (*wb)[j] * kij : kij;
    }
    total += wa ? (*wa)[i] * row : row;
  }
  if (!wa) total /= static_cast<double>(pa.size());
  if (!wb) total /= static_cast<double>(pb.size());
  return total;
}

// Distributional kernel ridge regression over mean embeddings:
//   f_hat(q) = k_t(q)^T (K_t + lambda I)^{-1} y,
//   sigma_t^2(q) = (<q, q> - k_t(q)^T (K_t + lambda I)^{-1} k_t(q)) / lambda.
// Cholesky factors of K_t + lambda I and K_t + lambda rho I are extended one
// row per append.
class KernelState {
 public:
  KernelState(Kernel kernel, double lambda, double rho)
      : kernel_(std::move(kernel)), lambda_(lambda), rho_(rho) {
    if (!(lambda > 0.0)) throw ValidationError("kernel state: lambda must be positive");
    if (!(rho > 0.0)) throw ValidationError("kernel state: rho must be positive");
  }

  const Kernel& kernel() const { return kernel_; }
  double lambda() const { return lambda_; }
  double rho() const { return rho_; }
  std::size_t size() const { return handles_.size(); }
  const std::vector<EmbeddingHandle>& handles() const { return handles_; }
  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::VectorXd& observations() const { return y_; }
  // Lower-triangular factor of K_t + lambda I.
  const Eigen::MatrixXd& factor() const { return chol_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  double jitter() const { return jitter_; }

  Eigen::VectorXd cross(const EmbeddingHandle& q) const {
    Eigen::VectorXd k(static_cast<Eigen::Index>(handles_.size()));
    if (const auto* map = kernel_.features()) {
      const Eigen::VectorXd psi = mean_feature(q, *map);
      for (std::size_t s = 0; s < handles_.size(); ++s) {
        k[static_cast<Eigen::Index>(s)] = mean_features_[s].dot(psi);
      }
      return k;
    }
    for (std::size_t s = 0; s < handles_.size(); ++s) {
      k[static_cast<Eigen::Index>(s)] = embedding_inner(handles_[s], q, kernel_);
    }
    return k;
  }

  // (K_t + lambda I)^{-1} r through the maintained factor.
  Eigen::VectorXd solve(const Eigen::VectorXd& r) const {
    if (handles_.empty()) return r;
    const auto L = chol_.triangularView<Eigen::Lower>();
    return L.transpose().solve(L.solve(r));
  }

  double posterior_mean(const EmbeddingHandle& q) const {
    if (handles_.empty()) return 0.0;
    return cross(q).dot(alpha_);
  }

  double posterior_width(const EmbeddingHandle& q) const {
    return width_from(embedding_inner(q, q, kernel_), cross(q));
  }

  // Mean and width from a precomputed self inner product and cross vector.
  double width_from(double self, const Eigen::VectorXd& k) const {
    double var = self;
    if (k.size() > 0) {
      const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
      var -= v.squaredNorm();
    }
    var /= lambda_;
    if (var < 0.0) {
      if (var < -1e-8) {
        throw NumericalError("kernel state: posterior variance " + std::to_string(var) +
                             " is negative beyond tolerance (t=" + std::to_string(size()) + ")");
      }
      var = 0.0;
    }
    return std::sqrt(var);
  }

  // ln det(I + (lambda rho)^{-1} K_t), the convention inside the radius.
  double logdet_scaled() const { return logdet_scaled_; }
  // ln det(I + lambda^{-1} K_t), the convention of the regularized factor.
  double logdet_regularized() const { return logdet_regularized_; }

  // rho (sqrt(2 ln(det(I + (lambda rho)^{-1} K_t)^{1/2} / delta)) + sqrt(lambda) B)
  double beta(double delta, double B = 1.0) const {
    if (!(delta > 0.0)) return std::numeric_limits<double>::infinity();
    return rho_ * (std::sqrt(logdet_scaled_ + 2.0 * std::log(1.0 / delta)) + std::sqrt(lambda_) * B);
  }

  void append(EmbeddingHandle h, double y) {
    if (!std::isfinite(y)) throw ValidationError("kernel state: non-finite observation");
    const Eigen::VectorXd col = cross(h);
    const double diag = embedding_inner(h, h, kernel_);
    const auto t = static_cast<Eigen::Index>(handles_.size());

    const double schur = extend_factor(chol_, col, diag, lambda_, true);
    logdet_regularized_ += std::log(schur / lambda_);
    const double schur_scaled = extend_factor(chol_scaled_, col, diag, lambda_ * rho_, false);
    logdet_scaled_ += std::log(schur_scaled / (lambda_ * rho_));

    gram_.conservativeResize(t + 1, t + 1);
    gram_.block(0, t, t, 1) = col;
    gram_.block(t, 0, 1, t) = col.transpose();
    gram_(t, t) = diag;
    y_.conservativeResize(t + 1);
    y_[t] = y;
    if (const auto* map = kernel_.features()) mean_features_.push_back(mean_feature(h, *map));
    handles_.push_back(std::move(h));
    alpha_ = solve(y_);
  }

 private:
  // Appends one row to the lower factor of K + shift I; returns the new
  // squared pivot. Jitter escalates 1e-10 .. 1e-6 when the pivot is not positive.
  double extend_factor(Eigen::MatrixXd& L, const Eigen::VectorXd& col, double diag, double shift,
                       bool track_jitter) {
    const auto t = L.rows();
    Eigen::VectorXd l;
    if (t > 0) l = L.triangularView<Eigen::Lower>().solve(col);
    double schur = diag + shift - (t > 0 ? l.squaredNorm() : 0.0);
    const double tol = 1e-8 * std::max(1.0, std::abs(diag));
    if (schur < shift - tol) {
      throw NumericalError("kernel state: Gram matrix lost positive semidefiniteness (pivot deficit " +
                           std::to_string(shift - schur) + " at t=" + std::to_string(t) + ")");
    }
    if (!(schur > 0.0)) {
      double jitter = 1e-10;
      while (jitter <= 1e-6 && !(schur + jitter > 0.0)) jitter *= 10.0;
      if (!(schur + jitter > 0.0)) {
        throw NumericalError("kernel state: factorization failed after jitter escalation");
      }
      schur += jitter;
      if (track_jitter) jitter_ += jitter;
    }
    L.conservativeResize(t + 1, t + 1);
    L.block(0, t, t, 1).setZero();
    if (t > 0) L.block(t, 0, 1, t) = l.transpose();
    L(t, t) = std::sqrt(schur);
    return schur;
  }

  Kernel kernel_;
  double lambda_;
  double rho_;
  std::vector<EmbeddingHandle> handles_;
  std::vector<Eigen::VectorXd> mean_features_;  // only for kernels with finite features
  Eigen::MatrixXd gram_;
  Eigen::VectorXd y_;
  Eigen::MatrixXd chol_;
  Eigen::MatrixXd chol_scaled_;
  Eigen::VectorXd alpha_;
  double logdet_scaled_ = 0.0;
  double logdet_regularized_ = 0.0;
  double jitter_ = 0.0;
};

struct KernelPolicyConfig {
  FeatureMode mode = FeatureMode::Expected;  // Expected or Sampled
  SampleSchedule samples = SampleSchedule::fixed(10);
  BetaMode beta = TunedBeta{1.0};
  double lambda = 1.0;

  // Noise scale used for rho = sqrt(4 + sigma^2).
  double sigma() const {
    if (const auto* th = std::get_if<TheoreticalBeta>(&beta)) return th->sigma;
    return 0.0;
  }

  void validate() const {
    if (mode == FeatureMode::Realized) throw ValidationError("kernel policy: realized mode unsupported");
    if (!(lambda > 0.0)) throw ValidationError("kernel policy: lambda must be positive");
    if (!samples.grows_with_round && samples.constant == 0) {
      throw ValidationError("kernel policy: constant sample count must be at least 1");
    }
    if (const auto* th = std::get_if<TheoreticalBeta>(&beta)) {
      ConfidenceConfig{th->sigma, th->delta, th->S}.validate();
    }
  }
};

struct KernelDecision {
  ActionId action = 0;
  double beta = 0.0;
  double mean = 0.0;
  double width = 0.0;
};

// UCB over kernel mean embeddings. The theoretical radius uses
// rho = sqrt(4 + sigma^2) at delta/2, the other half of delta being spent on
// the martingale term of the regret bound.
class KernelPolicy {
 public:
  KernelPolicy(KernelPolicyConfig config, Kernel kernel, std::size_t num_actions)
      : config_(std::move(config)),
        state_(std::move(kernel), config_.lambda, std::sqrt(4.0 + config_.sigma() * config_.sigma())),
        num_actions_(num_actions) {
    config_.validate();
    if (num_actions == 0) throw ValidationError("kernel policy: at least one action required");
  }

  const KernelPolicyConfig& config() const { return config_; }
  const KernelState& state() const { return state_; }
  bool pending() const { return pending_.has_value(); }

  FeatureRequest feature_request() const {
    if (config_.mode == FeatureMode::Sampled) {
      return FeatureRequest::sampled(config_.samples.at(state_.size() + 1));
    }
    return FeatureRequest::expected();
  }

  double current_beta() const {
    if (const auto* tuned = std::get_if<TunedBeta>(&config_.beta)) return tuned->value;
    const auto& th = std::get<TheoreticalBeta>(config_.beta);
    return state_.beta(th.delta / 2.0, th.S);
  }

  std::optional<double> theoretical_beta() const {
    if (!std::holds_alternative<TheoreticalBeta>(config_.beta)) return std::nullopt;
    return current_beta();
  }

  // Per-action embeddings of the current round: exact, or sampled from one
  // shared batch.
  std::vector<EmbeddingHandle> round_embeddings(const ContextDistribution& mu, Stream& rng) const {
    std::vector<EmbeddingHandle> out;
    out.reserve(num_actions_);
    const auto req = feature_request();
    if (req.mode == FeatureMode::Sampled) {
      auto batch = std::make_shared<const SampleBatch>(sample_contexts(mu, req.samples, rng));
      for (ActionId x = 0; x < num_actions_; ++x) out.push_back(EmbeddingHandle::sampled(x, batch));
    } else {
      for (ActionId x = 0; x < num_actions_; ++x) out.push_back(EmbeddingHandle::exact(x, mu));
    }
    return out;
  }

  KernelDecision select_action(const std::vector<EmbeddingHandle>& embeddings) {
    if (pending_) throw ProtocolError("kernel select_action called twice without an observation");
    if (embeddings.empty()) throw ValidationError("kernel select: empty action set");
    const double beta = current_beta();
    const bool infinite = std::isinf(beta);
    KernelDecision best;
    double best_score = -std::numeric_limits<double>::infinity();
    std::size_t best_index = 0;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
      const auto& q = embeddings[i];
      const Eigen::VectorXd k = state_.cross(q);
      const double mean = state_.size() == 0 ? 0.0 : k.dot(state_.alpha());
      const double width = state_.width_from(embedding_inner(q, q, state_.kernel()), k);
      const double score = infinite ? width : mean + beta * width;
      if (i == 0 || score > best_score) {
        best_score = score;
        best_index = i;
        best = {q.action(), beta, mean, width};
      }
    }
    pending_.emplace(embeddings[best_index]);
    return best;
  }

  void observe(double y) {
    if (!pending_) throw ProtocolError("kernel observe without a pending selection");
    state_.append(std::move(*pending_), y);
    pending_.reset();
  }

 private:
  KernelPolicyConfig config_;
  KernelState state_;
  std::size_t num_actions_;
  std::optional<EmbeddingHandle> pending_;
};

}  // namespace ctxbandit
