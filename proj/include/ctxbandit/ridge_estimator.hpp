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

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "json.hpp"

#include "ctxbandit/context_model.hpp"
#include "ctxbandit/errors.hpp"

namespace ctxbandit {

// Noise scale and failure probability entering the self-normalized radius.
struct ConfidenceConfig {
  double rho = 1.0;    // subgaussian variance proxy
  double delta = 0.1;  // failure probability
  double S = 1.0;      // bound on ||theta||_2

  void validate() const {
    if (!(rho >= 0.0)) throw ValidationError("confidence: rho must be nonnegative");
    if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("confidence: delta must lie in (0, 1)");
    if (!(S > 0.0)) throw ValidationError("confidence: S must be positive");
  }
};

// rho * sqrt(logdet_ratio + 2 ln(1/delta)) + sqrt(lambda) * S, where
// logdet_ratio = ln(det V_t / det V_0). rho = 0 gives the noiseless radius;
// delta -> 0 or rho -> inf give +inf.
inline double self_normalized_radius(double rho, double delta, double S, double lambda,
                                     double logdet_ratio) {
  const double bias = std::sqrt(lambda) * S;
  if (rho == 0.0) return bias;
  if (!(delta > 0.0) || std::isinf(rho)) return std::numeric_limits<double>::infinity();
  return rho * std::sqrt(logdet_ratio + 2.0 * std::log(1.0 / delta)) + bias;
}

// Radius for sampled feature sets: the noise term with variance proxy
// sqrt(4 + sigma^2) at delta/2, plus the accumulated feature-sampling bias
// sqrt(8 ln T ln(pi^2 T^2 |X| / (3 delta))), plus lambda.
inline double sampled_feature_radius(double sigma, double delta, std::size_t action_count,
                                     std::size_t horizon, double lambda, double logdet_ratio) {
  if (!(delta > 0.0)) return std::numeric_limits<double>::infinity();
  const double T = static_cast<double>(horizon);
  const double noise =
      std::sqrt(2.0 * (4.0 + sigma * sigma) * (0.5 * logdet_ratio + std::log(2.0 / delta)));
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double bias = std::sqrt(
      8.0 * std::log(T) * std::log(pi2 * T * T * static_cast<double>(action_count) / (3.0 * delta)));
  return noise + bias + lambda;
}

// sqrt(sum b_t^2): how far an arbitrary observation bias can move the
// estimate in V_t-norm.
inline double bias_bound(std::span<const double> biases) {
  double acc = 0.0;
  for (double b : biases) acc += b * b;
  return std::sqrt(acc);
}

// Online regularized least squares:
//   V_t = lambda I + sum phi phi^T,  theta_hat = V_t^{-1} sum phi y.
// The inverse and ln det(V_t)/det(V_0) are maintained by rank-one updates and
// recomputed from a fresh Cholesky factorization every `resync_period` updates.
class RidgeState {
 public:
  static constexpr std::size_t kDefaultResyncPeriod = 256;

  RidgeState(std::size_t d, double lambda, std::size_t resync_period = kDefaultResyncPeriod,
             double feature_bound = 1.0)
      : d_(d), lambda_(lambda), resync_period_(resync_period), feature_bound_(feature_bound) {
    if (d == 0) throw ValidationError("ridge: dimension must be positive");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
      throw ValidationError("ridge: lambda must be positive and finite");
    }
    if (resync_period == 0) throw ValidationError("ridge: resync period must be positive");
    if (!(feature_bound > 0.0)) throw ValidationError("ridge: feature bound must be positive");
    const auto n = static_cast<Eigen::Index>(d);
    V_ = lambda * Eigen::MatrixXd::Identity(n, n);
    V_inv_ = (1.0 / lambda) * Eigen::MatrixXd::Identity(n, n);
    b_ = Eigen::VectorXd::Zero(n);
    theta_hat_ = Eigen::VectorXd::Zero(n);
  }

  std::size_t dimension() const { return d_; }
  double lambda() const { return lambda_; }
  double feature_bound() const { return feature_bound_; }
  std::size_t resync_period() const { return resync_period_; }
  const Eigen::MatrixXd& V() const { return V_; }
  const Eigen::MatrixXd& V_inv() const { return V_inv_; }
  const Eigen::VectorXd& b() const { return b_; }
  const Eigen::VectorXd& theta_hat() const { return theta_hat_; }
  double logdet_ratio() const { return logdet_ratio_; }
  std::size_t t() const { return t_; }
  std::size_t updates_since_resync() const { return updates_since_resync_; }

  void update(const Eigen::Ref<const Eigen::VectorXd>& phi, double y) {
    check_dimension(phi);
    if (!phi.allFinite() || !std::isfinite(y)) throw ValidationError("ridge: non-finite update");
    if (phi.norm() > feature_bound_ + kNormTolerance) {
      throw ValidationError("ridge: feature norm " + std::to_string(phi.norm()) + " exceeds bound");
    }
    const double previous_logdet = logdet_ratio_;
    const Eigen::VectorXd u = V_inv_ * phi;
    const double q = phi.dot(u);
    V_inv_.noalias() -= (u * u.transpose()) / (1.0 + q);
    V_.noalias() += phi * phi.transpose();
    logdet_ratio_ += std::log1p(q);
    b_ += y * phi;
    ++t_;
    if (++updates_since_resync_ >= resync_period_) {
      resync();
      if (logdet_ratio_ < previous_logdet) logdet_ratio_ = previous_logdet;
    }
    theta_hat_.noalias() = V_inv_ * b_;
  }

  // Recomputes V^{-1} and the log-determinant ratio from a Cholesky factor of V.
  void resync() {
    Eigen::LLT<Eigen::MatrixXd> llt(V_);
    if (llt.info() != Eigen::Success) throw NumericalError("ridge: V is not positive definite");
    const auto n = static_cast<Eigen::Index>(d_);
    V_inv_ = llt.solve(Eigen::MatrixXd::Identity(n, n));
    V_inv_ = 0.5 * (V_inv_ + V_inv_.transpose()).eval();
    const Eigen::MatrixXd L = llt.matrixL();
    logdet_ratio_ = 2.0 * L.diagonal().array().log().sum() - static_cast<double>(d_) * std::log(lambda_);
    theta_hat_.noalias() = V_inv_ * b_;
    updates_since_resync_ = 0;
  }

  // ||phi||_{V^{-1}}
  double width(const Eigen::Ref<const Eigen::VectorXd>& phi) const {
    check_dimension(phi);
    return std::sqrt(std::max(0.0, phi.dot(V_inv_ * phi)));
  }

  double beta(const ConfidenceConfig& cfg) const {
    return self_normalized_radius(cfg.rho, cfg.delta, cfg.S, lambda_, logdet_ratio_);
  }

  double beta_sampled(double sigma, double delta, std::size_t action_count, std::size_t horizon) const {
    if (action_count == 0 || horizon == 0) {
      throw ValidationError("beta_sampled: action count and horizon must be positive");
    }
    return sampled_feature_radius(sigma, delta, action_count, horizon, lambda_, logdet_ratio_);
  }

  // ||theta - theta_hat||_{V_t}
  double estimation_error(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
    check_dimension(theta);
    const Eigen::VectorXd diff = theta - theta_hat_;
    return std::sqrt(std::max(0.0, diff.dot(V_ * diff)));
  }

  // Flat record: fields in declaration order, matrices row-major, 64-bit floats.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["d"] = d_;
    j["lambda"] = lambda_;
    j["V"] = flatten(V_);
    j["V_inv"] = flatten(V_inv_);
    j["logdet_ratio"] = logdet_ratio_;
    j["b"] = std::vector<double>(b_.data(), b_.data() + b_.size());
    j["theta_hat"] = std::vector<double>(theta_hat_.data(), theta_hat_.data() + theta_hat_.size());
    j["t"] = t_;
    j["updates_since_resync"] = updates_since_resync_;
    j["resync_period"] = resync_period_;
    j["feature_bound"] = feature_bound_;
    return j;
  }

  static RidgeState from_json(const nlohmann::ordered_json& j) {
    try {
      RidgeState s(j.at("d").get<std::size_t>(), j.at("lambda").get<double>(),
                   j.at("resync_period").get<std::size_t>(), j.at("feature_bound").get<double>());
      const auto n = static_cast<Eigen::Index>(s.d_);
      s.V_ = unflatten(j.at("V").get<std::vector<double>>(), n, n);
      s.V_inv_ = unflatten(j.at("V_inv").get<std::vector<double>>(), n, n);
      s.logdet_ratio_ = j.at("logdet_ratio").get<double>();
      s.b_ = unflatten(j.at("b").get<std::vector<double>>(), n, 1);
      s.theta_hat_ = unflatten(j.at("theta_hat").get<std::vector<double>>(), n, 1);
      s.t_ = j.at("t").get<std::size_t>();
      s.updates_since_resync_ = j.at("updates_since_resync").get<std::size_t>();
      return s;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(std::string("ridge checkpoint: ") + e.what());
    }
  }

 private:
  void check_dimension(const Eigen::Ref<const Eigen::VectorXd>& v) const {
    if (static_cast<std::size_t>(v.size()) != d_) {
      throw ValidationError("ridge: expected vector of length " + std::to_string(d_) + ", got " +
                            std::to_string(v.size()));
    }
  }

  static std::vector<double> flatten(const Eigen::MatrixXd& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
    return out;
  }

  static Eigen::MatrixXd unflatten(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
    if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
      throw ValidationError("ridge checkpoint: array has wrong length");
    }
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
    return m;
  }

  std::size_t d_;
  double lambda_;
  std::size_t resync_period_;
  double feature_bound_;
  Eigen::MatrixXd V_;
  Eigen::MatrixXd V_inv_;
  double logdet_ratio_ = 0.0;
  Eigen::VectorXd b_;
  Eigen::VectorXd theta_hat_;
  std::size_t t_ = 0;
  std::size_t updates_since_resync_ = 0;
};

}  // namespace ctxbandit
