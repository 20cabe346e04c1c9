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
#include <optional>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "ctxbandit/context_model.hpp"
#include "ctxbandit/errors.hpp"
#include "ctxbandit/ridge_estimator.hpp"

namespace ctxbandit {

enum class Variant {
  HiddenExpected,    // context never revealed, regression on expected features
  HiddenSampled,     // as above with L-sample feature averages
  ObservedExpected,  // context revealed after acting, regression on realized features
  ObservedSampled,
  ExactBaseline,     // context revealed before acting
};

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::HiddenExpected: return "hidden_expected";
    case Variant::HiddenSampled: return "hidden_sampled";
    case Variant::ObservedExpected: return "observed_expected";
    case Variant::ObservedSampled: return "observed_sampled";
    case Variant::ExactBaseline: return "exact";
  }
  return "?";
}

inline bool uses_sampled_features(Variant v) {
  return v == Variant::HiddenSampled || v == Variant::ObservedSampled;
}

inline bool regresses_on_realized(Variant v) {
  return v == Variant::ObservedExpected || v == Variant::ObservedSampled || v == Variant::ExactBaseline;
}

// Number of context samples per round: a constant, or L = t.
struct SampleSchedule {
  bool grows_with_round = true;
  std::size_t constant = 1;

  static SampleSchedule per_round() { return {true, 0}; }
  static SampleSchedule fixed(std::size_t L) { return {false, L}; }

  std::size_t at(std::size_t round) const {
    return grows_with_round ? std::max<std::size_t>(round, 1) : constant;
  }
};

// Radius derived from the regret analysis; sigma is the reward noise scale.
struct TheoreticalBeta {
  double sigma = 0.1;
  double delta = 0.1;
  double S = 1.0;
};

// Constant radius picked by tuning.
struct TunedBeta {
  double value = 1.0;
};

using BetaMode = std::variant<TheoreticalBeta, TunedBeta>;

struct PolicyConfig {
  Variant variant = Variant::HiddenExpected;
  SampleSchedule samples = SampleSchedule::per_round();
  BetaMode beta = TunedBeta{1.0};
  double lambda = 1.0;
  std::size_t resync_period = RidgeState::kDefaultResyncPeriod;
  double feature_bound = 1.0;

  bool theoretical() const { return std::holds_alternative<TheoreticalBeta>(beta); }

  void validate() const {
    if (!(lambda > 0.0)) throw ValidationError("policy: lambda must be positive");
    if (!samples.grows_with_round && samples.constant == 0) {
      throw ValidationError("policy: constant sample count must be at least 1");
    }
    if (const auto* th = std::get_if<TheoreticalBeta>(&beta)) {
      ConfidenceConfig{th->sigma, th->delta, th->S}.validate();
    } else if (!(std::get<TunedBeta>(beta).value >= 0.0)) {
      throw ValidationError("policy: tuned beta must be nonnegative");
    }
  }
};

// Variance proxy and confidence split used by each variant's theoretical radius:
// hidden variants absorb the context perturbation as extra noise
// (rho = sqrt(4 + sigma^2), delta/2); observed variants regress on the
// realized features (rho = sigma, delta/3); the baseline is standard LinUCB.
inline ConfidenceConfig theoretical_confidence(Variant v, const TheoreticalBeta& th) {
  switch (v) {
    case Variant::HiddenExpected:
    case Variant::HiddenSampled:
      return {std::sqrt(4.0 + th.sigma * th.sigma), th.delta / 2.0, th.S};
    case Variant::ObservedExpected:
    case Variant::ObservedSampled:
      return {th.sigma, th.delta / 3.0, th.S};
    case Variant::ExactBaseline:
      return {th.sigma, th.delta, th.S};
  }
  return {};
}

struct Decision {
  ActionId action = 0;
  Eigen::VectorXd feature;
  double beta = 0.0;
  double width = 0.0;
  double ucb = 0.0;
};

// argmax_x psi_x^T theta_hat + beta ||psi_x||_{V^{-1}}, lowest index on ties.
// An infinite beta degenerates to the widest action.
inline Decision ucb_argmax(const RidgeState& ridge, const FeatureSet& fs, double beta) {
  if (fs.num_actions() == 0) throw ValidationError("select: empty feature set");
  if (fs.dimension() != ridge.dimension()) throw ValidationError("select: feature dimension mismatch");
  const bool infinite = std::isinf(beta);
  Decision best;
  double best_score = -std::numeric_limits<double>::infinity();
  bool found = false;
  for (ActionId x = 0; x < fs.num_actions(); ++x) {
    const auto psi = fs.feature(x);
    const double w = ridge.width(psi);
    const double score = infinite ? w : psi.dot(ridge.theta_hat()) + beta * w;
    if (!found || score > best_score) {
      found = true;
      best_score = score;
      best.action = x;
      best.width = w;
    }
  }
  best.feature = fs.feature(best.action);
  best.beta = beta;
  best.ucb = infinite ? std::numeric_limits<double>::infinity() : best_score;
  return best;
}

// UCB policy over per-round feature sets, shared by the hidden, observed and
// exact-context variants. Selection and observation strictly alternate.
class LinearPolicy {
 public:
  LinearPolicy(PolicyConfig config, std::size_t dimension, std::size_t num_actions,
               std::size_t horizon)
      : config_(std::move(config)),
        ridge_(dimension, config_.lambda, config_.resync_period, config_.feature_bound),
        num_actions_(num_actions),
        horizon_(horizon) {
    config_.validate();
    if (num_actions == 0) throw ValidationError("policy: at least one action required");
    if (horizon == 0) throw ValidationError("policy: horizon must be positive");
  }

  const PolicyConfig& config() const { return config_; }
  const RidgeState& ridge() const { return ridge_; }
  std::size_t round() const { return ridge_.t(); }
  bool pending() const { return pending_.has_value(); }
  const std::optional<Decision>& last_decision() const { return pending_; }

  // Feature request for the next round's feature set.
  FeatureRequest feature_request() const {
    if (config_.variant == Variant::ExactBaseline) return {FeatureMode::Realized, 0};
    if (uses_sampled_features(config_.variant)) {
      return FeatureRequest::sampled(config_.samples.at(ridge_.t() + 1));
    }
    return FeatureRequest::expected();
  }

  // Radius used for the next selection (computed from V_{t-1}).
  double current_beta() const { return radius(config_.variant); }

  // Theoretical radius of this variant at the current state; nullopt in tuned mode.
  std::optional<double> theoretical_beta() const {
    if (!config_.theoretical()) return std::nullopt;
    return radius(config_.variant);
  }

  Decision select_action(const FeatureSet& fs) {
    if (pending_) throw ProtocolError("select_action called twice without an observation");
    const auto expected_mode = feature_request().mode;
    if (fs.mode != expected_mode) {
      throw ValidationError(std::string("select: policy ") + to_string(config_.variant) +
                            " expects " + to_string(expected_mode) + " features, got " +
                            to_string(fs.mode));
    }
    if (fs.num_actions() != num_actions_) throw ValidationError("select: wrong number of actions");
    pending_ = ucb_argmax(ridge_, fs, current_beta());
    return *pending_;
  }

  // Exact-context baseline: UCB over phi(x, c_t) for the revealed context.
  ActionId exact_baseline_select(const FeatureSet& realized) {
    if (config_.variant != Variant::ExactBaseline) {
      throw ValidationError("exact_baseline_select requires the exact variant");
    }
    return select_action(realized).action;
  }

  // Regression on the decision feature.
  void observe_hidden(double y) {
    if (!pending_) throw ProtocolError("observe without a pending selection");
    ridge_.update(pending_->feature, y);
    pending_.reset();
  }

  // Regression on the realized feature phi(x_t, c_t).
  void observe_exact(const Eigen::Ref<const Eigen::VectorXd>& realized_feature, double y) {
    if (!pending_) throw ProtocolError("observe without a pending selection");
    ridge_.update(realized_feature, y);
    pending_.reset();
  }

 private:
  double radius(Variant v) const {
    if (const auto* tuned = std::get_if<TunedBeta>(&config_.beta)) return tuned->value;
    const auto& th = std::get<TheoreticalBeta>(config_.beta);
    if (v == Variant::HiddenSampled) {
      return ridge_.beta_sampled(th.sigma, th.delta, num_actions_, horizon_);
    }
    return ridge_.beta(theoretical_confidence(v, th));
  }

  PolicyConfig config_;
  RidgeState ridge_;
  std::size_t num_actions_;
  std::size_t horizon_;
  std::optional<Decision> pending_;
};

}  // namespace ctxbandit
