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
#include <cstdint>
#include <functional>
#include <iomanip>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ctxbandit/context_model.hpp"
#include "ctxbandit/errors.hpp"
#include "ctxbandit/kernel_bandit.hpp"
#include "ctxbandit/linear_policies.hpp"
#include "ctxbandit/rng.hpp"

namespace ctxbandit {

// Chooses mu_t. Receives the actions played so far, so adaptive sequences can
// be expressed; the shipped environments ignore it.
using DistributionSequence =
    std::function<ContextDistribution(std::size_t t, std::span<const ActionId> history, Stream& rng)>;

// Stochastic bandit with context distributions. Rewards are phi(x, c)^T theta
// unless `reward_override` supplies f directly.
struct Environment {
  std::string name;
  std::size_t num_actions = 0;
  std::shared_ptr<const FeatureMap> features;
  Eigen::VectorXd theta;
  std::function<double(ActionId, const Context&)> reward_override;
  DistributionSequence distributions;
  double noise_sd = 0.1;
  // Action embedding for kernels over (action, context); optional.
  std::function<Eigen::VectorXd(ActionId)> action_vector;
  // Monte Carlo sample count for the oracle when expected rewards have no
  // closed form; 0 disables the fallback.
  std::size_t oracle_samples = 0;
  // Positive constants the raw features and parameter were divided by.
  double feature_scale = 1.0;
  double theta_scale = 1.0;

  bool bounded() const { return features && features->norm_bound().has_value(); }

  double reward(ActionId x, const Context& c) const {
    if (reward_override) return reward_override(x, c);
    return features->eval(x, c).dot(theta);
  }

  // E_{c ~ mu}[f(x, c)] for every action.
  Eigen::VectorXd expected_rewards(const ContextDistribution& mu, Stream& fallback_rng) const {
    Eigen::VectorXd r(static_cast<Eigen::Index>(num_actions));
    if (!reward_override) {
      try {
        Eigen::VectorXd psi(static_cast<Eigen::Index>(features->dimension()));
        for (ActionId x = 0; x < num_actions; ++x) {
          expected_feature_into(*features, x, mu, psi);
          r[static_cast<Eigen::Index>(x)] = psi.dot(theta);
        }
        return r;
      } catch (const UnsupportedExpectation&) {
        if (oracle_samples == 0) throw;
      }
    }
    if (const auto* d = std::get_if<Dirac>(&mu.variant())) {
      for (ActionId x = 0; x < num_actions; ++x) r[static_cast<Eigen::Index>(x)] = reward(x, d->point);
      return r;
    }
    if (const auto* e = std::get_if<Empirical>(&mu.variant())) {
      r.setZero();
      for (std::size_t i = 0; i < e->points.size(); ++i)
        for (ActionId x = 0; x < num_actions; ++x)
          r[static_cast<Eigen::Index>(x)] += e->weights[i] * reward(x, e->points[i]);
      return r;
    }
    if (oracle_samples == 0) {
      throw UnsupportedExpectation("oracle: no closed-form expected reward and no sampling fallback");
    }
    const auto samples = sample_contexts(mu, oracle_samples, fallback_rng);
    r.setZero();
    for (const auto& c : samples)
      for (ActionId x = 0; x < num_actions; ++x) r[static_cast<Eigen::Index>(x)] += reward(x, c);
    return r / static_cast<double>(samples.size());
  }

  void validate() const {
    if (num_actions == 0) throw ValidationError("environment: no actions");
    if (!distributions) throw ValidationError("environment: no distribution sequence");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
      throw ValidationError("environment: noise stddev must be finite and nonnegative");
    }
    if (!reward_override) {
      if (!features) throw ValidationError("environment: linear rewards need a feature map");
      if (static_cast<std::size_t>(theta.size()) != features->dimension()) {
        throw ValidationError("environment: theta dimension does not match the feature map");
      }
      if (bounded() && theta.norm() > 1.0 + 1e-9) {
        throw ValidationError("environment: ||theta|| exceeds 1 for a normalized feature map");
      }
    }
  }
};

// Builds the environment of one trial (e.g. resampling the action set).
using EnvironmentFactory = std::function<Environment(std::uint64_t master_seed, std::size_t trial)>;

inline ActionId argmax_lowest(const Eigen::VectorXd& v) {
  ActionId best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<Eigen::Index>(best)]) best = static_cast<ActionId>(i);
  return best;
}

// argmax_x E_{c ~ mu}[f(x, c)], lowest index on ties.
inline ActionId oracle_action(const Environment& env, const ContextDistribution& mu, Stream& fallback_rng) {
  return argmax_lowest(env.expected_rewards(mu, fallback_rng));
}

struct KernelPolicySpec {
  KernelPolicyConfig config;
  std::string kernel = "linear";  // "linear" or "rbf(<lengthscale>)"
};

struct PolicySpec {
  std::string name;
  std::variant<PolicyConfig, KernelPolicySpec> config;

  bool kernelized() const { return std::holds_alternative<KernelPolicySpec>(config); }
};

// Parses a kernel name from the catalogue against an environment.
inline Kernel make_kernel(const std::string& spec, const Environment& env) {
  if (spec == "linear") {
    if (!env.features) throw ValidationError("linear kernel needs an environment feature map");
    return linear_kernel(*env.features);
  }
  if (spec.rfind("rbf(", 0) == 0 && spec.back() == ')') {
    const auto inner = spec.substr(4, spec.size() - 5);
    double ls = 0.0;
    try {
      std::size_t used = 0;
      ls = std::stod(inner, &used);
      if (used != inner.size()) throw std::invalid_argument(inner);
    } catch (const std::exception&) {
      throw ValidationError("kernel: cannot parse lengthscale in '" + spec + "'");
    }
    return rbf_kernel(ls, env.action_vector);
  }
  throw ValidationError("kernel: unknown kernel '" + spec + "' (expected linear or rbf(<lengthscale>))");
}

enum class Theorem { T1Expected, T1Sampled, T2, T3 };

inline const char* to_string(Theorem th) {
  switch (th) {
    case Theorem::T1Expected: return "T1-expected";
    case Theorem::T1Sampled: return "T1-sampled";
    case Theorem::T2: return "T2";
    case Theorem::T3: return "T3";
  }
  return "?";
}

struct TraceStep {
  std::size_t t = 0;
  std::string mu_label;
  ActionId action = 0;
  ActionId oracle_action = 0;
  Context realized;
  double reward = 0.0;
  double regret_inst = 0.0;  // f(x*_t, c_t) - f(x_t, c_t)
  double regret_cum = 0.0;
  double beta = 0.0;   // radius used for the decision
  double width = 0.0;  // width of the decision feature
  double bound_rhs = std::numeric_limits<double>::quiet_NaN();
  // ln det(V_t)/det(V_0) after the update; kernel policies record
  // ln det(I + (lambda rho)^{-1} K_t).
  double logdet = 0.0;
  // Theoretical radius at the post-update state; NaN in tuned mode.
  double beta_theory = std::numeric_limits<double>::quiet_NaN();
  // D_t = (f(x*,c_t) - E f(x*)) - (f(x_t,c_t) - E f(x_t)).
  double martingale_increment = 0.0;
  // Regret against the realization-aware comparator argmax_x f(x, c_t).
  double realized_regret = 0.0;
};

struct RegretTrace {
  std::size_t trial = 0;
  std::string policy;
  std::optional<Theorem> theorem;  // bound matching the policy, when it has one
  double lambda = 1.0;
  double delta = 0.1;
  std::size_t num_actions = 0;
  double feature_scale = 1.0;
  double theta_scale = 1.0;
  std::vector<TraceStep> steps;
  std::optional<std::string> error;  // set when the episode aborted
  bool numerical_failure = false;

  bool complete() const { return !error.has_value(); }
  double final_regret() const { return steps.empty() ? 0.0 : steps.back().regret_cum; }
};

struct BoundParams {
  double delta = 0.1;
  double lambda = 1.0;
  std::size_t num_actions = 1;
};

// Right-hand side of the regret bound for a horizon T, given the log-det term
// and the radius at T.
inline double bound_value(Theorem th, std::size_t T, double beta_T, double logdet, const BoundParams& p) {
  const double t = static_cast<double>(T);
  const double ucb_term = beta_T * std::sqrt(8.0 * t * std::max(0.0, logdet));
  switch (th) {
    case Theorem::T1Expected:
      return ucb_term + 4.0 * std::sqrt(2.0 * t * std::log(4.0 / p.delta));
    case Theorem::T1Sampled:
      return ucb_term + 4.0 * std::sqrt(2.0 * t *
                                        std::log(2.0 * static_cast<double>(p.num_actions) *
                                                 std::numbers::pi * t / (3.0 * p.delta)));
    case Theorem::T2:
      return ucb_term + 4.0 * (1.0 + beta_T / std::sqrt(p.lambda)) * std::sqrt(2.0 * t * std::log(3.0 / p.delta));
    case Theorem::T3:
      return ucb_term + 4.0 * std::sqrt(2.0 * t * std::log(2.0 / p.delta));
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Bound RHS at step index `step` (0-based) of the trace.
inline double bound_rhs_at(const RegretTrace& trace, std::size_t step, Theorem th) {
  if (!trace.theorem) {
    throw ValidationError("bound_rhs: policy '" + trace.policy + "' has no regret bound in this mode");
  }
  if (*trace.theorem != th) {
    throw ValidationError(std::string("bound_rhs: theorem ") + to_string(th) +
                          " does not apply to policy '" + trace.policy + "' (expects " +
                          to_string(*trace.theorem) + ")");
  }
  if (step >= trace.steps.size()) throw ValidationError("bound_rhs: step out of range");
  const auto& s = trace.steps[step];
  return bound_value(th, s.t, s.beta_theory, s.logdet,
                     {trace.delta, trace.lambda, trace.num_actions});
}

inline double bound_rhs(const RegretTrace& trace, Theorem th) {
  if (trace.steps.empty()) throw ValidationError("bound_rhs: empty trace");
  return bound_rhs_at(trace, trace.steps.size() - 1, th);
}

inline std::optional<Theorem> theorem_for(const PolicySpec& spec) {
  if (const auto* lin = std::get_if<PolicyConfig>(&spec.config)) {
    if (!lin->theoretical()) return std::nullopt;
    switch (lin->variant) {
      case Variant::HiddenExpected: return Theorem::T1Expected;
      case Variant::HiddenSampled: return Theorem::T1Sampled;
      case Variant::ObservedExpected: return Theorem::T2;
      // No closed-form bound is available for the sampled observed variant.
      case Variant::ObservedSampled: return std::nullopt;
      case Variant::ExactBaseline: return std::nullopt;
    }
  }
  const auto& k = std::get<KernelPolicySpec>(spec.config);
  if (std::holds_alternative<TheoreticalBeta>(k.config.beta) && k.config.mode == FeatureMode::Expected) {
    return Theorem::T3;
  }
  return std::nullopt;
}

inline double policy_delta(const PolicySpec& spec) {
  const BetaMode& mode = spec.kernelized() ? std::get<KernelPolicySpec>(spec.config).config.beta
                                           : std::get<PolicyConfig>(spec.config).beta;
  if (const auto* th = std::get_if<TheoreticalBeta>(&mode)) return th->delta;
  return std::numeric_limits<double>::quiet_NaN();
}

namespace detail {

struct RoundSetup {
  ContextDistribution mu;
  Context realized;
  Eigen::VectorXd expected;
  ActionId oracle;
};

inline RoundSetup setup_round(const Environment& env, std::size_t t, std::span<const ActionId> history,
                              std::uint64_t seed, std::size_t trial) {
  auto dist_rng = make_stream(seed, trial, t, "distribution");
  auto mu = env.distributions(t, history, dist_rng);
  auto ctx_rng = make_stream(seed, trial, t, "context");
  Context c = mu.sample(ctx_rng);
  auto oracle_rng = make_stream(seed, trial, t, "oracle");
  Eigen::VectorXd expected = env.expected_rewards(mu, oracle_rng);
  const ActionId oracle = argmax_lowest(expected);
  return {std::move(mu), std::move(c), std::move(expected), oracle};
}

inline void record_outcome(const Environment& env, const RoundSetup& round, ActionId action,
                           double y, TraceStep& step, double previous_cum) {
  step.mu_label = round.mu.label();
  step.action = action;
  step.oracle_action = round.oracle;
  step.realized = round.realized;
  step.reward = y;
  const double f_star = env.reward(round.oracle, round.realized);
  const double f_played = env.reward(action, round.realized);
  step.regret_inst = f_star - f_played;
  step.regret_cum = previous_cum + step.regret_inst;
  step.martingale_increment =
      step.regret_inst - (round.expected[static_cast<Eigen::Index>(round.oracle)] -
                          round.expected[static_cast<Eigen::Index>(action)]);
  double best_realized = f_played;
  for (ActionId x = 0; x < env.num_actions; ++x) best_realized = std::max(best_realized, env.reward(x, round.realized));
  step.realized_regret = best_realized - f_played;
}

inline double noisy_reward(const Environment& env, ActionId x, const Context& c, std::uint64_t seed,
                           std::size_t trial, std::size_t t) {
  auto noise_rng = make_stream(seed, trial, t, "noise");
  std::normal_distribution<double> normal(0.0, 1.0);
  return env.reward(x, c) + env.noise_sd * normal(noise_rng);
}

}  // namespace detail

// Runs T rounds of select -> realize -> reward -> observe. Hidden policies
// never see c_t; observed ones see it after acting; the exact baseline before.
// Module errors abort the episode and are reported on the partial trace.
inline RegretTrace run_episode(const Environment& env, const PolicySpec& spec, std::size_t T,
                               std::uint64_t master_seed, std::size_t trial) {
  if (T == 0) throw ValidationError("run_episode: horizon must be at least 1");
  env.validate();
  RegretTrace trace;
  trace.trial = trial;
  trace.policy = spec.name;
  trace.theorem = theorem_for(spec);
  trace.delta = policy_delta(spec);
  trace.num_actions = env.num_actions;
  trace.feature_scale = env.feature_scale;
  trace.theta_scale = env.theta_scale;
  trace.steps.reserve(T);
  std::vector<ActionId> history;
  history.reserve(T);
  double cum = 0.0;
  bool started = false;  // errors before the first round are configuration errors

  try {
    if (const auto* lin_cfg = std::get_if<PolicyConfig>(&spec.config)) {
      if (!env.features) throw ValidationError("linear policies need an environment feature map");
      PolicyConfig cfg = *lin_cfg;
      cfg.feature_bound = env.features->norm_bound().value_or(std::numeric_limits<double>::infinity());
      if (cfg.theoretical() && !env.bounded()) {
        throw ValidationError("theoretical confidence radii need a normalized feature map");
      }
      trace.lambda = cfg.lambda;
      LinearPolicy policy(cfg, env.features->dimension(), env.num_actions, T);
      const auto& map = *env.features;
      for (std::size_t t = 1; t <= T; ++t) {
        started = true;
        const auto round = detail::setup_round(env, t, history, master_seed, trial);
        FeatureSet fs;
        const auto req = policy.feature_request();
        if (req.mode == FeatureMode::Realized) {
          fs = realized_feature_set(map, env.num_actions, round.realized, t);
        } else {
          auto feat_rng = make_stream(master_seed, trial, t, "features");
          fs = build_feature_set(map, env.num_actions, round.mu, req, feat_rng, t);
        }
        const Decision d = policy.select_action(fs);
        const double y = detail::noisy_reward(env, d.action, round.realized, master_seed, trial, t);
        if (regresses_on_realized(cfg.variant)) {
          policy.observe_exact(map.eval(d.action, round.realized), y);
        } else {
          policy.observe_hidden(y);
        }
        TraceStep step;
        step.t = t;
        step.beta = d.beta;
        step.width = d.width;
        detail::record_outcome(env, round, d.action, y, step, cum);
        cum = step.regret_cum;
        step.logdet = policy.ridge().logdet_ratio();
        if (auto b = policy.theoretical_beta()) step.beta_theory = *b;
        trace.steps.push_back(std::move(step));
        if (trace.theorem) trace.steps.back().bound_rhs = bound_rhs_at(trace, trace.steps.size() - 1, *trace.theorem);
        history.push_back(d.action);
      }
    } else {
      const auto& kspec = std::get<KernelPolicySpec>(spec.config);
      trace.lambda = kspec.config.lambda;
      KernelPolicy policy(kspec.config, make_kernel(kspec.kernel, env), env.num_actions);
      for (std::size_t t = 1; t <= T; ++t) {
        started = true;
        const auto round = detail::setup_round(env, t, history, master_seed, trial);
        auto feat_rng = make_stream(master_seed, trial, t, "features");
        const auto embeddings = policy.round_embeddings(round.mu, feat_rng);
        const KernelDecision d = policy.select_action(embeddings);
        const double y = detail::noisy_reward(env, d.action, round.realized, master_seed, trial, t);
        policy.observe(y);
        TraceStep step;
        step.t = t;
        step.beta = d.beta;
        step.width = d.width;
        detail::record_outcome(env, round, d.action, y, step, cum);
        cum = step.regret_cum;
        step.logdet = policy.state().logdet_scaled();
        if (auto b = policy.theoretical_beta()) step.beta_theory = *b;
        trace.steps.push_back(std::move(step));
        if (trace.theorem) trace.steps.back().bound_rhs = bound_rhs_at(trace, trace.steps.size() - 1, *trace.theorem);
        history.push_back(d.action);
      }
    }
  } catch (const NumericalError& e) {
    if (!started) throw;
    trace.error = e.what();
    trace.numerical_failure = true;
  } catch (const Error& e) {
    if (!started) throw;
    trace.error = e.what();
  }
  return trace;
}

namespace detail {

inline std::string format_real(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace detail

inline constexpr const char* kTraceCsvHeader =
    "trial,t,action,oracle_action,reward,regret_inst,regret_cum,beta,width,bound_rhs";

// One row per step; reals with 17 significant digits.
inline void write_trace_csv(std::ostream& os, const RegretTrace& trace, bool header = true) {
  if (header) os << kTraceCsvHeader << '\n';
  for (const auto& s : trace.steps) {
    os << trace.trial << ',' << s.t << ',' << s.action << ',' << s.oracle_action << ','
       << detail::format_real(s.reward) << ',' << detail::format_real(s.regret_inst) << ','
       << detail::format_real(s.regret_cum) << ',' << detail::format_real(s.beta) << ','
       << detail::format_real(s.width) << ',' << detail::format_real(s.bound_rhs) << '\n';
  }
}

}  // namespace ctxbandit
