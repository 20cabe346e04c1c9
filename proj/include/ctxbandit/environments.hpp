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
#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "ctxbandit/context_io.hpp"
#include "ctxbandit/context_model.hpp"
#include "ctxbandit/rng.hpp"
#include "ctxbandit/sim_engine.hpp"

namespace ctxbandit {

inline Eigen::VectorXd standard_normal_vector(Eigen::Index n, Stream& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

struct SyntheticOptions {
  std::size_t num_actions = 100;
  std::size_t context_dim = 5;
  double noise_sd = 0.1;
  // Divide theta and the features by constants so that ||theta|| <= 1 and
  // ||phi|| <= 1; required for the theoretical radii.
  bool normalize = true;
  std::size_t probe_contexts = 10000;
  // Multiplier on the probe maximum; contexts are Gaussian, so the probe
  // maximum alone would be exceeded during long runs.
  double probe_margin = 4.0;
};

// Quadratic benchmark f(x, c) = sum_i (x_i - c_i)^2 with
// phi(x, c) = (x_1^2..x_k^2, c_1^2..c_k^2, x_1 c_1..x_k c_k) and
// theta = (1..1, 1..1, -2..-2). Actions are standard Gaussian vectors drawn per
// trial; each round mu_t = N(m_t, I) with m_t standard Gaussian.
inline Environment synthetic_env(std::uint64_t master_seed, std::size_t trial,
                                 const SyntheticOptions& opt = {}) {
  if (opt.num_actions == 0 || opt.context_dim == 0) {
    throw ValidationError("synthetic environment: sizes must be positive");
  }
  const auto k = static_cast<Eigen::Index>(opt.context_dim);
  auto action_rng = make_stream(master_seed, trial, 0, "actions");
  auto actions = std::make_shared<std::vector<Eigen::VectorXd>>();
  for (std::size_t x = 0; x < opt.num_actions; ++x) actions->push_back(standard_normal_vector(k, action_rng));

  Eigen::VectorXd theta(3 * k);
  theta << Eigen::VectorXd::Ones(k), Eigen::VectorXd::Ones(k), Eigen::VectorXd::Constant(k, -2.0);

  auto raw = [actions, k](ActionId x, const Context& c, Eigen::Ref<Eigen::VectorXd> out) {
    const auto& a = (*actions)[x];
    out.segment(0, k) = a.array().square();
    out.segment(k, k) = c.array().square();
    out.segment(2 * k, k) = a.array() * c.array();
  };

  double feature_scale = 1.0;
  double theta_scale = 1.0;
  if (opt.normalize) {
    theta_scale = theta.norm();
    auto probe_rng = make_stream(master_seed, trial, 0, "probes");
    Eigen::VectorXd phi(3 * k);
    double max_norm = 0.0;
    for (std::size_t p = 0; p < opt.probe_contexts; ++p) {
      // Marginal of c_t: m_t + N(0, I) with m_t ~ N(0, I).
      const Context c = standard_normal_vector(k, probe_rng) + standard_normal_vector(k, probe_rng);
      for (ActionId x = 0; x < opt.num_actions; ++x) {
        raw(x, c, phi);
        max_norm = std::max(max_norm, phi.norm());
      }
    }
    feature_scale = opt.probe_margin * max_norm;
  }
  const double inv_scale = 1.0 / feature_scale;

  auto eval = [raw, inv_scale](ActionId x, const Context& c, Eigen::Ref<Eigen::VectorXd> out) {
    raw(x, c, out);
    out *= inv_scale;
  };
  // E[c^2] = m^2 + s^2, E[x c] = x m.
  auto moments = [actions, k, inv_scale](ActionId x, const Eigen::VectorXd& m, const Eigen::VectorXd& s,
                                         Eigen::Ref<Eigen::VectorXd> out) {
    const auto& a = (*actions)[x];
    out.segment(0, k) = a.array().square();
    out.segment(k, k) = m.array().square() + s.array().square();
    out.segment(2 * k, k) = a.array() * m.array();
    out *= inv_scale;
  };

  Environment env;
  env.name = opt.normalize ? "synthetic" : "synthetic_raw";
  env.num_actions = opt.num_actions;
  env.features = std::make_shared<const FeatureMap>(
      static_cast<std::size_t>(3 * k), eval, moments,
      opt.normalize ? std::optional<double>(1.0) : std::nullopt, "quadratic");
  env.theta = theta / theta_scale;
  env.noise_sd = opt.noise_sd;
  env.feature_scale = feature_scale;
  env.theta_scale = theta_scale;
  env.action_vector = [actions](ActionId x) { return (*actions)[x]; };
  env.distributions = [k](std::size_t, std::span<const ActionId>, Stream& rng) {
    return ContextDistribution::diagonal_gaussian(standard_normal_vector(k, rng),
                                                  Eigen::VectorXd::Ones(k), "N(m_t,I)");
  };
  return env;
}

// Two actions, c ~ Bernoulli(p), f(0, c) = c, f(1, c) = 1 - c. Without seeing
// c_t no policy can track argmax_x f(x, c_t); regret against that comparator
// grows linearly while regret against the expected-reward oracle need not.
inline Environment lower_bound_env(double p = 0.6, double noise_sd = 0.1) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("lower-bound environment: p must lie in [0, 1]");
  Environment env;
  env.name = "lower_bound";
  env.num_actions = 2;
  env.features = std::make_shared<const FeatureMap>(
      1,
      [](ActionId x, const Context& c, Eigen::Ref<Eigen::VectorXd> out) {
        out[0] = x == 0 ? c[0] : 1.0 - c[0];
      },
      FeatureMap::GaussianMomentFn{}, 1.0, "bernoulli_indicator");
  env.theta = Eigen::VectorXd::Ones(1);
  env.noise_sd = noise_sd;
  env.action_vector = [](ActionId x) { return Eigen::VectorXd::Constant(1, static_cast<double>(x)); };
  auto mu = ContextDistribution::empirical({Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1)},
                                           {p, 1.0 - p}, "Bernoulli");
  env.distributions = [mu](std::size_t, std::span<const ActionId>, Stream&) { return mu; };
  return env;
}

// Index drawn with probability proportional to `weights`.
inline std::size_t pick_group(const std::vector<double>& weights, Stream& rng) {
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return pick(rng);
}

struct EmpiricalOptions {
  std::size_t num_actions = 20;
  std::size_t action_dim = 3;
  double noise_sd = 0.1;
};

// Bilinear model phi(x, c) = vec(a_x c^T) / scale over grouped empirical
// contexts: each round picks a group by its frequency and mu_t is that
// group's empirical distribution. Action vectors a_x and a unit-norm theta are
// drawn per trial; scale = max ||a_x|| * max ||c|| makes ||phi|| <= 1 exactly.
inline Environment empirical_env(std::shared_ptr<const io::GroupedContexts> groups,
                                 std::uint64_t master_seed, std::size_t trial,
                                 const EmpiricalOptions& opt = {}) {
  if (!groups || groups->size() == 0) throw ValidationError("empirical environment: no groups");
  if (opt.num_actions == 0 || opt.action_dim == 0) {
    throw ValidationError("empirical environment: sizes must be positive");
  }
  const auto cdim = static_cast<Eigen::Index>(groups->columns.size());
  const auto adim = static_cast<Eigen::Index>(opt.action_dim);

  std::vector<ContextDistribution> dists;
  double max_c = 0.0;
  for (std::size_t g = 0; g < groups->size(); ++g) {
    dists.push_back(groups->tables[g].distribution(groups->keys[g]));
    for (const auto& c : groups->tables[g].points) max_c = std::max(max_c, c.norm());
  }

  auto action_rng = make_stream(master_seed, trial, 0, "actions");
  auto actions = std::make_shared<std::vector<Eigen::VectorXd>>();
  double max_a = 0.0;
  for (std::size_t x = 0; x < opt.num_actions; ++x) {
    actions->push_back(standard_normal_vector(adim, action_rng));
    max_a = std::max(max_a, actions->back().norm());
  }
  auto theta_rng = make_stream(master_seed, trial, 0, "theta");
  Eigen::VectorXd theta = standard_normal_vector(adim * cdim, theta_rng);
  theta /= theta.norm();

  const double scale = max_a * max_c > 0.0 ? max_a * max_c : 1.0;
  Environment env;
  env.name = "empirical";
  env.num_actions = opt.num_actions;
  env.features = std::make_shared<const FeatureMap>(
      static_cast<std::size_t>(adim * cdim),
      [actions, adim, cdim, scale](ActionId x, const Context& c, Eigen::Ref<Eigen::VectorXd> out) {
        const auto& a = (*actions)[x];
        for (Eigen::Index i = 0; i < adim; ++i) out.segment(i * cdim, cdim) = (a[i] / scale) * c;
      },
      FeatureMap::GaussianMomentFn{}, 1.0, "bilinear");
  env.theta = theta;
  env.noise_sd = opt.noise_sd;
  env.feature_scale = scale;
  env.action_vector = [actions](ActionId x) { return (*actions)[x]; };
  env.distributions = [groups, dists = std::move(dists)](std::size_t, std::span<const ActionId>,
                                                         Stream& rng) {
    return dists[pick_group(groups->frequencies, rng)];
  };
  return env;
}

}  // namespace ctxbandit
