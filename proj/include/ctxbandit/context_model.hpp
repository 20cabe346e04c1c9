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
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ctxbandit/errors.hpp"
#include "ctxbandit/rng.hpp"

namespace ctxbandit {

using ActionId = std::size_t;
using Context = Eigen::VectorXd;

// Slack allowed on the unit-norm feature bound before a map is rejected.
inline constexpr double kNormTolerance = 1e-6;

// Deterministic map (action, context) -> R^d.
//
// Feature maps carry a norm bound (default 1). Every evaluation is checked
// against it and a violation raises instead of being clipped, since the
// confidence radii downstream are only valid under the bound. Maps that do not
// satisfy any bound (e.g. the unnormalized quadratic benchmark) are built with
// `std::nullopt`; such maps must not be used for theoretical confidence radii.
class FeatureMap {
 public:
  using EvalFn = std::function<void(ActionId, const Context&, Eigen::Ref<Eigen::VectorXd>)>;
  // Closed-form E_{c ~ N(mean, diag(sd^2))}[phi(x, c)].
  using GaussianMomentFn = std::function<void(ActionId, const Eigen::VectorXd& mean,
                                              const Eigen::VectorXd& sd,
                                              Eigen::Ref<Eigen::VectorXd>)>;

  FeatureMap(std::size_t dimension, EvalFn eval, GaussianMomentFn gaussian_moments = {},
             std::optional<double> norm_bound = 1.0, std::string name = "feature_map")
      : dimension_(dimension),
        eval_(std::move(eval)),
        gaussian_moments_(std::move(gaussian_moments)),
        norm_bound_(norm_bound),
        name_(std::move(name)) {
    if (dimension_ == 0) throw ValidationError("feature map dimension must be positive");
    if (!eval_) throw ValidationError("feature map requires an evaluation function");
    if (norm_bound_ && !(*norm_bound_ > 0.0)) {
      throw ValidationError("feature map norm bound must be positive");
    }
  }

  std::size_t dimension() const { return dimension_; }
  const std::string& name() const { return name_; }
  std::optional<double> norm_bound() const { return norm_bound_; }
  bool has_gaussian_moments() const { return static_cast<bool>(gaussian_moments_); }

  void eval_into(ActionId x, const Context& c, Eigen::Ref<Eigen::VectorXd> out) const {
    eval_(x, c, out);
    check_output(out);
  }

  Eigen::VectorXd eval(ActionId x, const Context& c) const {
    Eigen::VectorXd out(dimension_);
    eval_into(x, c, out);
    return out;
  }

  void gaussian_moments_into(ActionId x, const Eigen::VectorXd& mean, const Eigen::VectorXd& sd,
                             Eigen::Ref<Eigen::VectorXd> out) const {
    if (!gaussian_moments_) {
      throw UnsupportedExpectation("feature map '" + name_ +
                                   "' has no analytic Gaussian moment rule; use sampled features");
    }
    gaussian_moments_(x, mean, sd, out);
    check_output(out);
  }

  // Evaluates every (action, probe) pair; throws ValidationError on a
  // non-finite output or a norm above the bound.
  void validate(std::size_t num_actions, std::span<const Context> probes) const {
    Eigen::VectorXd out(dimension_);
    for (ActionId x = 0; x < num_actions; ++x) {
      for (const auto& c : probes) {
        eval_(x, c, out);
        if (!out.allFinite()) {
          throw ValidationError("feature map '" + name_ + "' produced a non-finite value");
        }
        if (norm_bound_ && out.norm() > *norm_bound_ + kNormTolerance) {
          throw ValidationError("feature map '" + name_ + "' exceeds its norm bound on probe set");
        }
      }
    }
  }

 private:
  void check_output(const Eigen::Ref<const Eigen::VectorXd>& out) const {
    if (!out.allFinite()) {
      throw NumericalError("feature map '" + name_ + "' produced a non-finite value");
    }
    if (norm_bound_) {
      const double limit = *norm_bound_ + kNormTolerance;
      if (out.squaredNorm() > limit * limit) {
        throw NumericalError("feature map '" + name_ + "' output norm " +
                             std::to_string(out.norm()) + " exceeds bound");
      }
    }
  }

  std::size_t dimension_;
  EvalFn eval_;
  GaussianMomentFn gaussian_moments_;
  std::optional<double> norm_bound_;
  std::string name_;
};

struct Dirac {
  Context point;
};

struct DiagonalGaussian {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;
};

struct Empirical {
  std::vector<Context> points;
  std::vector<double> weights;
  std::vector<double> cumulative;
};

// Distribution over R^k contexts. Immutable after construction.
class ContextDistribution {
 public:
  using Variant = std::variant<Dirac, DiagonalGaussian, Empirical>;

  static ContextDistribution dirac(Context point, std::string label = {}) {
    if (point.size() == 0) throw ValidationError("context dimension must be positive");
    if (!point.allFinite()) throw ValidationError("Dirac point must be finite");
    return ContextDistribution(Dirac{std::move(point)}, std::move(label));
  }

  static ContextDistribution diagonal_gaussian(Eigen::VectorXd mean, Eigen::VectorXd stddev,
                                               std::string label = {}) {
    if (mean.size() == 0) throw ValidationError("context dimension must be positive");
    if (mean.size() != stddev.size()) {
      throw ValidationError("Gaussian mean and stddev lengths differ");
    }
    if (!mean.allFinite() || !stddev.allFinite() || (stddev.array() < 0.0).any()) {
      throw ValidationError("Gaussian parameters must be finite with nonnegative stddev");
    }
    return ContextDistribution(DiagonalGaussian{std::move(mean), std::move(stddev)},
                               std::move(label));
  }

  static ContextDistribution empirical(std::vector<Context> points, std::vector<double> weights,
                                       std::string label = {}) {
    if (points.empty()) throw ValidationError("empirical distribution needs at least one point");
    if (points.size() != weights.size()) {
      throw ValidationError("empirical distribution: point and weight counts differ");
    }
    const auto dim = points.front().size();
    if (dim == 0) throw ValidationError("context dimension must be positive");
    std::vector<double> cumulative;
    cumulative.reserve(weights.size());
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (points[i].size() != dim) {
        throw ValidationError("empirical distribution: inconsistent point dimensions");
      }
      if (!points[i].allFinite()) throw ValidationError("empirical point must be finite");
      if (!std::isfinite(weights[i]) || weights[i] < 0.0) {
        throw ValidationError("empirical weights must be finite and nonnegative");
      }
      total += weights[i];
      cumulative.push_back(total);
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw ValidationError("empirical weights sum to " + std::to_string(total) + ", expected 1");
    }
    return ContextDistribution(
        Empirical{std::move(points), std::move(weights), std::move(cumulative)}, std::move(label));
  }

  static ContextDistribution empirical_uniform(std::vector<Context> points,
                                               std::string label = {}) {
    std::vector<double> weights(points.size(), points.empty() ? 0.0 : 1.0 / points.size());
    return empirical(std::move(points), std::move(weights), std::move(label));
  }

  const Variant& variant() const { return variant_; }
  const std::string& label() const { return label_; }

  std::size_t dimension() const {
    return std::visit(
        [](const auto& v) -> std::size_t {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Dirac>) return v.point.size();
          else if constexpr (std::is_same_v<T, DiagonalGaussian>) return v.mean.size();
          else return v.points.front().size();
        },
        variant_);
  }

  Context sample(Stream& rng) const {
    return std::visit(
        [&rng](const auto& v) -> Context {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Dirac>) {
            return v.point;
          } else if constexpr (std::is_same_v<T, DiagonalGaussian>) {
            std::normal_distribution<double> normal(0.0, 1.0);
            Context c(v.mean.size());
            for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = v.mean[i] + v.stddev[i] * normal(rng);
            return c;
          } else {
            std::uniform_real_distribution<double> uniform(0.0, v.cumulative.back());
            const double u = uniform(rng);
            auto it = std::upper_bound(v.cumulative.begin(), v.cumulative.end(), u);
            auto idx = static_cast<std::size_t>(it - v.cumulative.begin());
            if (idx >= v.points.size()) {
              // u rounded onto the last cumulative value: take the last positive-weight atom.
              idx = v.points.size() - 1;
              while (idx > 0 && v.weights[idx] == 0.0) --idx;
            }
            return v.points[idx];
          }
        },
        variant_);
  }

 private:
  ContextDistribution(Variant v, std::string label) : variant_(std::move(v)), label_(std::move(label)) {}

  Variant variant_;
  std::string label_;
};

enum class FeatureMode { Expected, Sampled, Realized };

inline const char* to_string(FeatureMode m) {
  switch (m) {
    case FeatureMode::Expected: return "expected";
    case FeatureMode::Sampled: return "sampled";
    case FeatureMode::Realized: return "realized";
  }
  return "?";
}

struct FeatureRequest {
  FeatureMode mode = FeatureMode::Expected;
  std::size_t samples = 0;

  static FeatureRequest expected() { return {FeatureMode::Expected, 0}; }
  static FeatureRequest sampled(std::size_t L) { return {FeatureMode::Sampled, L}; }
};

using SampleBatch = std::vector<Context>;

// One feature column per action, in action order.
struct FeatureSet {
  FeatureMode mode = FeatureMode::Expected;
  std::size_t round = 0;
  std::size_t samples = 0;
  Eigen::MatrixXd features;  // d x |X|
  std::shared_ptr<const SampleBatch> batch;  // the shared draw, sampled mode only

  std::size_t num_actions() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t dimension() const { return static_cast<std::size_t>(features.rows()); }
  auto feature(ActionId x) const { return features.col(static_cast<Eigen::Index>(x)); }
};

inline void expected_feature_into(const FeatureMap& map, ActionId x, const ContextDistribution& mu,
                                  Eigen::Ref<Eigen::VectorXd> out) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Dirac>) {
          map.eval_into(x, v.point, out);
        } else if constexpr (std::is_same_v<T, DiagonalGaussian>) {
          map.gaussian_moments_into(x, v.mean, v.stddev, out);
        } else {
          Eigen::VectorXd phi(map.dimension());
          out.setZero();
          for (std::size_t i = 0; i < v.points.size(); ++i) {
            if (v.weights[i] == 0.0) continue;
            map.eval_into(x, v.points[i], phi);
            out += v.weights[i] * phi;
          }
        }
      },
      mu.variant());
}

// E_{c ~ mu}[phi(x, c)]. Throws UnsupportedExpectation for Gaussian contexts
// under maps without a moment rule.
inline Eigen::VectorXd expected_feature(const FeatureMap& map, ActionId x,
                                        const ContextDistribution& mu) {
  Eigen::VectorXd out(map.dimension());
  expected_feature_into(map, x, mu, out);
  return out;
}

inline SampleBatch sample_contexts(const ContextDistribution& mu, std::size_t L, Stream& rng) {
  if (L == 0) throw ValidationError("sample count L must be at least 1");
  SampleBatch batch;
  batch.reserve(L);
  for (std::size_t i = 0; i < L; ++i) batch.push_back(mu.sample(rng));
  return batch;
}

// Running mean, so that averaging identical samples reproduces the sample
// exactly.
inline void sampled_feature_into(const FeatureMap& map, ActionId x, std::span<const Context> samples,
                                 Eigen::Ref<Eigen::VectorXd> out, Eigen::VectorXd& scratch) {
  if (samples.empty()) throw ValidationError("sampled feature needs at least one context sample");
  scratch.resize(static_cast<Eigen::Index>(map.dimension()));
  map.eval_into(x, samples[0], out);
  for (std::size_t l = 1; l < samples.size(); ++l) {
    map.eval_into(x, samples[l], scratch);
    out += (scratch - out) / static_cast<double>(l + 1);
  }
}

inline Eigen::VectorXd sampled_feature(const FeatureMap& map, ActionId x,
                                       std::span<const Context> samples) {
  Eigen::VectorXd out(map.dimension());
  Eigen::VectorXd scratch;
  sampled_feature_into(map, x, samples, out, scratch);
  return out;
}

// Builds the per-round feature set. In sampled mode one batch of L contexts is
// drawn and reused for every action.
inline FeatureSet build_feature_set(const FeatureMap& map, std::size_t num_actions,
                                    const ContextDistribution& mu, FeatureRequest request,
                                    Stream& rng, std::size_t round = 0) {
  if (num_actions == 0) throw ValidationError("feature set needs at least one action");
  FeatureSet fs;
  fs.mode = request.mode;
  fs.round = round;
  fs.features.resize(static_cast<Eigen::Index>(map.dimension()),
                     static_cast<Eigen::Index>(num_actions));
  switch (request.mode) {
    case FeatureMode::Expected:
      for (ActionId x = 0; x < num_actions; ++x) {
        expected_feature_into(map, x, mu, fs.features.col(static_cast<Eigen::Index>(x)));
      }
      break;
    case FeatureMode::Sampled: {
      fs.samples = request.samples;
      auto batch = std::make_shared<const SampleBatch>(sample_contexts(mu, request.samples, rng));
      Eigen::VectorXd scratch;
      for (ActionId x = 0; x < num_actions; ++x) {
        sampled_feature_into(map, x, *batch, fs.features.col(static_cast<Eigen::Index>(x)), scratch);
      }
      fs.batch = std::move(batch);
      break;
    }
    case FeatureMode::Realized:
      throw ValidationError("realized feature sets are built from a context, not a distribution");
  }
  return fs;
}

// phi(x, c) for every action at a known context.
inline FeatureSet realized_feature_set(const FeatureMap& map, std::size_t num_actions,
                                       const Context& c, std::size_t round = 0) {
  if (num_actions == 0) throw ValidationError("feature set needs at least one action");
  FeatureSet fs;
  fs.mode = FeatureMode::Realized;
  fs.round = round;
  fs.features.resize(static_cast<Eigen::Index>(map.dimension()),
                     static_cast<Eigen::Index>(num_actions));
  for (ActionId x = 0; x < num_actions; ++x) {
    map.eval_into(x, c, fs.features.col(static_cast<Eigen::Index>(x)));
  }
  return fs;
}

}  // namespace ctxbandit
