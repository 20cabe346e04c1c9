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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "ctxbandit/context_io.hpp"
#include "ctxbandit/environments.hpp"
#include "ctxbandit/errors.hpp"
#include "ctxbandit/parallel.hpp"
#include "ctxbandit/sim_engine.hpp"

// Experiment harness behind the `ctxbandit` command line tool: YAML experiment
// configs, trial sweeps and CSV artifacts.

namespace ctxbandit::bench {

enum class EnvironmentKind { Synthetic, Empirical, LowerBound };

struct EnvironmentSpec {
  EnvironmentKind kind = EnvironmentKind::Synthetic;
  SyntheticOptions synthetic;
  EmpiricalOptions empirical;
  std::filesystem::path groups_dir;
  std::optional<std::filesystem::path> frequencies;
  std::shared_ptr<const io::GroupedContexts> groups;
  double bernoulli_p = 0.6;
  double noise_sd = 0.1;
};

struct ExperimentConfig {
  std::filesystem::path source;
  std::size_t horizon = 1000;
  std::size_t trials = 100;
  double delta = 0.1;
  std::uint64_t seed = 0;
  std::filesystem::path output = "results";
  EnvironmentSpec environment;
  std::vector<PolicySpec> policies;
};

namespace detail {

[[noreturn]] inline void fail(const std::filesystem::path& file, const YAML::Node& node,
                              const std::string& msg) {
  const auto mark = node.Mark();
  const auto line = mark.line >= 0 ? std::to_string(mark.line + 1) : std::string("?");
  throw ValidationError(file.string() + ":" + line + ": " + msg);
}

template <class T>
T scalar(const std::filesystem::path& file, const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) fail(file, node, "'" + key + "' must be a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    fail(file, node, "'" + key + "' has an invalid value '" + node.Scalar() + "'");
  }
}

inline void check_keys(const std::filesystem::path& file, const YAML::Node& map,
                       const std::set<std::string>& allowed, const std::string& section) {
  if (!map.IsMap()) fail(file, map, "section '" + section + "' must be a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(file, kv.first, "unknown key '" + key + "' in section '" + section + "'");
  }
}

inline SampleSchedule parse_samples(const std::filesystem::path& file, const YAML::Node& node) {
  if (node.IsScalar() && node.Scalar() == "t") return SampleSchedule::per_round();
  const auto L = scalar<long long>(file, node, "samples");
  if (L < 1) fail(file, node, "'samples' must be at least 1 or 't'");
  return SampleSchedule::fixed(static_cast<std::size_t>(L));
}

inline Variant parse_variant(const std::filesystem::path& file, const YAML::Node& node) {
  const auto name = scalar<std::string>(file, node, "variant");
  for (Variant v : {Variant::HiddenExpected, Variant::HiddenSampled, Variant::ObservedExpected,
                    Variant::ObservedSampled, Variant::ExactBaseline}) {
    if (name == to_string(v)) return v;
  }
  fail(file, node,
       "unknown variant '" + name +
           "' (hidden_expected, hidden_sampled, observed_expected, observed_sampled, exact)");
}

inline PolicySpec parse_policy(const std::filesystem::path& file, const YAML::Node& node,
                               double delta, double noise_sd) {
  check_keys(file, node, {"name", "variant", "beta", "lambda", "samples", "kernel", "S", "resync"}, "policies");
  if (!node["name"]) fail(file, node, "policy is missing 'name'");
  if (!node["variant"]) fail(file, node, "policy is missing 'variant'");
  PolicySpec spec;
  spec.name = scalar<std::string>(file, node["name"], "name");
  if (spec.name.empty() || spec.name.find_first_of("/\\,") != std::string::npos) {
    fail(file, node["name"], "policy name must be nonempty and contain no '/', '\\' or ','");
  }
  const Variant variant = parse_variant(file, node["variant"]);
  const double lambda = node["lambda"] ? scalar<double>(file, node["lambda"], "lambda") : 1.0;
  if (!(lambda > 0.0)) fail(file, node["lambda"], "'lambda' must be positive");
  const double S = node["S"] ? scalar<double>(file, node["S"], "S") : 1.0;
  if (!(S > 0.0)) fail(file, node["S"], "'S' must be positive");

  BetaMode beta = TunedBeta{1.0};
  if (node["beta"]) {
    if (node["beta"].IsScalar() && node["beta"].Scalar() == "theoretical") {
      beta = TheoreticalBeta{noise_sd, delta, S};
    } else {
      const double b = scalar<double>(file, node["beta"], "beta");
      if (!(b >= 0.0)) fail(file, node["beta"], "'beta' must be nonnegative or 'theoretical'");
      beta = TunedBeta{b};
    }
  }
  SampleSchedule samples = SampleSchedule::per_round();
  if (node["samples"]) {
    samples = parse_samples(file, node["samples"]);
    if (!uses_sampled_features(variant)) fail(file, node["samples"], "'samples' needs a sampled variant");
  }

  if (node["kernel"]) {
    if (variant != Variant::HiddenExpected && variant != Variant::HiddenSampled) {
      fail(file, node["variant"], "kernelized policies support hidden_expected or hidden_sampled");
    }
    KernelPolicySpec k;
    k.kernel = scalar<std::string>(file, node["kernel"], "kernel");
    if (k.kernel != "linear" && k.kernel.rfind("rbf(", 0) != 0) {
      fail(file, node["kernel"], "unknown kernel '" + k.kernel + "' (linear or rbf(<lengthscale>))");
    }
    k.config.mode = variant == Variant::HiddenSampled ? FeatureMode::Sampled : FeatureMode::Expected;
    k.config.samples = samples;
    k.config.beta = beta;
    k.config.lambda = lambda;
    spec.config = k;
  } else {
    PolicyConfig c;
    c.variant = variant;
    c.samples = samples;
    c.beta = beta;
    c.lambda = lambda;
    if (node["resync"]) {
      const auto r = scalar<long long>(file, node["resync"], "resync");
      if (r < 1) fail(file, node["resync"], "'resync' must be positive");
      c.resync_period = static_cast<std::size_t>(r);
    }
    spec.config = c;
  }
  return spec;
}

}  // namespace detail

// Parses and validates an experiment config. Errors carry file:line.
inline ExperimentConfig load_config(const std::filesystem::path& path) {
  using detail::fail;
  using detail::scalar;
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw ValidationError(path.string() + ": cannot open config");
  } catch (const YAML::ParserException& e) {
    throw ValidationError(path.string() + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ValidationError(path.string() + ":1: config must be a mapping");
  detail::check_keys(path, root, {"experiment", "environment", "policies"}, "<root>");

  ExperimentConfig cfg;
  cfg.source = path;
  const auto base = path.parent_path();

  const auto exp = root["experiment"];
  if (!exp) throw ValidationError(path.string() + ":1: missing section 'experiment'");
  detail::check_keys(path, exp, {"horizon", "trials", "delta", "seed", "output"}, "experiment");
  if (exp["horizon"]) {
    const auto T = scalar<long long>(path, exp["horizon"], "horizon");
    if (T < 1) fail(path, exp["horizon"], "'horizon' must be at least 1");
    cfg.horizon = static_cast<std::size_t>(T);
  }
  if (exp["trials"]) {
    const auto n = scalar<long long>(path, exp["trials"], "trials");
    if (n < 1) fail(path, exp["trials"], "'trials' must be at least 1");
    cfg.trials = static_cast<std::size_t>(n);
  }
  if (exp["delta"]) {
    cfg.delta = scalar<double>(path, exp["delta"], "delta");
    if (!(cfg.delta > 0.0 && cfg.delta < 1.0)) fail(path, exp["delta"], "'delta' must lie in (0, 1)");
  }
  if (exp["seed"]) cfg.seed = scalar<std::uint64_t>(path, exp["seed"], "seed");
  if (exp["output"]) cfg.output = base / scalar<std::string>(path, exp["output"], "output");

  const auto env = root["environment"];
  if (!env) throw ValidationError(path.string() + ":1: missing section 'environment'");
  detail::check_keys(path, env,
                     {"kind", "actions", "noise_sd", "normalize", "groups", "frequencies", "action_dim", "p",
                      "context_dim"},
                     "environment");
  auto& es = cfg.environment;
  const auto kind = env["kind"] ? scalar<std::string>(path, env["kind"], "kind") : std::string("synthetic");
  if (env["noise_sd"]) {
    es.noise_sd = scalar<double>(path, env["noise_sd"], "noise_sd");
    if (!(es.noise_sd >= 0.0) || !std::isfinite(es.noise_sd)) {
      fail(path, env["noise_sd"], "'noise_sd' must be finite and nonnegative");
    }
  }
  std::optional<std::size_t> actions;
  if (env["actions"]) {
    const auto n = scalar<long long>(path, env["actions"], "actions");
    if (n < 1) fail(path, env["actions"], "'actions' must be at least 1");
    actions = static_cast<std::size_t>(n);
  }
  if (kind == "synthetic") {
    es.kind = EnvironmentKind::Synthetic;
    es.synthetic.noise_sd = es.noise_sd;
    if (actions) es.synthetic.num_actions = *actions;
    if (env["normalize"]) es.synthetic.normalize = scalar<bool>(path, env["normalize"], "normalize");
    if (env["context_dim"]) {
      const auto k = scalar<long long>(path, env["context_dim"], "context_dim");
      if (k < 1) fail(path, env["context_dim"], "'context_dim' must be at least 1");
      es.synthetic.context_dim = static_cast<std::size_t>(k);
    }
  } else if (kind == "empirical") {
    es.kind = EnvironmentKind::Empirical;
    es.empirical.noise_sd = es.noise_sd;
    if (actions) es.empirical.num_actions = *actions;
    if (env["action_dim"]) {
      const auto k = scalar<long long>(path, env["action_dim"], "action_dim");
      if (k < 1) fail(path, env["action_dim"], "'action_dim' must be at least 1");
      es.empirical.action_dim = static_cast<std::size_t>(k);
    }
    if (!env["groups"]) fail(path, env, "empirical environment needs 'groups'");
    es.groups_dir = base / scalar<std::string>(path, env["groups"], "groups");
    if (env["frequencies"]) es.frequencies = base / scalar<std::string>(path, env["frequencies"], "frequencies");
    try {
      es.groups = std::make_shared<const io::GroupedContexts>(io::load_group_directory(es.groups_dir, es.frequencies));
    } catch (const ValidationError& e) {
      fail(path, env["groups"], e.what());
    }
  } else if (kind == "lower_bound") {
    es.kind = EnvironmentKind::LowerBound;
    if (env["p"]) {
      es.bernoulli_p = scalar<double>(path, env["p"], "p");
      if (!(es.bernoulli_p >= 0.0 && es.bernoulli_p <= 1.0)) fail(path, env["p"], "'p' must lie in [0, 1]");
    }
  } else {
    fail(path, env["kind"], "unknown environment kind '" + kind + "' (synthetic, empirical, lower_bound)");
  }

  const auto pols = root["policies"];
  if (!pols || !pols.IsSequence() || pols.size() == 0) {
    throw ValidationError(path.string() + ":" + std::to_string((pols ? pols.Mark().line : 0) + 1) +
                          ": 'policies' must be a nonempty list");
  }
  std::set<std::string> names;
  for (const auto& p : pols) {
    auto spec = detail::parse_policy(path, p, cfg.delta, es.noise_sd);
    if (!names.insert(spec.name).second) fail(path, p["name"], "duplicate policy name '" + spec.name + "'");
    if (const auto* lin = std::get_if<PolicyConfig>(&spec.config)) {
      if (lin->theoretical() && es.kind == EnvironmentKind::Synthetic && !es.synthetic.normalize) {
        fail(path, p["beta"], "theoretical beta needs a normalized environment");
      }
    }
    cfg.policies.push_back(std::move(spec));
  }
  return cfg;
}

inline EnvironmentFactory make_factory(const EnvironmentSpec& spec) {
  switch (spec.kind) {
    case EnvironmentKind::Synthetic:
      return [opt = spec.synthetic](std::uint64_t seed, std::size_t trial) { return synthetic_env(seed, trial, opt); };
    case EnvironmentKind::Empirical:
      return [groups = spec.groups, opt = spec.empirical](std::uint64_t seed, std::size_t trial) {
        return empirical_env(groups, seed, trial, opt);
      };
    case EnvironmentKind::LowerBound:
      return [p = spec.bernoulli_p, sd = spec.noise_sd](std::uint64_t, std::size_t) { return lower_bound_env(p, sd); };
  }
  throw ValidationError("unknown environment kind");
}

// All trials of one policy; index order regardless of scheduling.
inline std::vector<RegretTrace> run_trials(const EnvironmentFactory& factory, const PolicySpec& policy,
                                           std::size_t horizon, std::size_t trials, std::uint64_t seed,
                                           std::size_t threads = 0) {
  return parallel_map(
      trials,
      [&](std::size_t trial) { return run_episode(factory(seed, trial), policy, horizon, seed, trial); },
      threads);
}

struct MeanStderr {
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stderr_ = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
  MeanStderr out;
  out.n = xs.size();
  if (xs.empty()) return out;
  double s = 0.0;
  for (double x : xs) s += x;
  out.mean = s / static_cast<double>(xs.size());
  if (xs.size() < 2) {
    out.stderr_ = 0.0;
    return out;
  }
  double ss = 0.0;
  for (double x : xs) ss += (x - out.mean) * (x - out.mean);
  out.stderr_ = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
  return out;
}

// Cumulative regret at step t (1-based) over completed trials.
inline MeanStderr regret_at(const std::vector<RegretTrace>& traces, std::size_t t) {
  std::vector<double> xs;
  for (const auto& tr : traces)
    if (tr.complete() && tr.steps.size() >= t) xs.push_back(tr.steps[t - 1].regret_cum);
  return mean_stderr(xs);
}

inline std::vector<std::size_t> checkpoints(std::size_t horizon) {
  std::vector<std::size_t> cps;
  for (std::size_t c : {horizon / 4, horizon / 2, horizon}) {
    c = std::max<std::size_t>(c, 1);
    if (cps.empty() || cps.back() != c) cps.push_back(c);
  }
  return cps;
}

struct BoundCoverage {
  Theorem theorem = Theorem::T1Expected;
  std::size_t trials = 0;
  std::size_t covered = 0;
  double coverage() const { return trials ? static_cast<double>(covered) / static_cast<double>(trials) : 0.0; }
};

inline std::optional<BoundCoverage> bound_coverage(const std::vector<RegretTrace>& traces) {
  std::optional<BoundCoverage> out;
  for (const auto& tr : traces) {
    if (!tr.theorem || !tr.complete() || tr.steps.empty()) continue;
    if (!out) out = BoundCoverage{*tr.theorem};
    ++out->trials;
    if (tr.final_regret() <= bound_rhs(tr, *tr.theorem)) ++out->covered;
  }
  return out;
}

struct RunOptions {
  std::optional<std::filesystem::path> out;  // overrides the config's output directory
  bool quiet = false;
  bool write_traces = true;
  std::size_t threads = 0;
};

struct PolicyOutcome {
  std::string policy;
  std::vector<RegretTrace> traces;
  std::size_t aborted = 0;
  bool numerical_failure = false;
};

struct RunResult {
  std::vector<PolicyOutcome> policies;
  std::size_t aborted = 0;
  bool numerical_failure = false;
};

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw ValidationError(p.string() + ": cannot open for writing");
  return os;
}

}  // namespace detail

// Runs every policy for every trial; writes traces/<policy>__trial<k>.csv,
// summary.csv and bounds.csv. Aborted episodes are reported but do not stop
// the sweep.
inline RunResult cmd_run(const ExperimentConfig& cfg, const RunOptions& opt = {},
                         std::ostream& log = std::cout) {
  namespace fs = std::filesystem;
  const fs::path out = opt.out.value_or(cfg.output);
  fs::create_directories(out);
  if (opt.write_traces) fs::create_directories(out / "traces");
  const auto factory = make_factory(cfg.environment);

  RunResult result;
  for (const auto& policy : cfg.policies) {
    PolicyOutcome po;
    po.policy = policy.name;
    po.traces = run_trials(factory, policy, cfg.horizon, cfg.trials, cfg.seed, opt.threads);
    for (const auto& tr : po.traces) {
      if (!tr.complete()) {
        ++po.aborted;
        po.numerical_failure = po.numerical_failure || tr.numerical_failure;
        if (!opt.quiet) log << "policy " << policy.name << " trial " << tr.trial << " aborted: " << *tr.error << '\n';
      }
      if (opt.write_traces) {
        auto os = detail::open_out(out / "traces" / (policy.name + "__trial" + std::to_string(tr.trial) + ".csv"));
        write_trace_csv(os, tr);
      }
    }
    if (!opt.quiet) {
      const auto r = regret_at(po.traces, cfg.horizon);
      log << "policy " << policy.name << ": R_T mean " << ctxbandit::detail::format_real(r.mean) << " stderr "
          << ctxbandit::detail::format_real(r.stderr_) << " over " << r.n << " trials\n";
    }
    result.aborted += po.aborted;
    result.numerical_failure = result.numerical_failure || po.numerical_failure;
    result.policies.push_back(std::move(po));
  }

  using ctxbandit::detail::format_real;
  auto summary = detail::open_out(out / "summary.csv");
  summary << "policy,checkpoint,trials,mean_regret,stderr_regret\n";
  for (const auto& po : result.policies) {
    for (std::size_t c : checkpoints(cfg.horizon)) {
      const auto r = regret_at(po.traces, c);
      summary << po.policy << ',' << c << ',' << r.n << ',' << format_real(r.mean) << ',' << format_real(r.stderr_)
              << '\n';
    }
  }
  auto bounds = detail::open_out(out / "bounds.csv");
  bounds << "policy,theorem,trials,covered,coverage,target\n";
  for (const auto& po : result.policies) {
    if (auto cov = bound_coverage(po.traces)) {
      bounds << po.policy << ',' << to_string(cov->theorem) << ',' << cov->trials << ',' << cov->covered << ','
             << format_real(cov->coverage()) << ',' << format_real(1.0 - cfg.delta) << '\n';
      if (!opt.quiet) {
        log << "policy " << po.policy << ": " << to_string(cov->theorem) << " bound holds in " << cov->covered << "/"
            << cov->trials << " trials\n";
      }
    }
  }
  return result;
}

enum class SweepParam { Beta, Samples };

struct SweepRow {
  std::string policy;
  double value = 0.0;
  MeanStderr regret;
  bool selected = false;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::size_t aborted = 0;
  bool numerical_failure = false;
};

// Returns `spec` with the swept parameter overridden, or nullopt when the
// parameter does not apply to the policy (sample sizes of expected-feature
// policies).
inline std::optional<PolicySpec> override_param(const PolicySpec& spec, SweepParam param, double value) {
  PolicySpec out = spec;
  auto apply = [&](BetaMode& beta, SampleSchedule& samples, bool sampled) -> bool {
    if (param == SweepParam::Beta) {
      beta = TunedBeta{value};
      return true;
    }
    if (!sampled) return false;
    samples = SampleSchedule::fixed(static_cast<std::size_t>(value));
    return true;
  };
  bool ok = false;
  if (auto* lin = std::get_if<PolicyConfig>(&out.config)) {
    ok = apply(lin->beta, lin->samples, uses_sampled_features(lin->variant));
  } else {
    auto& k = std::get<KernelPolicySpec>(out.config);
    ok = apply(k.config.beta, k.config.samples, k.config.mode == FeatureMode::Sampled);
  }
  if (!ok) return std::nullopt;
  return out;
}

// Cross product of policies and values; writes sweep.csv with the mean R_T of
// each (policy, value) and marks the value minimizing it per policy.
inline SweepResult cmd_sweep(const ExperimentConfig& cfg, SweepParam param, const std::vector<double>& values,
                             const RunOptions& opt = {}, std::ostream& log = std::cout) {
  namespace fs = std::filesystem;
  if (values.empty()) throw ValidationError("sweep: empty value list");
  for (double v : values) {
    if (param == SweepParam::Beta && !(v >= 0.0)) throw ValidationError("sweep: beta values must be nonnegative");
    if (param == SweepParam::Samples && (!(v >= 1.0) || v != std::floor(v))) {
      throw ValidationError("sweep: sample sizes must be positive integers");
    }
  }
  const fs::path out = opt.out.value_or(cfg.output);
  fs::create_directories(out);
  const auto factory = make_factory(cfg.environment);

  SweepResult result;
  for (const auto& policy : cfg.policies) {
    std::vector<SweepRow> rows;
    for (double v : values) {
      auto spec = override_param(policy, param, v);
      if (!spec) continue;
      const auto traces = run_trials(factory, *spec, cfg.horizon, cfg.trials, cfg.seed, opt.threads);
      for (const auto& tr : traces) {
        if (tr.complete()) continue;
        ++result.aborted;
        result.numerical_failure = result.numerical_failure || tr.numerical_failure;
      }
      rows.push_back({policy.name, v, regret_at(traces, cfg.horizon), false});
    }
    if (rows.empty()) {
      if (!opt.quiet) log << "policy " << policy.name << ": parameter does not apply, skipped\n";
      continue;
    }
    auto best = std::min_element(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
      if (std::isnan(b.regret.mean)) return !std::isnan(a.regret.mean);
      if (std::isnan(a.regret.mean)) return false;
      return a.regret.mean < b.regret.mean;
    });
    best->selected = true;
    if (!opt.quiet) {
      log << "policy " << policy.name << ": selected " << (param == SweepParam::Beta ? "beta" : "samples") << " = "
          << ctxbandit::detail::format_real(best->value) << " (mean R_T "
          << ctxbandit::detail::format_real(best->regret.mean) << ")\n";
    }
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  }
  if (result.rows.empty()) throw ValidationError("sweep: parameter applies to no configured policy");

  using ctxbandit::detail::format_real;
  auto os = detail::open_out(out / "sweep.csv");
  os << "policy,param,value,trials,mean_regret,stderr_regret,selected\n";
  for (const auto& r : result.rows) {
    os << r.policy << ',' << (param == SweepParam::Beta ? "beta" : "samples") << ',' << format_real(r.value) << ','
       << r.regret.n << ',' << format_real(r.regret.mean) << ',' << format_real(r.regret.stderr_) << ','
       << (r.selected ? 1 : 0) << '\n';
  }
  return result;
}

struct GroupReport {
  std::string key;
  std::size_t rows = 0;
  double frequency = 0.0;
  Eigen::VectorXd mean;
};

struct IngestReport {
  std::shared_ptr<const io::GroupedContexts> groups;
  std::vector<GroupReport> reports;
};

// Loads and validates a directory of group CSVs; reports per-group weighted means.
inline IngestReport cmd_ingest(const std::filesystem::path& dir,
                               const std::optional<std::filesystem::path>& frequencies = {}) {
  IngestReport rep;
  rep.groups = std::make_shared<const io::GroupedContexts>(io::load_group_directory(dir, frequencies));
  for (std::size_t g = 0; g < rep.groups->size(); ++g) {
    const auto& table = rep.groups->tables[g];
    GroupReport gr;
    gr.key = rep.groups->keys[g];
    gr.rows = table.points.size();
    gr.frequency = rep.groups->frequencies[g];
    gr.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(table.columns.size()));
    for (std::size_t i = 0; i < table.points.size(); ++i) gr.mean += table.weights[i] * table.points[i];
    rep.reports.push_back(std::move(gr));
  }
  return rep;
}

inline void write_ingest_report(std::ostream& os, const IngestReport& rep, const std::filesystem::path& dir) {
  using ctxbandit::detail::format_real;
  os << "group,rows,frequency";
  for (const auto& c : rep.groups->columns) os << ",mean_" << c;
  os << '\n';
  for (const auto& g : rep.reports) {
    os << g.key << ',' << g.rows << ',' << format_real(g.frequency);
    for (Eigen::Index i = 0; i < g.mean.size(); ++i) os << ',' << format_real(g.mean[i]);
    os << '\n';
  }
  os << "# environment section:\n"
     << "# environment:\n"
     << "#   kind: empirical\n"
     << "#   groups: " << dir.string() << '\n';
}

}  // namespace ctxbandit::bench
