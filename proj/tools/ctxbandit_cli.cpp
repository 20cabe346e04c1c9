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

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctxbandit/bench.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment YAML")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", c.out, "output directory (overrides experiment.output)");
  cmd->add_option("--seed", c.seed, "master seed (overrides experiment.seed)");
  cmd->add_option("--trials", c.trials, "number of trials (overrides experiment.trials)")->check(CLI::PositiveNumber);
  cmd->add_flag("--quiet", c.quiet, "suppress progress output");
}

ctxbandit::bench::ExperimentConfig load(const Common& c, ctxbandit::bench::RunOptions& opt) {
  auto cfg = ctxbandit::bench::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.trials) cfg.trials = *c.trials;
  if (!c.out.empty()) opt.out = c.out;
  opt.quiet = c.quiet;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contextual bandits with context distributions: experiment runner"};
  app.require_subcommand(1);

  Common run_args;
  auto* run = app.add_subcommand("run", "run every configured policy and write traces, summary.csv and bounds.csv");
  add_common(run, run_args);

  Common sweep_args;
  std::string param;
  std::vector<double> values;
  auto* sweep = app.add_subcommand("sweep", "sweep beta or the sample size and write sweep.csv");
  add_common(sweep, sweep_args);
  sweep->add_option("--param", param, "beta or L")->required()->check(CLI::IsMember({"beta", "L"}));
  sweep->add_option("--values", values, "values to try")->required();

  std::string ingest_dir;
  std::string ingest_freq;
  auto* ingest = app.add_subcommand("ingest", "validate a directory of per-group context CSVs");
  ingest->add_option("dir", ingest_dir, "directory of <group>.csv files")->required();
  ingest->add_option("--frequencies", ingest_freq, "CSV with header group,weight");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run) {
      ctxbandit::bench::RunOptions opt;
      const auto cfg = load(run_args, opt);
      const auto res = ctxbandit::bench::cmd_run(cfg, opt);
      if (res.aborted > 0) {
        std::cerr << "error: " << res.aborted << " episode(s) aborted\n";
        return kExitNumerical;
      }
    } else if (*sweep) {
      ctxbandit::bench::RunOptions opt;
      const auto cfg = load(sweep_args, opt);
      const auto p = param == "beta" ? ctxbandit::bench::SweepParam::Beta : ctxbandit::bench::SweepParam::Samples;
      const auto res = ctxbandit::bench::cmd_sweep(cfg, p, values, opt);
      if (res.aborted > 0) {
        std::cerr << "error: " << res.aborted << " episode(s) aborted\n";
        return kExitNumerical;
      }
    } else if (*ingest) {
      std::optional<std::filesystem::path> freq;
      if (!ingest_freq.empty()) freq = ingest_freq;
      const auto rep = ctxbandit::bench::cmd_ingest(ingest_dir, freq);
      ctxbandit::bench::write_ingest_report(std::cout, rep, ingest_dir);
    }
  } catch (const ctxbandit::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ctxbandit::UnsupportedExpectation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
