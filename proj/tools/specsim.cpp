// Copyright 2026 The specsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// specsim: calibrate, run, sweep, report and replay.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "specsim/calibration.hpp"
#include "specsim/error.hpp"
#include "specsim/experiment.hpp"
#include "specsim/predictor.hpp"
#include "specsim/report.hpp"
#include "specsim/selector.hpp"

namespace {

using namespace specsim;
using nlohmann::json;

std::string resolve_out(const std::string& dir) {
  const char* root = std::getenv("SPECSIM_OUT_ROOT");
  if (!root || !*root || std::filesystem::path(dir).is_absolute()) return dir;
  return (std::filesystem::path(root) / dir).string();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty() || !out.empty()) out.push_back(cur);
  return out;
}

struct Overrides {
  std::string config;
  std::string calibration;
  std::string out;
  std::string mode;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<int> fixed_n;
  std::optional<int> instances;
  std::optional<int> samples;
  std::optional<int> cooldown;
  std::optional<double> scale;
  std::optional<std::int64_t> step_limit;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "experiment config (JSON)");
    app->add_option("--calibration", calibration, "calibration file");
    app->add_option("--out", out, "output directory (relative paths go under $SPECSIM_OUT_ROOT)");
    app->add_option("--mode", mode, "autoregressive | fixed-n[:k] | adaptive | adaptive+realloc");
    app->add_option("--scenario", scenario, "long_tail | uniform | rebalance");
    app->add_option("--seed", seed);
    app->add_option("--fixed-n", fixed_n);
    app->add_option("--instances", instances);
    app->add_option("--samples", samples);
    app->add_option("--cooldown", cooldown);
    app->add_option("--scale", scale, "hardware compute scale");
    app->add_option("--step-limit", step_limit);
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg;
    if (!config.empty()) cfg = load_experiment(config);
    if (seed) {
      cfg.sim.seed = *seed;
      cfg.workload.seed = *seed;
    }
    if (!mode.empty()) apply_axis(cfg, "mode", mode);
    if (fixed_n) cfg.sim.fixed_n = *fixed_n;
    if (instances) cfg.sim.instances = *instances;
    if (samples) cfg.workload.sample_count = *samples;
    if (cooldown) cfg.sim.realloc.cooldown = *cooldown;
    if (scale) cfg.sim.hardware.scale = *scale;
    if (step_limit) cfg.sim.step_limit = *step_limit;
    if (!scenario.empty()) cfg.scenario = scenario;
    if (cfg.scenario == "rebalance" && !instances) cfg.sim.instances = 2;
    if (!out.empty()) cfg.output_dir = out;
    if (!calibration.empty()) cfg.calibration_path = calibration;
    cfg.validate();
    return cfg;
  }
};

Calibration load_cal(const ExperimentConfig& cfg, std::string& hash) {
  if (cfg.calibration_path.empty()) throw ConfigError("no calibration given (use --calibration or run calibrate)");
  const auto text = read_file(cfg.calibration_path);
  hash = hex64(fnv1a64(text));
  return calibration_from_json(text);
}

int cmd_calibrate(const std::string& out, const std::string& config, std::optional<std::uint64_t> seed,
                  std::optional<double> scale, int trees) {
  CalibrationSpec spec;
  if (!config.empty()) {
    const auto cfg = load_experiment(config);
    spec.hardware = cfg.sim.hardware;
    spec.truth = cfg.sim.truth;
    spec.tree = cfg.sim.tree;
    spec.selector = cfg.sim.selector;
  }
  if (seed) spec.seed = *seed;
  if (scale) spec.hardware.scale = *scale;
  spec.acceptance_trees = trees;
  const auto cal = calibrate(spec);
  const auto path = resolve_out(out);
  if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  save_calibration(path, cal);
  std::printf("wrote %s (threshold %d, k_sat %.1f, hash %s)\n", path.c_str(), cal.threshold.threshold, cal.cost.k_sat,
              hex64(fnv1a64(calibration_to_json(cal))).c_str());
  return 0;
}

int cmd_run(const Overrides& ov, const std::string& modes) {
  auto cfg = ov.build();
  std::string hash;
  const auto cal = load_cal(cfg, hash);
  const auto dir = resolve_out(cfg.output_dir);
  std::vector<RunReport> runs;
  if (modes.empty()) {
    runs.push_back(run_experiment(cfg, cal));
    write_run_outputs(dir, runs, cfg, hash);
  } else {
    for (const auto& m : split(modes, ',')) {
      auto c = cfg;
      apply_axis(c, "mode", m);
      runs.push_back(run_experiment(c, cal));
      std::string sub = m;
      for (auto& ch : sub) {
        if (ch == ':' || ch == '+') ch = '_';
      }
      write_run_outputs(dir + "/" + sub, {runs.back()}, c, hash);
    }
    write_run_outputs(dir, runs, cfg, hash);
  }
  for (const auto& r : runs) {
    std::printf("%-18s completion %.3f s  tokens %lld  reallocs %d  migrations %lld\n", to_string(r.mode),
                r.completion_s, static_cast<long long>(r.total_tokens), r.realloc_count,
                static_cast<long long>(r.completed_migrations()));
  }
  return 0;
}

int cmd_sweep(const Overrides& ov, const std::string& axis, const std::string& values, const std::string& rows) {
  auto cfg = ov.build();
  std::string hash;
  const auto cal = load_cal(cfg, hash);
  std::string row_axis;
  std::vector<std::string> row_values;
  if (!rows.empty()) {
    const auto eq = rows.find('=');
    if (eq == std::string::npos) throw ConfigError("--rows expects axis=v1,v2,...");
    row_axis = rows.substr(0, eq);
    row_values = split(rows.substr(eq + 1), ',');
  }
  const auto table = run_sweep(cfg, cal, axis, split(values, ','), row_axis, row_values);
  const auto dir = resolve_out(cfg.output_dir);
  std::filesystem::create_directories(dir);
  write_text(dir + "/sweep.csv", sweep_csv(table, false));
  write_text(dir + "/sweep_normalized.csv", sweep_csv(table, true));
  auto j = sweep_json(table);
  j["calibration_hash"] = hash;
  j["config"] = to_json(cfg);
  write_text(dir + "/sweep.json", j.dump(2) + "\n");
  std::cout << sweep_csv(table, true);
  return 0;
}

int cmd_report(const std::string& dir) {
  const auto path = resolve_out(dir) + "/summary.json";
  const auto j = json::parse(read_file(path));
  std::printf("run           %s\n", path.c_str());
  std::printf("calibration   %s\n", j.value("calibration_hash", std::string("?")).c_str());
  std::printf("%-22s %12s %12s %10s %8s %10s\n", "mode", "completion_s", "tokens/s", "speedup", "reallocs",
              "stall_s");
  for (const auto& [name, s] : j.at("per_mode").items()) {
    std::printf("%-22s %12.3f %12.1f %10.3f %8d %10.6f\n", name.c_str(), s.at("completion_s").get<double>(),
                s.at("throughput").get<double>(), s.at("mean_speedup").get<double>(),
                s.at("realloc_count").get<int>(), s.at("stall_s_total").get<double>());
  }
  return 0;
}

int cmd_replay(const std::string& trace, const std::string& cal_path, int batch, std::int64_t n_seq) {
  std::ifstream in(trace);
  if (!in) throw ConfigError("cannot read trace " + trace);
  const auto tree = read_trace(in);
  const auto cal = calibration_from_json(read_file(cal_path));
  Predictor predictor(cal.acceptance, cal.cost, cal.buckets);
  SelectorConfig sel;
  sel.n_max = std::min<int>(sel.n_max, static_cast<int>(tree.size()));
  sel.n_min = std::min(sel.n_min, sel.n_max);
  const auto ev = select_strategy(tree, BatchContext{batch, n_seq}, predictor, sel);
  std::printf("nodes %zu  depth %d  chosen n %d  al %.4f  t_sd %.6f s  objective %.3f\n", tree.size(), tree.depth(),
              ev.n, ev.predicted_al, ev.predicted_time, ev.objective);
  std::printf("selection");
  for (NodeId id : ev.selection.node_ids) std::printf(" %u", id);
  std::printf("\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speculative decoding cluster simulator"};
  app.require_subcommand(1);

  std::string cal_out = "calibration.json";
  std::string cal_config;
  std::optional<std::uint64_t> cal_seed;
  std::optional<double> cal_scale;
  int cal_trees = 2000;
  auto* calibrate = app.add_subcommand("calibrate", "profile the ground truth and write a calibration file");
  calibrate->add_option("--out", cal_out);
  calibrate->add_option("--config", cal_config, "take hardware, truth, tree and selector settings from a config");
  calibrate->add_option("--seed", cal_seed);
  calibrate->add_option("--scale", cal_scale, "hardware compute scale");
  calibrate->add_option("--trees", cal_trees, "trees profiled for the acceptance fit");

  Overrides run_ov;
  std::string modes;
  auto* run = app.add_subcommand("run", "execute one scenario");
  run_ov.attach(run);
  run->add_option("--modes", modes, "comma-separated modes to run in sequence");

  Overrides sweep_ov;
  std::string axis;
  std::string values;
  std::string rows;
  auto* sweep = app.add_subcommand("sweep", "run a parameter grid and emit a row-normalized table");
  sweep_ov.attach(sweep);
  sweep->add_option("--axis", axis, "column axis")->required();
  sweep->add_option("--values", values, "comma-separated column values")->required();
  sweep->add_option("--rows", rows, "row axis and values, e.g. samples=8,64");

  std::string report_dir;
  auto* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("dir", report_dir)->required();

  std::string trace;
  std::string replay_cal;
  int replay_batch = 1;
  std::int64_t replay_seq = 1024;
  auto* replay = app.add_subcommand("replay", "select a draft budget for a recorded tree");
  replay->add_option("trace", trace)->required();
  replay->add_option("--calibration", replay_cal)->required();
  replay->add_option("--batch", replay_batch);
  replay->add_option("--n-seq", replay_seq);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*calibrate) return cmd_calibrate(cal_out, cal_config, cal_seed, cal_scale, cal_trees);
    if (*run) return cmd_run(run_ov, modes);
    if (*sweep) return cmd_sweep(sweep_ov, axis, values, rows);
    if (*report) return cmd_report(report_dir);
    if (*replay) return cmd_replay(trace, replay_cal, replay_batch, replay_seq);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "specsim: %s\n", e.what());
    return 2;
  }
  return 0;
}
