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

#include "specsim/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "specsim/error.hpp"

namespace specsim {

using nlohmann::json;

namespace {

void check_keys(const json& o, const char* where, std::initializer_list<const char*> allowed) {
  if (!o.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [k, v] : o.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return k == a; });
    if (!ok) throw ConfigError("unknown config key " + std::string(where) + "." + k);
  }
}

template <class T>
void get(const json& o, const char* key, T& out) {
  if (o.contains(key)) out = o.at(key).get<T>();
}

int parse_int(const std::string& s, const std::string& axis) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("axis " + axis + " expects an integer, got '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("axis " + axis + " expects an integer, got '" + s + "'");
  return v;
}

double parse_real(const std::string& s, const std::string& axis) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("axis " + axis + " expects a number, got '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("axis " + axis + " expects a number, got '" + s + "'");
  return v;
}

}  // namespace

void ExperimentConfig::validate() const {
  sim.validate();
  workload.validate();
  if (scenario != "long_tail" && scenario != "uniform" && scenario != "rebalance") {
    throw ConfigError("unknown scenario '" + scenario + "'");
  }
  if (scenario == "rebalance" && sim.instances != 2) throw ConfigError("the rebalance scenario uses two instances");
  if (uniform_output_len < 1 || uniform_prompt_len < 1) throw ConfigError("uniform lengths must be >= 1");
}

json to_json(const ExperimentConfig& c) {
  const auto& s = c.sim;
  json j;
  j["seed"] = s.seed;
  j["mode"] = to_string(s.mode);
  j["fixed_n"] = s.fixed_n;
  j["instances"] = s.instances;
  j["scenario"] = c.scenario;
  j["output_dir"] = c.output_dir;
  j["calibration"] = c.calibration_path;
  j["step_limit"] = s.step_limit;
  j["workload"] = {{"sample_count", c.workload.sample_count},
                   {"length_mu", c.workload.length_mu},
                   {"length_sigma", c.workload.length_sigma},
                   {"max_new_tokens", c.workload.max_new_tokens},
                   {"prompt_mu", c.workload.prompt_mu},
                   {"prompt_sigma", c.workload.prompt_sigma},
                   {"prompt_min", c.workload.prompt_min},
                   {"prompt_max", c.workload.prompt_max},
                   {"uniform_output_len", c.uniform_output_len},
                   {"uniform_prompt_len", c.uniform_prompt_len},
                   {"rebalance_heavy", c.rebalance_heavy},
                   {"rebalance_light", c.rebalance_light},
                   {"rebalance_long_len", c.rebalance_long_len},
                   {"rebalance_short_len", c.rebalance_short_len}};
  j["selector"] = {{"n_min", s.selector.n_min},
                   {"n_max", s.selector.n_max},
                   {"patience", s.selector.patience},
                   {"bonus_tokens", s.selector.bonus_tokens},
                   {"early_stop", s.selector.early_stop}};
  j["tree"] = {{"depth", s.tree.depth},         {"branching", s.tree.branching}, {"beam", s.tree.beam},
               {"mean0", s.tree.mean0},         {"decay", s.tree.decay},         {"concentration", s.tree.concentration}};
  j["hardware"] = {{"weight_s", s.hardware.weight_s},
                   {"kv_s_per_token", s.hardware.kv_s_per_token},
                   {"compute_s_per_token", s.hardware.compute_s_per_token},
                   {"draft_s", s.hardware.draft_s},
                   {"smoothing_s", s.hardware.smoothing_s},
                   {"scale", s.hardware.scale},
                   {"noise_sigma", s.hardware.noise_sigma},
                   {"prefill_s_per_sample", s.hardware.prefill_s_per_sample}};
  j["truth"] = {{"intercept", s.truth.intercept}, {"slope", s.truth.slope}};
  j["realloc"] = {{"cooldown", s.realloc.cooldown}};
  j["migration"] = {{"mode", s.migration == MigrationMode::Overlapped ? "overlapped" : "stop-the-world"},
                    {"bandwidth", s.link.bandwidth},
                    {"latency", s.link.latency},
                    {"copy_bandwidth", s.link.copy_bandwidth},
                    {"buffer_bytes", s.migration_buffer_bytes},
                    {"ssm_layers", s.kv.ssm_layers},
                    {"llm_layers", s.kv.llm_layers},
                    {"ssm_bytes_per_layer_token", s.kv.ssm_bytes_per_layer_token},
                    {"llm_bytes_per_layer_token", s.kv.llm_bytes_per_layer_token}};
  j["refit"] = {{"online", s.online_refit},
                {"interval", s.refit.interval},
                {"reservoir", s.refit.reservoir},
                {"cost_window", s.refit.cost_window}};
  return j;
}

ExperimentConfig experiment_from_json(const json& j) {
  try {
    check_keys(j, "config",
               {"seed", "mode", "fixed_n", "instances", "scenario", "output_dir", "calibration", "step_limit",
                "workload", "selector", "tree", "hardware", "truth", "realloc", "migration", "refit"});
    if (!j.contains("seed")) throw ConfigError("config must set seed");
    ExperimentConfig c;
    auto& s = c.sim;
    s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("mode")) {
      const auto m = parse_mode(j.at("mode").get<std::string>(), &s.fixed_n);
      if (!m) throw ConfigError("unknown mode '" + j.at("mode").get<std::string>() + "'");
      s.mode = *m;
    }
    get(j, "fixed_n", s.fixed_n);
    get(j, "instances", s.instances);
    get(j, "scenario", c.scenario);
    get(j, "output_dir", c.output_dir);
    get(j, "calibration", c.calibration_path);
    get(j, "step_limit", s.step_limit);
    if (j.contains("workload")) {
      const auto& w = j.at("workload");
      check_keys(w, "workload",
                 {"sample_count", "length_mu", "length_sigma", "max_new_tokens", "prompt_mu", "prompt_sigma",
                  "prompt_min", "prompt_max", "uniform_output_len", "uniform_prompt_len", "rebalance_heavy",
                  "rebalance_light", "rebalance_long_len", "rebalance_short_len"});
      get(w, "sample_count", c.workload.sample_count);
      get(w, "length_mu", c.workload.length_mu);
      get(w, "length_sigma", c.workload.length_sigma);
      get(w, "max_new_tokens", c.workload.max_new_tokens);
      get(w, "prompt_mu", c.workload.prompt_mu);
      get(w, "prompt_sigma", c.workload.prompt_sigma);
      get(w, "prompt_min", c.workload.prompt_min);
      get(w, "prompt_max", c.workload.prompt_max);
      get(w, "uniform_output_len", c.uniform_output_len);
      get(w, "uniform_prompt_len", c.uniform_prompt_len);
      get(w, "rebalance_heavy", c.rebalance_heavy);
      get(w, "rebalance_light", c.rebalance_light);
      get(w, "rebalance_long_len", c.rebalance_long_len);
      get(w, "rebalance_short_len", c.rebalance_short_len);
    }
    if (j.contains("selector")) {
      const auto& o = j.at("selector");
      check_keys(o, "selector", {"n_min", "n_max", "patience", "bonus_tokens", "early_stop"});
      get(o, "n_min", s.selector.n_min);
      get(o, "n_max", s.selector.n_max);
      get(o, "patience", s.selector.patience);
      get(o, "bonus_tokens", s.selector.bonus_tokens);
      get(o, "early_stop", s.selector.early_stop);
    }
    if (j.contains("tree")) {
      const auto& o = j.at("tree");
      check_keys(o, "tree", {"depth", "branching", "beam", "mean0", "decay", "concentration"});
      get(o, "depth", s.tree.depth);
      get(o, "branching", s.tree.branching);
      get(o, "beam", s.tree.beam);
      get(o, "mean0", s.tree.mean0);
      get(o, "decay", s.tree.decay);
      get(o, "concentration", s.tree.concentration);
    }
    if (j.contains("hardware")) {
      const auto& o = j.at("hardware");
      check_keys(o, "hardware",
                 {"weight_s", "kv_s_per_token", "compute_s_per_token", "draft_s", "smoothing_s", "scale",
                  "noise_sigma", "prefill_s_per_sample"});
      get(o, "weight_s", s.hardware.weight_s);
      get(o, "kv_s_per_token", s.hardware.kv_s_per_token);
      get(o, "compute_s_per_token", s.hardware.compute_s_per_token);
      get(o, "draft_s", s.hardware.draft_s);
      get(o, "smoothing_s", s.hardware.smoothing_s);
      get(o, "scale", s.hardware.scale);
      get(o, "noise_sigma", s.hardware.noise_sigma);
      get(o, "prefill_s_per_sample", s.hardware.prefill_s_per_sample);
    }
    if (j.contains("truth")) {
      const auto& o = j.at("truth");
      check_keys(o, "truth", {"intercept", "slope"});
      get(o, "intercept", s.truth.intercept);
      get(o, "slope", s.truth.slope);
    }
    if (j.contains("realloc")) {
      const auto& o = j.at("realloc");
      check_keys(o, "realloc", {"cooldown"});
      get(o, "cooldown", s.realloc.cooldown);
    }
    if (j.contains("migration")) {
      const auto& o = j.at("migration");
      check_keys(o, "migration",
                 {"mode", "bandwidth", "latency", "copy_bandwidth", "buffer_bytes", "ssm_layers", "llm_layers",
                  "ssm_bytes_per_layer_token", "llm_bytes_per_layer_token"});
      if (o.contains("mode")) {
        const auto m = o.at("mode").get<std::string>();
        if (m == "overlapped") {
          s.migration = MigrationMode::Overlapped;
        } else if (m == "stop-the-world") {
          s.migration = MigrationMode::StopTheWorld;
        } else {
          throw ConfigError("unknown migration mode '" + m + "'");
        }
      }
      get(o, "bandwidth", s.link.bandwidth);
      get(o, "latency", s.link.latency);
      get(o, "copy_bandwidth", s.link.copy_bandwidth);
      get(o, "buffer_bytes", s.migration_buffer_bytes);
      get(o, "ssm_layers", s.kv.ssm_layers);
      get(o, "llm_layers", s.kv.llm_layers);
      get(o, "ssm_bytes_per_layer_token", s.kv.ssm_bytes_per_layer_token);
      get(o, "llm_bytes_per_layer_token", s.kv.llm_bytes_per_layer_token);
    }
    if (j.contains("refit")) {
      const auto& o = j.at("refit");
      check_keys(o, "refit", {"online", "interval", "reservoir", "cost_window"});
      get(o, "online", s.online_refit);
      get(o, "interval", s.refit.interval);
      get(o, "reservoir", s.refit.reservoir);
      get(o, "cost_window", s.refit.cost_window);
    }
    c.workload.seed = s.seed;
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
}

ExperimentConfig load_experiment(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return experiment_from_json(json::parse(ss.str()));
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path + ": " + e.what());
  }
}

std::vector<Sample> build_workload(const ExperimentConfig& cfg, std::vector<int>& placement) {
  placement.clear();
  if (cfg.scenario == "rebalance") {
    auto sc = make_rebalance_scenario(cfg.rebalance_heavy, cfg.rebalance_light, cfg.rebalance_long_len,
                                      cfg.rebalance_short_len, cfg.uniform_prompt_len);
    placement = std::move(sc.placement);
    return std::move(sc.workload);
  }
  if (cfg.scenario == "uniform") {
    return uniform_workload(cfg.workload.sample_count, cfg.uniform_output_len, cfg.uniform_prompt_len);
  }
  auto spec = cfg.workload;
  spec.seed = cfg.sim.seed;
  return generate_workload(spec);
}

RunReport run_experiment(const ExperimentConfig& cfg, const Calibration& cal) {
  cfg.validate();
  auto sim = cfg.sim;
  auto work = build_workload(cfg, sim.placement);
  return run_generation(sim, cal, std::move(work));
}

bool is_known_axis(const std::string& axis) {
  static const char* const kAxes[] = {"fixed_n", "mode", "samples", "instances", "seed", "cooldown", "scale",
                                      "output_len"};
  return std::any_of(std::begin(kAxes), std::end(kAxes), [&](const char* a) { return axis == a; });
}

void apply_axis(ExperimentConfig& cfg, const std::string& axis, const std::string& value) {
  if (axis == "fixed_n") {
    if (value == "adaptive") {
      cfg.sim.mode = Mode::Adaptive;
      return;
    }
    cfg.sim.mode = Mode::FixedN;
    cfg.sim.fixed_n = parse_int(value, axis);
  } else if (axis == "mode") {
    const auto m = parse_mode(value, &cfg.sim.fixed_n);
    if (!m) throw ConfigError("unknown mode '" + value + "'");
    cfg.sim.mode = *m;
  } else if (axis == "samples") {
    cfg.workload.sample_count = parse_int(value, axis);
  } else if (axis == "instances") {
    cfg.sim.instances = parse_int(value, axis);
  } else if (axis == "seed") {
    cfg.sim.seed = static_cast<std::uint64_t>(parse_int(value, axis));
    cfg.workload.seed = cfg.sim.seed;
  } else if (axis == "cooldown") {
    cfg.sim.realloc.cooldown = parse_int(value, axis);
  } else if (axis == "scale") {
    cfg.sim.hardware.scale = parse_real(value, axis);
  } else if (axis == "output_len") {
    cfg.uniform_output_len = parse_int(value, axis);
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "'");
  }
}

SweepTable run_sweep(const ExperimentConfig& base, const Calibration& cal, const std::string& col_axis,
                     const std::vector<std::string>& col_values, const std::string& row_axis,
                     const std::vector<std::string>& row_values) {
  if (!is_known_axis(col_axis)) throw ConfigError("unknown sweep axis '" + col_axis + "'");
  if (!row_axis.empty() && !is_known_axis(row_axis)) throw ConfigError("unknown sweep axis '" + row_axis + "'");
  if (col_values.empty()) throw ConfigError("sweep needs at least one value");
  SweepTable t;
  t.col_axis = col_axis;
  t.row_axis = row_axis;
  t.cols = col_values;
  t.rows = row_axis.empty() ? std::vector<std::string>{"-"} : row_values;
  if (t.rows.empty()) throw ConfigError("row axis needs at least one value");

  std::vector<ExperimentConfig> cells;
  for (const auto& r : t.rows) {
    for (const auto& c : t.cols) {
      auto cfg = base;
      if (!row_axis.empty()) apply_axis(cfg, row_axis, r);
      apply_axis(cfg, col_axis, c);
      cfg.sim.exec = Exec::Serial;
      cfg.validate();
      cells.push_back(std::move(cfg));
    }
  }
  std::vector<double> tput(cells.size(), 0.0);
  std::vector<double> done(cells.size(), 0.0);
  const auto count = static_cast<std::int64_t>(cells.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto rep = run_experiment(cells[static_cast<std::size_t>(i)], cal);
    done[static_cast<std::size_t>(i)] = rep.completion_s;
    tput[static_cast<std::size_t>(i)] =
        rep.completion_s > 0.0 ? static_cast<double>(rep.total_tokens) / rep.completion_s : 0.0;
  }
  const std::size_t nc = t.cols.size();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<double> row(tput.begin() + static_cast<std::ptrdiff_t>(r * nc),
                            tput.begin() + static_cast<std::ptrdiff_t>((r + 1) * nc));
    std::vector<double> comp(done.begin() + static_cast<std::ptrdiff_t>(r * nc),
                             done.begin() + static_cast<std::ptrdiff_t>((r + 1) * nc));
    const double best = *std::max_element(row.begin(), row.end());
    std::vector<double> norm(nc, 0.0);
    for (std::size_t c = 0; c < nc; ++c) norm[c] = best > 0.0 ? row[c] / best : 0.0;
    t.throughput.push_back(std::move(row));
    t.completion.push_back(std::move(comp));
    t.normalized.push_back(std::move(norm));
  }
  return t;
}

}  // namespace specsim
