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

#include "specsim/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "specsim/error.hpp"

namespace specsim {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("failed writing " + path);
}

std::string instance_csv(const RunReport& report, int instance) {
  std::string s = std::string(kCsvVersion) + "\n";
  s += "t_sim,instance,samples,tokens_per_s,chosen_n,cache_hit_rate\n";
  if (instance < 0 || static_cast<std::size_t>(instance) >= report.steps.size()) return s;
  for (const auto& r : report.steps[static_cast<std::size_t>(instance)]) {
    s += format_double(r.t_end) + ',' + std::to_string(r.instance) + ',' + std::to_string(r.samples) + ',' +
         format_double(r.tokens_per_s()) + ',' + std::to_string(r.chosen_n) + ',' + format_double(r.cache_hit_rate) +
         '\n';
  }
  return s;
}

std::string telemetry_csv(const RunReport& report, int instance) {
  std::string s = std::string(kCsvVersion) + "\n";
  s += "step,chosen_n,predicted_al,realized_al,predicted_t,realized_t,cache_hit\n";
  if (instance < 0 || static_cast<std::size_t>(instance) >= report.steps.size()) return s;
  for (const auto& r : report.steps[static_cast<std::size_t>(instance)]) {
    s += std::to_string(r.step) + ',' + std::to_string(r.chosen_n) + ',' + format_double(r.predicted_accepted) + ',' +
         format_double(r.realized_accepted) + ',' + format_double(r.predicted_t) + ',' + format_double(r.realized_t) +
         ',' + (r.cache_hit ? "1" : "0") + '\n';
  }
  return s;
}

json run_summary(const RunReport& r) {
  json j;
  j["mode"] = to_string(r.mode);
  if (r.mode == Mode::FixedN) j["fixed_n"] = r.fixed_n;
  j["completion_s"] = r.completion_s;
  j["total_tokens"] = r.total_tokens;
  j["throughput"] = r.completion_s > 0.0 ? static_cast<double>(r.total_tokens) / r.completion_s : 0.0;
  j["mean_speedup"] = r.mean_speedup;
  j["realloc_count"] = r.realloc_count;
  j["threshold"] = r.threshold;
  j["stall_s_total"] = r.stall_s_total;
  json migs = json::array();
  for (const auto& m : r.migrations) {
    migs.push_back({{"job", m.job},
                    {"sample", m.sample},
                    {"src", m.src},
                    {"dst", m.dst},
                    {"bytes", m.bytes},
                    {"residual_tokens", m.residual_tokens},
                    {"request_t", m.request_t},
                    {"stage1_end_t", m.stage1_end_t},
                    {"detach_t", m.detach_t},
                    {"resume_t", m.resume_t},
                    {"join_t", m.join_t},
                    {"complete_t", m.complete_t},
                    {"stall_s", m.stall_s},
                    {"outcome", m.outcome}});
  }
  j["migrations"] = std::move(migs);
  json dec = json::array();
  for (const auto& d : r.decisions) {
    dec.push_back({{"step", d.step},
                   {"t_sim", d.t_sim},
                   {"triggered", d.triggered},
                   {"loads", d.loads},
                   {"plan", d.summary},
                   {"predicted_gain", d.predicted_gain}});
  }
  j["decisions"] = std::move(dec);
  return j;
}

json summary_json(const std::vector<RunReport>& runs, const ExperimentConfig& cfg,
                  const std::string& calibration_hash) {
  json j;
  if (!runs.empty()) {
    const auto first = run_summary(runs.front());
    for (const char* k : {"completion_s", "mean_speedup", "realloc_count", "migrations", "stall_s_total",
                          "decisions", "mode", "total_tokens", "throughput", "threshold"}) {
      j[k] = first.at(k);
    }
  } else {
    j["completion_s"] = 0.0;
    j["mean_speedup"] = 0.0;
    j["realloc_count"] = 0;
    j["migrations"] = json::array();
    j["stall_s_total"] = 0.0;
  }
  json per = json::object();
  for (const auto& r : runs) {
    auto s = run_summary(r);
    s.erase("decisions");
    s.erase("migrations");
    s["migrations"] = r.completed_migrations();
    per[to_string(r.mode) + (r.mode == Mode::FixedN ? ":" + std::to_string(r.fixed_n) : std::string())] = s;
  }
  j["per_mode"] = std::move(per);
  j["calibration_hash"] = calibration_hash;
  j["config"] = to_json(cfg);
  return j;
}

std::string sweep_csv(const SweepTable& t, bool normalized) {
  std::string s = std::string(kCsvVersion) + "\n";
  s += (t.row_axis.empty() ? std::string("row") : t.row_axis);
  for (const auto& c : t.cols) s += ',' + t.col_axis + '=' + c;
  s += '\n';
  const auto& m = normalized ? t.normalized : t.throughput;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    s += t.rows[r];
    for (double v : m[r]) s += ',' + format_double(v);
    s += '\n';
  }
  return s;
}

json sweep_json(const SweepTable& t) {
  return {{"row_axis", t.row_axis},       {"col_axis", t.col_axis},     {"rows", t.rows},
          {"cols", t.cols},               {"throughput", t.throughput}, {"completion_s", t.completion},
          {"normalized", t.normalized}};
}

void write_run_outputs(const std::string& dir, const std::vector<RunReport>& runs, const ExperimentConfig& cfg,
                       const std::string& calibration_hash) {
  std::filesystem::create_directories(dir);
  if (!runs.empty()) {
    const auto& r = runs.front();
    for (int k = 0; k < r.instances; ++k) {
      write_text(dir + "/instance_" + std::to_string(k) + ".csv", instance_csv(r, k));
      write_text(dir + "/telemetry_" + std::to_string(k) + ".csv", telemetry_csv(r, k));
    }
  }
  write_text(dir + "/summary.json", summary_json(runs, cfg, calibration_hash).dump(2) + "\n");
  write_text(dir + "/config.json", to_json(cfg).dump(2) + "\n");
}

}  // namespace specsim
