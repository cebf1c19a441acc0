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

#include "specsim/calibration.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "specsim/error.hpp"
#include "specsim/oracle.hpp"
#include "specsim/rng.hpp"

namespace specsim {

using nlohmann::json;

namespace {

constexpr std::uint64_t kAcceptTag = 0x616363ULL;
constexpr std::uint64_t kCostTag = 0x636f7374ULL;

}  // namespace

CalibrationData collect_calibration_data(const CalibrationSpec& spec) {
  spec.hardware.validate();
  spec.tree.validate();
  spec.selector.validate();
  CalibrationData data;

  // Random budgets over the selector's range, greedy by draft logit.
  for (int i = 0; i < spec.acceptance_trees; ++i) {
    SplitMix64 rng(derive_seed({spec.seed, kAcceptTag, static_cast<std::uint64_t>(i)}));
    const auto tree = generate_tree(spec.tree, rng);
    const auto draws = draw_acceptance(tree, rng);
    const auto dl = tree.draft_logits();
    const int span = spec.selector.n_max - spec.selector.n_min + 1;
    const int n = std::min<int>(static_cast<int>(tree.size()),
                                spec.selector.n_min + static_cast<int>(rng() % static_cast<std::uint64_t>(span)));
    const auto sel = top_n_selection(tree, n, dl);
    const auto out = sample_acceptance(tree, sel, spec.truth, draws);
    for (NodeId id : sel.node_ids) {
      const bool hit = std::find(out.path.begin(), out.path.end(), id) != out.path.end();
      data.acceptance.push_back({dl[id], hit});
    }
  }

  SplitMix64 rng(derive_seed({spec.seed, kCostTag}));
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& hw = spec.hardware;
  for (int b : spec.cost_batches) {
    for (int len : spec.cost_lengths) {
      const std::int64_t n_seq = static_cast<std::int64_t>(b) * len;
      for (int n : spec.cost_n) {
        const std::int64_t n_draft = static_cast<std::int64_t>(n) * b;
        data.verify.push_back({n_seq, n_draft, hw.verify_time(n_seq, n_draft, b) * hw.noise_factor(normal(rng))});
      }
      data.autoregressive.push_back({n_seq, b, hw.ar_step_time(n_seq, b) * hw.noise_factor(normal(rng))});
    }
  }
  double draft = 0.0;
  constexpr int kDraftReps = 32;
  for (int k = 0; k < kDraftReps; ++k) draft += hw.draft_s * hw.noise_factor(normal(rng));
  data.c_draft = draft / kDraftReps;
  return data;
}

std::vector<ThroughputPoint> profile_throughput(const CalibrationSpec& spec, const AcceptanceModel& acceptance,
                                                const CostModel& cost) {
  Calibration cal;
  cal.acceptance = acceptance;
  cal.cost = cost;
  cal.buckets = spec.buckets;
  cal.threshold.threshold = 1;

  std::vector<ThroughputPoint> curve(spec.profile_counts.size());
  const auto points = static_cast<std::int64_t>(curve.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t i = 0; i < points; ++i) {
    const int count = spec.profile_counts[static_cast<std::size_t>(i)];
    SimConfig cfg;
    cfg.instances = 1;
    cfg.mode = Mode::Adaptive;
    cfg.selector = spec.selector;
    cfg.tree = spec.tree;
    cfg.hardware = spec.hardware;
    cfg.truth = spec.truth;
    cfg.online_refit = false;
    cfg.seed = derive_seed({spec.seed, static_cast<std::uint64_t>(count)});
    cfg.exec = Exec::Serial;
    auto work = uniform_workload(count, spec.profile_output_len, spec.profile_prompt_len);
    const auto rep = run_generation(cfg, cal, std::move(work));
    const double start = spec.hardware.prefill_s_per_sample * count;
    const double busy = rep.completion_s - start;
    curve[static_cast<std::size_t>(i)] = {count, busy > 0.0 ? static_cast<double>(rep.total_tokens) / busy : 0.0};
  }
  return curve;
}

Calibration calibrate(const CalibrationSpec& spec) {
  const auto data = collect_calibration_data(spec);
  Calibration cal;
  cal.acceptance = fit_acceptance(data.acceptance, spec.acceptance_fit);
  cal.cost = fit_cost_model(data.verify, data.autoregressive, data.c_draft, spec.cost_fit);
  cal.buckets = spec.buckets;
  const auto curve = profile_throughput(spec, cal.acceptance, cal.cost);
  cal.threshold = estimate_threshold(curve, spec.knee_fraction);
  return cal;
}

std::string calibration_to_json(const Calibration& cal) {
  json j;
  j["format"] = "specsim-calibration v1";
  json knots = json::array();
  for (const auto& k : cal.acceptance.knots()) knots.push_back({k.x, k.y});
  j["acceptance"]["knots"] = knots;
  const auto& c = cal.cost;
  j["cost"]["c_draft"] = c.c_draft;
  j["cost"]["beta"] = c.beta;
  j["cost"]["k_sat"] = c.k_sat;
  j["cost"]["ar"] = c.ar;
  j["cost"]["hardware_scale"] = c.hardware_scale;
  j["cost"]["prior_gram"] = c.prior_gram;
  j["cost"]["prior_weight"] = c.prior_weight;
  j["buckets"]["seq"] = cal.buckets.seq;
  j["buckets"]["draft"] = cal.buckets.draft;
  j["threshold"]["value"] = cal.threshold.threshold;
  json curve = json::array();
  for (const auto& p : cal.threshold.curve) curve.push_back({p.count, p.throughput});
  j["threshold"]["curve"] = curve;
  return j.dump(2) + "\n";
}

Calibration calibration_from_json(std::string_view text) {
  try {
    const auto j = json::parse(text);
    Calibration cal;
    std::vector<Knot> knots;
    for (const auto& k : j.at("acceptance").at("knots")) knots.push_back({k.at(0).get<double>(), k.at(1).get<double>()});
    cal.acceptance = AcceptanceModel(std::move(knots));
    const auto& c = j.at("cost");
    cal.cost.c_draft = c.at("c_draft").get<double>();
    cal.cost.beta = c.at("beta").get<std::array<double, 4>>();
    cal.cost.k_sat = c.at("k_sat").get<double>();
    cal.cost.ar = c.at("ar").get<std::array<double, 3>>();
    cal.cost.hardware_scale = c.value("hardware_scale", 1.0);
    if (c.contains("prior_gram")) cal.cost.prior_gram = c.at("prior_gram").get<std::array<double, 16>>();
    cal.cost.prior_weight = c.value("prior_weight", 0.0);
    cal.buckets.seq = j.at("buckets").at("seq").get<std::int64_t>();
    cal.buckets.draft = j.at("buckets").at("draft").get<std::int64_t>();
    if (cal.buckets.seq <= 0 || cal.buckets.draft <= 0) throw ConfigError("bucket widths must be positive");
    cal.threshold.threshold = j.at("threshold").at("value").get<int>();
    for (const auto& p : j.at("threshold").at("curve")) {
      cal.threshold.curve.push_back({p.at(0).get<int>(), p.at(1).get<double>()});
    }
    if (!cal.cost.is_valid()) throw ConfigError("calibration cost model is invalid");
    return cal;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed calibration: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("malformed calibration: ") + e.what());
  }
}

void save_calibration(const std::string& path, const Calibration& cal) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write calibration file " + path);
  out << calibration_to_json(cal);
  if (!out) throw ConfigError("failed writing calibration file " + path);
}

Calibration load_calibration(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read calibration file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return calibration_from_json(ss.str());
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace specsim
