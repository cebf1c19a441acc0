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

#include "specsim/clustersim.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <random>
#include <stdexcept>

#include "specsim/error.hpp"
#include "specsim/rng.hpp"

namespace specsim {

const char* to_string(Mode m) noexcept {
  switch (m) {
    case Mode::Autoregressive: return "autoregressive";
    case Mode::FixedN: return "fixed-n";
    case Mode::Adaptive: return "adaptive";
    case Mode::AdaptiveRealloc: return "adaptive+realloc";
  }
  return "unknown";
}

std::optional<Mode> parse_mode(const std::string& text, int* fixed_n) {
  if (text == "autoregressive" || text == "default") return Mode::Autoregressive;
  if (text == "adaptive") return Mode::Adaptive;
  if (text == "adaptive+realloc") return Mode::AdaptiveRealloc;
  if (text == "fixed-n") return Mode::FixedN;
  if (text.rfind("fixed-n:", 0) == 0) {
    const auto arg = text.substr(8);
    std::size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(arg, &used);
    } catch (const std::exception&) {
      return std::nullopt;
    }
    if (used != arg.size() || k < 1) return std::nullopt;
    if (fixed_n) *fixed_n = k;
    return Mode::FixedN;
  }
  return std::nullopt;
}

void SimConfig::validate() const {
  if (instances < 1) throw ConfigError("at least one instance is required");
  if (mode == Mode::FixedN && fixed_n < 1) throw ConfigError("fixed-n mode needs fixed_n >= 1");
  selector.validate();
  tree.validate();
  hardware.validate();
  link.validate();
  if (realloc.cooldown < 1) throw ConfigError("cooldown must be >= 1");
  if (migration_buffer_bytes < 0) throw ConfigError("migration buffer must be >= 0");
  for (int p : placement) {
    if (p < 0 || p >= instances) throw ConfigError("placement names an instance outside the fleet");
  }
}

namespace {

constexpr std::uint64_t kNoiseTag = 0x6e6f697365ULL;

double prorated(const StepRecord& s, double t0, double t1) {
  const double lo = std::max(t0, s.t_start);
  const double hi = std::min(t1, s.t_end);
  if (hi <= lo || s.t_end <= s.t_start) return 0.0;
  return s.tokens * (hi - lo) / (s.t_end - s.t_start);
}

struct Arrival {
  Sample sample;
  double resume_t = 0.0;
  std::size_t record = 0;
};

struct Outgoing {
  MigrationJob job;
  std::size_t record = 0;
  int snapshot_generated = 0;
  double stage1_end = 0.0;
};

struct PendingStep {
  double start = 0.0;
  double end = 0.0;
  std::vector<int> accepted;  // per resident sample, before truncation
  StepRecord record;
  StepTelemetry telemetry;
};

struct Instance {
  int id = 0;
  std::vector<Sample> resident;
  std::vector<Arrival> incoming;
  std::vector<Outgoing> outgoing;
  std::map<SampleId, std::int64_t> held_bytes;  // migration buffer held by arrivals
  Predictor predictor;
  DestinationMemory memory;
  std::int64_t step = 0;
  bool busy = false;
  bool waking = false;
  PendingStep pending;

  Instance(int i, const Calibration& cal, const SimConfig& cfg)
      : id(i), predictor(cal.acceptance, cal.cost, cal.buckets, cfg.refit), memory(cfg.migration_buffer_bytes) {}

  bool migrating(SampleId s) const {
    return std::any_of(outgoing.begin(), outgoing.end(), [&](const Outgoing& o) { return o.job.sample == s; });
  }
  int load() const {
    int n = static_cast<int>(incoming.size());
    for (const auto& s : resident) n += (!s.finished() && !migrating(s.id)) ? 1 : 0;
    return n;
  }
};

struct Event {
  double t;
  int instance;
  std::uint64_t seq;
  bool wake;
  bool operator>(const Event& o) const {
    if (t != o.t) return t > o.t;
    if (instance != o.instance) return instance > o.instance;
    return seq > o.seq;
  }
};

class Simulation {
 public:
  Simulation(const SimConfig& cfg, const Calibration& cal, std::vector<Sample> workload)
      : cfg_(cfg),
        cal_(cal),
        realloc_(cal.threshold, {cfg.mode == Mode::AdaptiveRealloc, cfg.realloc.cooldown}) {
    for (int i = 0; i < cfg.instances; ++i) inst_.emplace_back(i, cal, cfg);
    report_.mode = cfg.mode;
    report_.fixed_n = cfg.mode == Mode::FixedN ? cfg.fixed_n : 0;
    report_.instances = cfg.instances;
    report_.steps.resize(static_cast<std::size_t>(cfg.instances));
    report_.finish_t.assign(workload.size(), 0.0);
    report_.threshold = cal.threshold.threshold;
    for (std::size_t k = 0; k < workload.size(); ++k) {
      index_of_[workload[k].id] = k;
      const int where = cfg.placement.empty() ? static_cast<int>(k % static_cast<std::size_t>(cfg.instances))
                                              : cfg.placement.at(k);
      if (!workload[k].finished()) inst_[static_cast<std::size_t>(where)].resident.push_back(workload[k]);
    }
  }

  RunReport run() {
    for (auto& in : inst_) {
      if (in.resident.empty()) continue;
      const double t0 = cfg_.hardware.prefill_s_per_sample * static_cast<double>(in.resident.size());
      schedule(t0, in.id, true);
    }
    while (!queue_.empty()) {
      const Event e = queue_.top();
      queue_.pop();
      auto& in = inst_[static_cast<std::size_t>(e.instance)];
      if (e.wake) {
        in.waking = false;
        if (!in.busy) start_step(in, e.t);
      } else {
        finish_step(in, e.t);
      }
    }
    finalize();
    return std::move(report_);
  }

 private:
  void schedule(double t, int instance, bool wake) { queue_.push({t, instance, seq_++, wake}); }

  void start_step(Instance& in, double t) {
    for (auto it = in.incoming.begin(); it != in.incoming.end();) {
      if (it->resume_t <= t) {
        report_.migrations[it->record].join_t = t;
        in.resident.push_back(it->sample);
        it = in.incoming.erase(it);
      } else {
        ++it;
      }
    }
    if (cfg_.step_limit > 0 && in.step >= cfg_.step_limit) {
      in.busy = false;
      return;
    }
    if (in.resident.empty()) {
      in.busy = false;
      if (!in.incoming.empty() && !in.waking) {
        double next = in.incoming.front().resume_t;
        for (const auto& a : in.incoming) next = std::min(next, a.resume_t);
        in.waking = true;
        schedule(next, in.id, true);
      }
      return;
    }
    compute_step(in, t);
    in.busy = true;
    schedule(in.pending.end, in.id, false);
  }

  void compute_step(Instance& in, double t) {
    auto& p = in.pending;
    const int batch = static_cast<int>(in.resident.size());
    std::int64_t n_seq = 0;
    for (const auto& s : in.resident) n_seq += s.seq_len();
    const auto& hw = cfg_.hardware;

    p.start = t;
    p.accepted.assign(static_cast<std::size_t>(batch), 1);
    p.telemetry = {};
    p.record = {};
    p.record.instance = in.id;
    p.record.step = in.step;
    p.record.t_start = t;
    p.record.samples = batch;
    p.record.ar_equivalent_t = hw.ar_step_time(n_seq, batch);

    double truth_t = 0.0;
    if (cfg_.mode == Mode::Autoregressive) {
      truth_t = hw.ar_step_time(n_seq, batch);
      p.record.predicted_t = in.predictor.predict_t_ar(batch, n_seq);
      p.record.predicted_accepted = batch;
      p.record.realized_accepted = batch;
    } else {
      requests_.resize(static_cast<std::size_t>(batch));
      for (int k = 0; k < batch; ++k) {
        const auto& s = in.resident[static_cast<std::size_t>(k)];
        requests_[static_cast<std::size_t>(k)] = {s.id, static_cast<std::uint64_t>(s.steps)};
      }
      const int limit = cfg_.mode == Mode::FixedN ? cfg_.fixed_n : cfg_.selector.n_max;
      draft_batch(requests_, cfg_.seed, cfg_.tree, in.predictor.acceptance(), limit, drafts_, cfg_.exec);
      traces_.resize(drafts_.size());
      for (std::size_t k = 0; k < drafts_.size(); ++k) traces_[k] = drafts_[k].trace;

      int n = 0;
      const VerifyBatchFeatures base{n_seq, 0};
      if (cfg_.mode == Mode::FixedN) {
        n = cfg_.fixed_n;
        for (const auto& tr : traces_) n = std::min(n, static_cast<int>(tr.gains.size()));
        double al = 0.0;
        for (const auto& tr : traces_) {
          for (int k = 0; k < n; ++k) al += tr.gains[static_cast<std::size_t>(k)];
        }
        const auto tp = in.predictor.predict_t_sd({base.n_seq, static_cast<std::int64_t>(n) * batch});
        p.record.predicted_accepted = al + cfg_.selector.bonus_tokens * batch;
        p.record.predicted_t = tp.seconds;
        p.record.cache_hit = tp.cache_hit;
      } else {
        const auto d = select_batch_strategy(traces_, BatchContext{batch, n_seq}, in.predictor, cfg_.selector);
        n = d.n;
        p.record.predicted_accepted = d.predicted_al + cfg_.selector.bonus_tokens * batch;
        p.record.predicted_t = d.predicted_time;
        p.record.cache_hit = d.cache_hit;
      }
      verify_batch(drafts_, n, cfg_.truth, outcomes_, cfg_.exec);
      const bool learn = cfg_.online_refit && (cfg_.mode == Mode::Adaptive || cfg_.mode == Mode::AdaptiveRealloc);
      double realized = 0.0;
      for (std::size_t k = 0; k < drafts_.size(); ++k) {
        const auto& o = outcomes_[k];
        p.accepted[k] = o.accepted_tokens();
        realized += o.accepted_tokens();
        if (!learn) continue;
        const auto& d = drafts_[k];
        for (int j = 0; j < n; ++j) {
          const NodeId id = d.trace.order[static_cast<std::size_t>(j)];
          const bool hit = std::find(o.path.begin(), o.path.end(), id) != o.path.end();
          p.telemetry.node_outcomes.push_back({d.tree.node(id).draft_logit, hit});
        }
      }
      p.record.chosen_n = n;
      p.record.realized_accepted = realized;
      truth_t = hw.spec_step_time(n_seq, static_cast<std::int64_t>(n) * batch, batch);
      if (learn) p.telemetry.verify = CostObservation{n_seq, static_cast<std::int64_t>(n) * batch, 0.0};
    }

    SplitMix64 rng(derive_seed({cfg_.seed, kNoiseTag, static_cast<std::uint64_t>(in.id),
                                static_cast<std::uint64_t>(in.step)}));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double step_t = truth_t * hw.noise_factor(normal(rng));
    if (p.telemetry.verify) p.telemetry.verify->verify_s = std::max(0.0, step_t - in.predictor.cost().c_draft);
    p.end = t + step_t;
    p.record.t_end = p.end;
    p.record.realized_t = step_t;
  }

  void finish_step(Instance& in, double t) {
    auto& p = in.pending;
    int tokens = 0;
    for (std::size_t k = 0; k < in.resident.size(); ++k) tokens += in.resident[k].advance(p.accepted[k]);
    p.record.tokens = tokens;
    report_.total_tokens += tokens;
    if (!p.telemetry.empty()) in.predictor.observe_step(p.telemetry);
    p.record.cache_hit_rate =
        in.predictor.lookups() ? static_cast<double>(in.predictor.hits()) / static_cast<double>(in.predictor.lookups())
                               : 0.0;
    report_.steps[static_cast<std::size_t>(in.id)].push_back(p.record);
    ++in.step;
    ++global_step_;
    in.busy = false;

    detach_ready(in, t);
    retire_finished(in, t);
    if (realloc_.on_step(in.id)) decide(t);
    start_step(in, t);
  }

  void detach_ready(Instance& in, double t) {
    for (auto it = in.outgoing.begin(); it != in.outgoing.end();) {
      const bool stw = cfg_.migration == MigrationMode::StopTheWorld;
      if (!stw && it->stage1_end > t) {
        ++it;
        continue;
      }
      auto sit = std::find_if(in.resident.begin(), in.resident.end(),
                              [&](const Sample& s) { return s.id == it->job.sample; });
      auto& dst = inst_[static_cast<std::size_t>(it->job.dst)];
      auto& rec = report_.migrations[it->record];
      if (sit == in.resident.end() || sit->finished()) {
        dst.memory.release(it->job.reserved_bytes);
        rec.outcome = "cancelled";
        it = in.outgoing.erase(it);
        continue;
      }
      MigrationOutcome o;
      const int residual = sit->generated - it->snapshot_generated;
      if (stw) {
        it->job.snapshot_tokens = sit->seq_len();
        it->job.kv_ssm_bytes = cfg_.kv.ssm_bytes(it->job.snapshot_tokens);
        it->job.kv_llm_bytes = cfg_.kv.llm_bytes(it->job.snapshot_tokens);
        o = stop_the_world(it->job, cfg_.link, rec.request_t, t);
        o.residual_tokens = residual;
      } else {
        o = finish_stage2(it->job, cfg_.link, cfg_.kv, t, residual, cfg_.hardware.draft_s);
      }
      settle_reservation(it->job, dst.memory, o.bytes_total);
      rec.bytes = o.bytes_total;
      rec.residual_tokens = o.residual_tokens;
      rec.detach_t = o.detach_t;
      rec.resume_t = o.resume_t;
      rec.complete_t = o.complete_t;
      rec.stall_s = o.stall_s;
      rec.outcome = "complete";
      report_.stall_s_total += o.stall_s;

      if (const auto h = in.held_bytes.find(sit->id); h != in.held_bytes.end()) {
        in.memory.release(h->second);
        in.held_bytes.erase(h);
      }
      dst.held_bytes[sit->id] = o.bytes_total;
      dst.incoming.push_back({*sit, o.resume_t, it->record});
      in.resident.erase(sit);
      if (!dst.busy) schedule(std::max(o.resume_t, t), dst.id, true);
      it = in.outgoing.erase(it);
    }
  }

  void retire_finished(Instance& in, double t) {
    for (auto it = in.resident.begin(); it != in.resident.end();) {
      if (!it->finished()) {
        ++it;
        continue;
      }
      report_.finish_t[index_of_.at(it->id)] = t;
      report_.completion_s = std::max(report_.completion_s, t);
      if (const auto h = in.held_bytes.find(it->id); h != in.held_bytes.end()) {
        in.memory.release(h->second);
        in.held_bytes.erase(h);
      }
      it = in.resident.erase(it);
    }
  }

  void decide(double t) {
    std::vector<int> counts;
    std::vector<InstanceSamples> samples;
    for (const auto& in : inst_) {
      counts.push_back(in.load());
      InstanceSamples s{in.id, {}};
      for (const auto& r : in.resident) {
        if (!r.finished() && !in.migrating(r.id)) s.samples.push_back({r.id, r.seq_len(), r.avg_accepted});
      }
      samples.push_back(std::move(s));
    }
    const auto plan = realloc_.decide(global_step_, t, counts, samples);
    const std::int64_t headroom = cfg_.kv.bytes(2 * (cfg_.selector.n_max + 1));
    for (const auto& tr : plan.transfers) {
      auto& src = inst_[static_cast<std::size_t>(tr.src)];
      auto& dst = inst_[static_cast<std::size_t>(tr.dst)];
      for (SampleId id : tr.samples) {
        const auto sit = std::find_if(src.resident.begin(), src.resident.end(),
                                      [&](const Sample& s) { return s.id == id; });
        Outgoing out;
        out.job = MigrationJob::make(next_job_++, id, tr.src, tr.dst, sit->seq_len(), cfg_.kv);
        out.snapshot_generated = sit->generated;
        MigrationRecord rec;
        rec.job = out.job.id;
        rec.sample = id;
        rec.src = tr.src;
        rec.dst = tr.dst;
        rec.request_t = t;
        if (handshake(out.job, dst.memory, t, headroom) == MigrationState::Aborted) {
          rec.outcome = "aborted";
          report_.migrations.push_back(rec);
          continue;
        }
        if (cfg_.migration == MigrationMode::Overlapped) out.stage1_end = begin_stage1(out.job, cfg_.link, t);
        rec.stage1_end_t = out.stage1_end;
        out.record = report_.migrations.size();
        report_.migrations.push_back(rec);
        src.outgoing.push_back(std::move(out));
      }
    }
  }

  void finalize() {
    report_.decisions = realloc_.log();
    report_.realloc_count = realloc_.triggered_count();
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& steps : report_.steps) {
      for (const auto& s : steps) {
        if (s.realized_t <= 0.0 || s.samples == 0) continue;
        sum += (s.tokens / s.realized_t) / (s.samples / s.ar_equivalent_t);
        ++count;
      }
    }
    report_.mean_speedup = count ? sum / static_cast<double>(count) : 0.0;
  }

  const SimConfig& cfg_;
  const Calibration& cal_;
  Reallocator realloc_;
  std::vector<Instance> inst_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t next_job_ = 0;
  std::int64_t global_step_ = 0;
  std::map<SampleId, std::size_t> index_of_;
  RunReport report_;

  std::vector<DraftRequest> requests_;
  std::vector<SampleDraft> drafts_;
  std::vector<GreedyTrace> traces_;
  std::vector<AcceptanceOutcome> outcomes_;
};

}  // namespace

double RunReport::system_throughput(double t0, double t1) const {
  if (!(t1 > t0)) return 0.0;
  double tokens = 0.0;
  for (const auto& steps : this->steps) {
    for (const auto& s : steps) tokens += prorated(s, t0, t1);
  }
  return tokens / (t1 - t0);
}

double RunReport::instance_throughput(int instance, double t0, double t1) const {
  if (!(t1 > t0) || instance < 0 || static_cast<std::size_t>(instance) >= steps.size()) return 0.0;
  double tokens = 0.0;
  for (const auto& s : steps[static_cast<std::size_t>(instance)]) tokens += prorated(s, t0, t1);
  return tokens / (t1 - t0);
}

std::int64_t RunReport::completed_migrations() const {
  return std::count_if(migrations.begin(), migrations.end(),
                       [](const MigrationRecord& m) { return m.outcome == "complete"; });
}

RunReport run_generation(const SimConfig& cfg, const Calibration& cal, std::vector<Sample> workload) {
  cfg.validate();
  if (!cfg.placement.empty() && cfg.placement.size() != workload.size()) {
    throw ConfigError("placement must list one instance per sample");
  }
  Simulation sim(cfg, cal, std::move(workload));
  return sim.run();
}

RebalanceScenario make_rebalance_scenario(int heavy, int light, int long_len, int short_len, int prompt_len) {
  if (heavy < 1 || light < 1) throw ConfigError("rebalance scenario needs samples on both instances");
  RebalanceScenario sc;
  SampleId id = 0;
  auto add = [&](int output, int where) {
    auto s = uniform_workload(1, output, prompt_len, id++);
    sc.workload.push_back(s.front());
    sc.placement.push_back(where);
  };
  for (int k = 0; k < heavy; ++k) add(long_len, 0);
  add(long_len, 1);
  for (int k = 1; k < light; ++k) add(short_len, 1);
  return sc;
}

}  // namespace specsim
