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

#include "specsim/migration.hpp"

#include <algorithm>
#include <stdexcept>

#include "specsim/error.hpp"
#include "specsim/rng.hpp"

namespace specsim {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv_mix(std::uint64_t h, std::uint64_t word) noexcept {
  for (int i = 0; i < 8; ++i) {
    h ^= (word >> (8 * i)) & 0xffU;
    h *= kFnvPrime;
  }
  return h;
}

int rank(MigrationState s) noexcept { return static_cast<int>(s); }

}  // namespace

void LinkModel::validate() const {
  if (!(bandwidth > 0.0) || !(latency > 0.0) || !(copy_bandwidth > 0.0)) {
    throw ConfigError("link bandwidth, latency and copy bandwidth must be positive");
  }
}

double LinkModel::transfer_s(std::int64_t bytes) const noexcept {
  return bytes > 0 ? latency + static_cast<double>(bytes) / bandwidth : 0.0;
}

double LinkModel::copy_s(std::int64_t bytes) const noexcept {
  return bytes > 0 ? static_cast<double>(bytes) / copy_bandwidth : 0.0;
}

const char* to_string(MigrationState s) noexcept {
  switch (s) {
    case MigrationState::Requested: return "requested";
    case MigrationState::Reserved: return "reserved";
    case MigrationState::Stage1: return "stage1";
    case MigrationState::Stage2SsmDone: return "stage2_ssm_done";
    case MigrationState::Complete: return "complete";
    case MigrationState::Aborted: return "aborted";
  }
  return "unknown";
}

MigrationJob MigrationJob::make(std::uint64_t id, SampleId sample, int src, int dst, std::int64_t tokens,
                                const KvFootprint& kv) {
  MigrationJob j;
  j.id = id;
  j.sample = sample;
  j.src = src;
  j.dst = dst;
  j.snapshot_tokens = tokens;
  j.kv_ssm_bytes = kv.ssm_bytes(tokens);
  j.kv_llm_bytes = kv.llm_bytes(tokens);
  return j;
}

void MigrationJob::transition(MigrationState next, double t, const char* event) {
  const bool ok = next == MigrationState::Aborted
                      ? (state == MigrationState::Requested || state == MigrationState::Reserved)
                      : (state != MigrationState::Aborted && rank(next) == rank(state) + 1);
  if (!ok) throw std::logic_error(std::string("invalid migration transition ") + to_string(state) + " -> " +
                                  to_string(next));
  state = next;
  timeline.push_back({event, t});
}

std::optional<double> MigrationJob::time_of(const std::string& event) const {
  for (const auto& e : timeline) {
    if (e.event == event) return e.t;
  }
  return std::nullopt;
}

bool DestinationMemory::try_reserve(std::int64_t bytes) noexcept {
  if (bytes < 0 || bytes > free()) return false;
  reserved_ += bytes;
  return true;
}

void DestinationMemory::release(std::int64_t bytes) noexcept { reserved_ = std::max<std::int64_t>(0, reserved_ - bytes); }

MigrationState handshake(MigrationJob& job, DestinationMemory& dst, double t, std::int64_t headroom_bytes) {
  if (job.state != MigrationState::Requested) throw std::logic_error("handshake requires a Requested job");
  job.timeline.push_back({"request", t});
  const std::int64_t want = job.bytes() + std::max<std::int64_t>(0, headroom_bytes);
  if (dst.try_reserve(want)) {
    job.reserved_bytes = want;
    job.transition(MigrationState::Reserved, t, "reserved");
  } else {
    job.transition(MigrationState::Aborted, t, "aborted");
  }
  return job.state;
}

void abort_reservation(MigrationJob& job, DestinationMemory& dst, double t) {
  dst.release(job.reserved_bytes);
  job.reserved_bytes = 0;
  if (job.state != MigrationState::Aborted) job.transition(MigrationState::Aborted, t, "aborted");
}

void settle_reservation(MigrationJob& job, DestinationMemory& dst, std::int64_t delivered_bytes) {
  if (job.state != MigrationState::Complete) throw std::logic_error("settle_reservation requires a Complete job");
  if (delivered_bytes > job.reserved_bytes) {
    // residual outgrew the headroom; the destination grows into it
    const std::int64_t extra = delivered_bytes - job.reserved_bytes;
    if (!dst.try_reserve(extra)) throw std::runtime_error("destination memory exhausted by residual KV");
  } else {
    dst.release(job.reserved_bytes - delivered_bytes);
  }
  job.reserved_bytes = delivered_bytes;
}

double begin_stage1(MigrationJob& job, const LinkModel& link, double t) {
  if (job.state != MigrationState::Reserved) throw std::logic_error("stage 1 requires a Reserved job");
  const double start = t + link.handshake_s();
  const auto bytes = job.bytes();
  const double end = start + link.copy_s(bytes) + link.transfer_s(bytes) + link.copy_s(bytes);
  job.transition(MigrationState::Stage1, start, "stage1_start");
  job.timeline.push_back({"stage1_end", end});
  return end;
}

MigrationOutcome finish_stage2(MigrationJob& job, const LinkModel& link, const KvFootprint& kv, double detach_t,
                               std::int64_t residual_tokens, double dst_draft_s) {
  if (job.state != MigrationState::Stage1) throw std::logic_error("stage 2 requires a job in Stage1");
  MigrationOutcome o;
  o.request_t = job.timeline.front().t;
  o.detach_t = detach_t;
  o.residual_tokens = residual_tokens;
  job.timeline.push_back({"detach", detach_t});

  // The residual SSM KV travels with the residual-size message; the round
  // trip carries the link latency.
  const auto ssm = kv.ssm_bytes(residual_tokens);
  const auto llm = kv.llm_bytes(residual_tokens);
  o.handshake_s = link.handshake_s();
  o.residual_ssm_s = static_cast<double>(ssm) / link.bandwidth;
  const double ssm_done = detach_t + o.handshake_s + o.residual_ssm_s;
  job.transition(MigrationState::Stage2SsmDone, ssm_done, "ssm_done");

  const double llm_s = link.transfer_s(llm);
  o.gate_excess_s = std::max(0.0, llm_s - dst_draft_s);
  o.resume_t = ssm_done + o.gate_excess_s;
  o.complete_t = ssm_done + llm_s;
  o.stall_s = o.resume_t - detach_t;
  job.transition(MigrationState::Complete, o.complete_t, "complete");
  job.timeline.push_back({"resume", o.resume_t});

  job.kv_ssm_bytes += ssm;
  job.kv_llm_bytes += llm;
  o.bytes_total = job.bytes();
  o.transfer_s = o.complete_t - o.request_t;
  return o;
}

MigrationOutcome stop_the_world(MigrationJob& job, const LinkModel& link, double request_t, double detach_t) {
  if (job.state != MigrationState::Reserved) throw std::logic_error("migration requires a Reserved job");
  MigrationOutcome o;
  o.request_t = request_t;
  o.detach_t = detach_t;
  job.timeline.push_back({"detach", detach_t});
  o.handshake_s = link.handshake_s();
  const double start = detach_t + o.handshake_s;
  const auto bytes = job.bytes();
  const double end = start + link.copy_s(bytes) + link.transfer_s(bytes) + link.copy_s(bytes);
  job.transition(MigrationState::Stage1, start, "stage1_start");
  job.transition(MigrationState::Stage2SsmDone, end, "ssm_done");
  job.transition(MigrationState::Complete, end, "complete");
  job.timeline.push_back({"resume", end});
  o.resume_t = end;
  o.complete_t = end;
  o.stall_s = end - detach_t;
  o.bytes_total = bytes;
  o.transfer_s = end - request_t;
  return o;
}

MigrationOutcome execute_migration(MigrationJob& job, const LinkModel& link, const KvFootprint& kv,
                                   const SourceSchedule& src, double dst_draft_s, MigrationMode mode,
                                   double request_t) {
  link.validate();
  if (src.boundaries.size() != src.tokens.size()) throw std::invalid_argument("schedule sizes differ");
  auto detach_after = [&](double t, std::int64_t& tokens) {
    tokens = 0;
    for (std::size_t i = 0; i < src.boundaries.size(); ++i) {
      if (src.boundaries[i] <= request_t) continue;
      tokens += src.tokens[i];
      if (src.boundaries[i] >= t) return src.boundaries[i];
    }
    return t;
  };
  std::int64_t residual = 0;
  if (mode == MigrationMode::StopTheWorld) {
    const double detach = detach_after(request_t, residual);
    job.snapshot_tokens += residual;
    job.kv_ssm_bytes = kv.ssm_bytes(job.snapshot_tokens);
    job.kv_llm_bytes = kv.llm_bytes(job.snapshot_tokens);
    auto o = stop_the_world(job, link, request_t, detach);
    o.residual_tokens = residual;
    return o;
  }
  const double stage1_end = begin_stage1(job, link, request_t);
  const double detach = detach_after(stage1_end, residual);
  return finish_stage2(job, link, kv, detach, residual, dst_draft_s);
}

// ---- KV store and packed layout ----------------------------------------------------------

void KvStore::append_tokens(SampleId sample, std::int64_t tokens, std::uint64_t seed) {
  for (int m = 0; m < 2; ++m) {
    const auto model = static_cast<KvModel>(m);
    for (int l = 0; l < layers(model); ++l) {
      auto& v = data_[{m, l, sample}];
      const auto base = static_cast<std::int64_t>(v.size());
      for (std::int64_t k = 0; k < tokens; ++k) {
        v.push_back(derive_seed({seed, sample, static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(l),
                                 static_cast<std::uint64_t>(base + k)}));
      }
    }
  }
}

void KvStore::append_words(KvModel m, int layer, SampleId sample, std::span<const std::uint64_t> words) {
  if (layer < 0 || layer >= layers(m)) throw LayoutMismatch("layer index outside the store's model depth");
  auto& v = data_[{static_cast<int>(m), layer, sample}];
  v.insert(v.end(), words.begin(), words.end());
}

std::int64_t KvStore::token_count(KvModel m, int layer, SampleId sample) const {
  const auto it = data_.find({static_cast<int>(m), layer, sample});
  return it == data_.end() ? 0 : static_cast<std::int64_t>(it->second.size());
}

std::span<const std::uint64_t> KvStore::words(KvModel m, int layer, SampleId sample) const {
  const auto it = data_.find({static_cast<int>(m), layer, sample});
  if (it == data_.end()) return {};
  return it->second;
}

std::uint64_t KvStore::content_hash(SampleId sample) const {
  std::uint64_t h = kFnvOffset;
  for (int m = 0; m < 2; ++m) {
    for (int l = 0; l < layers(static_cast<KvModel>(m)); ++l) {
      const auto w = words(static_cast<KvModel>(m), l, sample);
      h = fnv_mix(h, static_cast<std::uint64_t>(w.size()));
      for (auto x : w) h = fnv_mix(h, x);
    }
  }
  return h;
}

std::vector<SampleId> KvStore::samples() const {
  std::vector<SampleId> out;
  for (const auto& [k, v] : data_) out.push_back(std::get<2>(k));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void KvStore::erase(SampleId sample) {
  std::erase_if(data_, [&](const auto& kv) { return std::get<2>(kv.first) == sample; });
}

std::uint64_t layout_checksum(const KvBufferLayout& layout) {
  std::uint64_t h = kFnvOffset;
  for (const auto& s : layout.segments) {
    h = fnv_mix(h, static_cast<std::uint64_t>(s.model));
    h = fnv_mix(h, static_cast<std::uint64_t>(s.layer));
    h = fnv_mix(h, s.sample);
    h = fnv_mix(h, static_cast<std::uint64_t>(s.first_token));
    h = fnv_mix(h, static_cast<std::uint64_t>(s.offset));
    h = fnv_mix(h, static_cast<std::uint64_t>(s.length));
  }
  for (auto w : layout.buffer) h = fnv_mix(h, w);
  return h;
}

KvBufferLayout pack_buffer(const KvStore& src, std::span<const SampleId> samples, KvRange range) {
  std::vector<SampleId> order(samples.begin(), samples.end());
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());

  KvBufferLayout layout;
  std::int64_t total = 0;
  for (int m = 0; m < 2; ++m) {
    for (int l = 0; l < src.layers(static_cast<KvModel>(m)); ++l) {
      for (SampleId s : order) {
        const auto have = src.token_count(static_cast<KvModel>(m), l, s);
        const auto end = std::min(have, range.end.value_or(have));
        if (end > range.begin) total += end - range.begin;
      }
    }
  }
  layout.buffer.reserve(static_cast<std::size_t>(total));
  for (int m = 0; m < 2; ++m) {
    const auto model = static_cast<KvModel>(m);
    for (int l = 0; l < src.layers(model); ++l) {
      for (SampleId s : order) {
        const auto w = src.words(model, l, s);
        const auto have = static_cast<std::int64_t>(w.size());
        const auto end = std::min(have, range.end.value_or(have));
        if (end <= range.begin) continue;
        KvSegment seg{model, l, s, range.begin, static_cast<std::int64_t>(layout.buffer.size()), end - range.begin};
        layout.buffer.insert(layout.buffer.end(), w.begin() + range.begin, w.begin() + end);
        layout.segments.push_back(seg);
      }
    }
  }
  layout.checksum = layout_checksum(layout);
  return layout;
}

void unpack_buffer(const KvBufferLayout& layout, KvStore& dst) {
  if (layout_checksum(layout) != layout.checksum) throw LayoutMismatch("packed KV buffer checksum mismatch");
  std::int64_t cursor = 0;
  for (const auto& s : layout.segments) {
    if (s.offset != cursor || s.length < 0 || s.offset + s.length > layout.total_words()) {
      throw LayoutMismatch("packed KV segments are not contiguous");
    }
    if (dst.token_count(s.model, s.layer, s.sample) != s.first_token) {
      throw LayoutMismatch("packed KV segment does not continue the destination cache");
    }
    cursor += s.length;
  }
  if (cursor != layout.total_words()) throw LayoutMismatch("packed KV buffer has trailing words");
  for (const auto& s : layout.segments) {
    dst.append_words(s.model, s.layer, s.sample,
                     std::span<const std::uint64_t>(layout.buffer.data() + s.offset, static_cast<std::size_t>(s.length)));
  }
}

}  // namespace specsim
