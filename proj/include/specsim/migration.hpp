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

#pragma once

// Two-stage KV migration between generation instances.
//
// Stage 1 ships the snapshot of verified KV (SSM and LLM) through one packed
// buffer while the source keeps computing. At the next source step boundary
// the sample detaches; stage 2 exchanges the residual size, sends the residual
// SSM KV, then streams the residual LLM KV while the destination drafts.
// Verification on the destination waits for the LLM residual.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "specsim/workload.hpp"

namespace specsim {

struct LinkModel {
  double bandwidth = 16e9;        // bytes/s
  double latency = 5e-6;          // s per transfer
  double copy_bandwidth = 200e9;  // bytes/s for pack and unpack copies

  void validate() const;
  double transfer_s(std::int64_t bytes) const noexcept;
  double copy_s(std::int64_t bytes) const noexcept;
  /// Request plus acknowledgement.
  double handshake_s() const noexcept { return 2.0 * latency; }
};

struct KvFootprint {
  int ssm_layers = 1;
  int llm_layers = 32;
  std::int64_t ssm_bytes_per_layer_token = 256;
  std::int64_t llm_bytes_per_layer_token = 256;  // 2 tensors x 128

  std::int64_t ssm_bytes(std::int64_t tokens) const noexcept { return tokens * ssm_layers * ssm_bytes_per_layer_token; }
  std::int64_t llm_bytes(std::int64_t tokens) const noexcept { return tokens * llm_layers * llm_bytes_per_layer_token; }
  std::int64_t bytes(std::int64_t tokens) const noexcept { return ssm_bytes(tokens) + llm_bytes(tokens); }
};

enum class MigrationState { Requested, Reserved, Stage1, Stage2SsmDone, Complete, Aborted };
const char* to_string(MigrationState s) noexcept;

struct TimelineEvent {
  std::string event;
  double t = 0.0;
};

struct MigrationJob {
  std::uint64_t id = 0;
  SampleId sample = 0;
  int src = 0;
  int dst = 0;
  std::int64_t snapshot_tokens = 0;
  std::int64_t kv_ssm_bytes = 0;
  std::int64_t kv_llm_bytes = 0;
  std::int64_t reserved_bytes = 0;
  MigrationState state = MigrationState::Requested;
  std::vector<TimelineEvent> timeline;

  static MigrationJob make(std::uint64_t id, SampleId sample, int src, int dst, std::int64_t tokens,
                           const KvFootprint& kv);
  std::int64_t bytes() const noexcept { return kv_ssm_bytes + kv_llm_bytes; }
  /// Moves to `next`; throws std::logic_error on an out-of-order transition.
  void transition(MigrationState next, double t, const char* event);
  std::optional<double> time_of(const std::string& event) const;
};

/// Free KV memory on a destination instance.
class DestinationMemory {
 public:
  explicit DestinationMemory(std::int64_t capacity) : capacity_(capacity) {}

  std::int64_t capacity() const noexcept { return capacity_; }
  std::int64_t reserved() const noexcept { return reserved_; }
  std::int64_t free() const noexcept { return capacity_ - reserved_; }

  bool try_reserve(std::int64_t bytes) noexcept;
  void release(std::int64_t bytes) noexcept;

 private:
  std::int64_t capacity_;
  std::int64_t reserved_ = 0;
};

/// Reserves the job's bytes plus `headroom_bytes` for tokens verified during
/// stage 1, or aborts the job. Requested -> Reserved | Aborted.
MigrationState handshake(MigrationJob& job, DestinationMemory& dst, double t, std::int64_t headroom_bytes = 0);

/// Releases whatever the job still holds on the destination.
void abort_reservation(MigrationJob& job, DestinationMemory& dst, double t);

enum class MigrationMode { Overlapped, StopTheWorld };

struct MigrationOutcome {
  std::int64_t bytes_total = 0;
  std::int64_t residual_tokens = 0;
  double request_t = 0.0;
  double detach_t = 0.0;
  double resume_t = 0.0;    // sample executable on the destination
  double complete_t = 0.0;  // all bytes delivered
  double stall_s = 0.0;     // sample advances on neither instance
  double handshake_s = 0.0;
  double residual_ssm_s = 0.0;
  double gate_excess_s = 0.0;  // LLM residual outlasting one destination draft
  double transfer_s = 0.0;     // wall time from request to completion
};

/// Stage 1 from a Reserved job at `t`: the initial reservation handshake
/// overlaps with source compute, then the snapshot is packed, sent and
/// unpacked. Returns the stage-1 end time.
double begin_stage1(MigrationJob& job, const LinkModel& link, double t);

/// Stage 2 after the sample detached from the source at `detach_t` with
/// `residual_tokens` verified since the snapshot.
MigrationOutcome finish_stage2(MigrationJob& job, const LinkModel& link, const KvFootprint& kv, double detach_t,
                               std::int64_t residual_tokens, double dst_draft_s);

/// Freezes the sample at `detach_t` and ships everything after a handshake.
MigrationOutcome stop_the_world(MigrationJob& job, const LinkModel& link, double request_t, double detach_t);

/// Source steps: boundary times (ascending) and tokens verified by the
/// migrating sample in the step that ends at each boundary.
struct SourceSchedule {
  std::vector<double> boundaries;
  std::vector<int> tokens;
};

/// Runs a Reserved job start to finish against a known source schedule; a
/// schedule that ends before stage 1 does detaches at stage-1 end.
MigrationOutcome execute_migration(MigrationJob& job, const LinkModel& link, const KvFootprint& kv,
                                   const SourceSchedule& src, double dst_draft_s, MigrationMode mode,
                                   double request_t);

/// Adjusts the reservation to the delivered bytes on Complete.
void settle_reservation(MigrationJob& job, DestinationMemory& dst, std::int64_t delivered_bytes);

// Synthetic KV content store and the packed buffer layout.

enum class KvModel : int { Ssm = 0, Llm = 1 };

class KvStore {
 public:
  KvStore(int ssm_layers = 1, int llm_layers = 32) : ssm_layers_(ssm_layers), llm_layers_(llm_layers) {}

  int layers(KvModel m) const noexcept { return m == KvModel::Ssm ? ssm_layers_ : llm_layers_; }

  /// Appends `tokens` synthetic words to every layer of both models; content
  /// is a function of (seed, sample, model, layer, position).
  void append_tokens(SampleId sample, std::int64_t tokens, std::uint64_t seed);
  void append_words(KvModel m, int layer, SampleId sample, std::span<const std::uint64_t> words);

  std::int64_t token_count(KvModel m, int layer, SampleId sample) const;
  std::span<const std::uint64_t> words(KvModel m, int layer, SampleId sample) const;
  /// FNV-1a over every layer of the sample, SSM first.
  std::uint64_t content_hash(SampleId sample) const;
  std::vector<SampleId> samples() const;
  void erase(SampleId sample);
  bool empty() const noexcept { return data_.empty(); }

 private:
  using Key = std::tuple<int, int, SampleId>;
  int ssm_layers_;
  int llm_layers_;
  std::map<Key, std::vector<std::uint64_t>> data_;
};

struct KvSegment {
  KvModel model = KvModel::Ssm;
  int layer = 0;
  SampleId sample = 0;
  std::int64_t first_token = 0;  // position of the first packed token
  std::int64_t offset = 0;       // in words
  std::int64_t length = 0;       // in words (one word per token)
};

struct KvBufferLayout {
  std::vector<KvSegment> segments;
  std::vector<std::uint64_t> buffer;
  std::uint64_t checksum = 0;

  std::int64_t total_words() const noexcept { return static_cast<std::int64_t>(buffer.size()); }
};

/// Token range [begin, end) of each sample; end = nullopt packs to the end.
struct KvRange {
  std::int64_t begin = 0;
  std::optional<std::int64_t> end;
};

/// One contiguous buffer ordered model (SSM, LLM) -> layer -> sample.
KvBufferLayout pack_buffer(const KvStore& src, std::span<const SampleId> samples, KvRange range = {});
std::uint64_t layout_checksum(const KvBufferLayout& layout);
/// Appends every segment to `dst`. Throws LayoutMismatch when the checksum
/// fails, segments are not contiguous, or a segment does not start at the
/// destination's current token count.
void unpack_buffer(const KvBufferLayout& layout, KvStore& dst);

}  // namespace specsim
