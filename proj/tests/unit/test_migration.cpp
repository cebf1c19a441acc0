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

#include <doctest.h>

#include <algorithm>

#include "specsim/error.hpp"
#include "specsim/migration.hpp"
#include "specsim/rng.hpp"

using namespace specsim;

namespace {

SourceSchedule steady_source(double first, double step, int count, int tokens_per_step) {
  SourceSchedule s;
  for (int i = 0; i < count; ++i) {
    s.boundaries.push_back(first + step * i);
    s.tokens.push_back(tokens_per_step);
  }
  return s;
}

MigrationJob reserved_job(std::int64_t tokens, const KvFootprint& kv, DestinationMemory& mem) {
  auto job = MigrationJob::make(1, 7, 0, 1, tokens, kv);
  REQUIRE(handshake(job, mem, 0.0) == MigrationState::Reserved);
  return job;
}

}  // namespace

TEST_CASE("handshake accounting") {
  const KvFootprint kv;
  DestinationMemory mem(100'000'000);
  auto job = MigrationJob::make(1, 3, 0, 1, 1000, kv);
  CHECK(job.bytes() == 1000 * (256 + 32 * 256));
  CHECK(handshake(job, mem, 0.5) == MigrationState::Reserved);
  CHECK(mem.free() == 100'000'000 - job.bytes());
  CHECK(job.reserved_bytes == job.bytes());

  DestinationMemory small(1000);
  auto big = MigrationJob::make(2, 4, 0, 1, 1000, kv);
  CHECK(handshake(big, small, 0.5) == MigrationState::Aborted);
  CHECK(small.free() == 1000);
  CHECK(big.time_of("aborted").value() == 0.5);
}

TEST_CASE("two concurrent jobs on a full destination") {
  const KvFootprint kv;
  auto a = MigrationJob::make(1, 1, 0, 2, 600, kv);
  auto b = MigrationJob::make(2, 2, 1, 2, 600, kv);
  DestinationMemory mem(a.bytes() + b.bytes() - 1);
  CHECK(handshake(a, mem, 1.0) == MigrationState::Reserved);
  CHECK(handshake(b, mem, 1.0) == MigrationState::Aborted);
  CHECK(mem.reserved() == a.bytes());
  abort_reservation(a, mem, 2.0);
  CHECK(mem.reserved() == 0);
  CHECK(a.state == MigrationState::Aborted);
}

TEST_CASE("state transitions follow the stage order") {
  const KvFootprint kv;
  auto job = MigrationJob::make(1, 1, 0, 1, 10, kv);
  CHECK_THROWS_AS(job.transition(MigrationState::Stage1, 0.0, "x"), std::logic_error);
  job.transition(MigrationState::Reserved, 0.0, "reserved");
  CHECK_THROWS_AS(job.transition(MigrationState::Complete, 0.0, "x"), std::logic_error);
  job.transition(MigrationState::Stage1, 0.0, "stage1_start");
  CHECK_THROWS_AS(job.transition(MigrationState::Aborted, 0.0, "x"), std::logic_error);
  job.transition(MigrationState::Stage2SsmDone, 0.0, "ssm_done");
  job.transition(MigrationState::Complete, 0.0, "complete");
  CHECK_THROWS_AS(job.transition(MigrationState::Complete, 0.0, "x"), std::logic_error);
  CHECK_THROWS(begin_stage1(job, LinkModel{}, 0.0));
}

TEST_CASE("prompt-only sample stalls for one round trip plus residual SSM") {
  const KvFootprint kv;
  const LinkModel link;
  DestinationMemory mem(1LL << 30);
  auto job = reserved_job(128, kv, mem);
  const auto src = steady_source(0.03, 0.03, 10, 1);
  const auto o = execute_migration(job, link, kv, src, 0.004, MigrationMode::Overlapped, 0.0);
  CHECK(o.gate_excess_s == 0.0);
  CHECK(o.stall_s == doctest::Approx(link.handshake_s() + o.residual_ssm_s).epsilon(1e-12));
  CHECK(o.residual_ssm_s == doctest::Approx(kv.ssm_bytes(o.residual_tokens) / link.bandwidth));
  CHECK(o.stall_s < 0.02);
  CHECK(job.state == MigrationState::Complete);
}

TEST_CASE("infinite bandwidth leaves the handshake") {
  const KvFootprint kv;
  LinkModel link;
  link.bandwidth = 1e30;
  link.copy_bandwidth = 1e30;
  DestinationMemory mem(1LL << 30);
  auto job = reserved_job(1024, kv, mem);
  const auto o = execute_migration(job, link, kv, steady_source(0.01, 0.03, 10, 3), 0.004,
                                   MigrationMode::Overlapped, 0.0);
  CHECK(o.stall_s == doctest::Approx(link.handshake_s()).epsilon(1e-9));
}

TEST_CASE("overlap against stop-the-world on a 1024-token sample") {
  const KvFootprint kv;
  const LinkModel link;
  DestinationMemory m1(1LL << 30);
  DestinationMemory m2(1LL << 30);
  const auto src = steady_source(0.015, 0.03, 20, 3);
  auto a = reserved_job(1024, kv, m1);
  auto b = reserved_job(1024, kv, m2);
  const auto over = execute_migration(a, link, kv, src, 0.004, MigrationMode::Overlapped, 0.0);
  const auto stw = execute_migration(b, link, kv, src, 0.004, MigrationMode::StopTheWorld, 0.0);
  CHECK(over.stall_s <= 0.05 * stw.stall_s);
  CHECK(over.stall_s <= stw.stall_s);
  // stop-the-world pays a handshake plus copy, transfer and copy of everything
  const auto bytes = kv.bytes(1024 + 3);
  CHECK(stw.stall_s == doctest::Approx(link.handshake_s() + 2 * link.copy_s(bytes) + link.transfer_s(bytes)));
  // the sample is never live on both sides
  CHECK(over.resume_t >= over.detach_t);
  CHECK(over.detach_t >= a.time_of("stage1_end").value());
  CHECK(over.bytes_total == kv.bytes(1024 + over.residual_tokens));
}

TEST_CASE("slow link gates verification on the LLM residual") {
  const KvFootprint kv;
  LinkModel link;
  link.bandwidth = 1e7;
  DestinationMemory mem(1LL << 30);
  auto job = reserved_job(64, kv, mem);
  const auto o = execute_migration(job, link, kv, steady_source(0.01, 0.03, 2000, 4), 0.004,
                                   MigrationMode::Overlapped, 0.0);
  CHECK(o.gate_excess_s > 0.0);
  CHECK(o.stall_s == doctest::Approx(o.handshake_s + o.residual_ssm_s + o.gate_excess_s).epsilon(1e-12));
  const double llm_s = link.transfer_s(kv.llm_bytes(o.residual_tokens));
  CHECK(o.complete_t == doctest::Approx(o.detach_t + o.handshake_s + o.residual_ssm_s + llm_s).epsilon(1e-12));
}

TEST_CASE("reservation settles to the delivered bytes") {
  const KvFootprint kv;
  const LinkModel link;
  DestinationMemory mem(1LL << 30);
  auto job = MigrationJob::make(1, 1, 0, 1, 500, kv);
  REQUIRE(handshake(job, mem, 0.0, kv.bytes(20)) == MigrationState::Reserved);
  const auto o = execute_migration(job, link, kv, steady_source(0.01, 0.03, 10, 2), 0.004,
                                   MigrationMode::Overlapped, 0.0);
  settle_reservation(job, mem, o.bytes_total);
  CHECK(mem.reserved() == o.bytes_total);
  CHECK(job.reserved_bytes == o.bytes_total);
}

TEST_CASE("randomized jobs: overlap never loses") {
  SplitMix64 rng(31);
  const KvFootprint kv;
  for (int trial = 0; trial < 500; ++trial) {
    LinkModel link;
    link.bandwidth = 1e8 * (1.0 + 999.0 * rng.uniform());
    link.latency = 1e-6 * (1.0 + 99.0 * rng.uniform());
    const auto tokens = static_cast<std::int64_t>(16 + rng.uniform() * 4000);
    const double step = 0.01 + 0.05 * rng.uniform();
    const auto src = steady_source(step * rng.uniform(), step, 5000, 1 + static_cast<int>(rng.uniform() * 4));
    DestinationMemory m1(1LL << 40);
    DestinationMemory m2(1LL << 40);
    auto a = reserved_job(tokens, kv, m1);
    auto b = reserved_job(tokens, kv, m2);
    const auto over = execute_migration(a, link, kv, src, 0.004, MigrationMode::Overlapped, 0.0);
    const auto stw = execute_migration(b, link, kv, src, 0.004, MigrationMode::StopTheWorld, 0.0);
    CHECK(over.stall_s <= stw.stall_s);
    CHECK(over.stall_s > 0.0);
  }
}

TEST_CASE("packed layout order and segment count") {
  KvStore store;
  store.append_tokens(5, 10, 1);
  const std::vector<SampleId> ids{5};
  const auto layout = pack_buffer(store, ids);
  REQUIRE(layout.segments.size() == 33);
  CHECK(layout.segments[0].model == KvModel::Ssm);
  for (std::size_t i = 1; i < 33; ++i) {
    CHECK(layout.segments[i].model == KvModel::Llm);
    CHECK(layout.segments[i].layer == static_cast<int>(i - 1));
  }
  std::int64_t off = 0;
  for (const auto& s : layout.segments) {
    CHECK(s.offset == off);
    CHECK(s.length == 10);
    off += s.length;
  }
  CHECK(layout.total_words() == 330);

  KvStore two;
  two.append_tokens(9, 3, 1);
  two.append_tokens(2, 4, 1);
  const std::vector<SampleId> both{9, 2};
  const auto l2 = pack_buffer(two, both);
  REQUIRE(l2.segments.size() == 66);
  CHECK(l2.segments[0].sample == 2);
  CHECK(l2.segments[1].sample == 9);
  CHECK(l2.segments[2].layer == 0);
  CHECK(l2.segments[2].model == KvModel::Llm);
}

TEST_CASE("empty state round trip") {
  KvStore src;
  const std::vector<SampleId> none;
  const auto layout = pack_buffer(src, none);
  CHECK(layout.segments.empty());
  CHECK(layout.buffer.empty());
  KvStore dst;
  unpack_buffer(layout, dst);
  CHECK(dst.empty());
}

TEST_CASE("corrupted or misplaced buffers are rejected") {
  KvStore src;
  src.append_tokens(1, 8, 2);
  const std::vector<SampleId> ids{1};
  auto layout = pack_buffer(src, ids);
  auto bad = layout;
  bad.buffer[3] ^= 1;
  KvStore dst;
  CHECK_THROWS_AS(unpack_buffer(bad, dst), LayoutMismatch);
  CHECK(dst.empty());
  // a residual that does not continue the destination's cache
  const auto tail = pack_buffer(src, ids, {4, std::nullopt});
  CHECK_THROWS_AS(unpack_buffer(tail, dst), LayoutMismatch);
  unpack_buffer(layout, dst);
  CHECK(dst.content_hash(1) == src.content_hash(1));
}

TEST_CASE("two-stage round trip: snapshot then residual") {
  SplitMix64 rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    KvStore src;
    std::vector<SampleId> ids;
    const int count = 1 + static_cast<int>(rng.uniform() * 4);
    for (int i = 0; i < count; ++i) {
      const auto id = static_cast<SampleId>(rng.uniform() * 1000);
      src.append_tokens(id, static_cast<std::int64_t>(rng.uniform() * 64), trial);
      ids.push_back(id);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<std::int64_t> snapshot;
    for (auto id : ids) snapshot.push_back(src.token_count(KvModel::Llm, 0, id));

    KvStore dst;
    // stage 1: everything verified so far, one sample at a time
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::vector<SampleId> one{ids[i]};
      unpack_buffer(pack_buffer(src, one, {0, snapshot[i]}), dst);
    }
    // tokens verified while stage 1 was in flight
    for (auto id : ids) src.append_tokens(id, static_cast<std::int64_t>(rng.uniform() * 5), trial);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const std::vector<SampleId> one{ids[i]};
      unpack_buffer(pack_buffer(src, one, {snapshot[i], std::nullopt}), dst);
    }
    for (auto id : ids) {
      CHECK(dst.content_hash(id) == src.content_hash(id));
      for (int l = 0; l < 32; ++l) CHECK(dst.token_count(KvModel::Llm, l, id) == src.token_count(KvModel::Llm, l, id));
    }
  }
}
