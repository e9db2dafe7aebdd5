// Copyright 2026 The iotlbsim Authors.
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


#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "iotlbsim/devices.hpp"

namespace iotlbsim {
namespace {

constexpr DeviceId kMonitor{0};
constexpr DeviceId kGpu{1};
constexpr DeviceId kNic{2};

Platform reference_platform(bool flush = true) {
  TlbConfig c;
  c.device_domains = {{kMonitor, DomainId{0}}, {kGpu, DomainId{1}}, {kNic, DomainId{2}}};
  return Platform(c, LatencyModel{}, flush);
}

const Threshold kThreshold{205};

TEST(MonitorProgram, PrimeThenProbeTargetHits) {
  Platform p = reference_platform();
  Monitor m(kMonitor, 1);
  MonitorProgram prog;
  prog.instructions = {MonitorInstruction::target_prime(), MonitorInstruction::target_probe()};
  prog.target = PageAddress{0x1234};
  const auto records = m.run_program(p, prog);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(records[0].instruction, 1u);
  ASSERT_EQ(records[0].latencies.size(), 1u);
  EXPECT_EQ(classify(records[0].latencies[0], kThreshold), AccessOutcome::Hit);
}

TEST(MonitorProgram, FullEvictionSetEvictsTarget) {
  Platform p = reference_platform();
  p.flush_all();
  Monitor m(kMonitor, 1);
  Rng rng(2);
  MonitorProgram prog;
  prog.instructions = {MonitorInstruction::target_prime(), MonitorInstruction::evset_prime(),
                       MonitorInstruction::target_probe()};
  prog.target = PageAddress{1};
  prog.evset_prime_addrs = draw_distinct_pages(118, rng);
  const auto records = m.run_program(p, prog);
  ASSERT_EQ(records.size(), 1u);
  EXPECT_EQ(classify(records[0].latencies[0], kThreshold), AccessOutcome::Miss);
}

TEST(MonitorProgram, WaitOnlyAdvancesTime) {
  Platform p = reference_platform();
  Monitor m(kMonitor, 1);
  MonitorProgram prog;
  prog.instructions = {MonitorInstruction::wait(100)};
  EXPECT_TRUE(m.run_program(p, prog).empty());
  EXPECT_EQ(p.clock.now(), Nanos{500});
  EXPECT_EQ(p.tlb.occupancy().total, 0u);
}

TEST(MonitorProgram, Validation) {
  MonitorProgram prog;
  prog.instructions.assign(8, MonitorInstruction::wait(1));
  try {
    prog.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ProgramTooLong);
  }
  prog.instructions.assign(7, MonitorInstruction::wait(1));
  EXPECT_NO_THROW(prog.validate());
  prog.instructions = {MonitorInstruction::evset_probe()};
  try {
    prog.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MissingOperand);
  }
  prog.instructions = {MonitorInstruction::target_probe()};
  EXPECT_THROW(prog.validate(), Error);
}

TEST(MonitorProgram, AggregateModeSumsOneRecord) {
  Platform p = reference_platform();
  Monitor m(kMonitor, 1);
  Rng rng(3);
  MonitorProgram prog;
  prog.instructions = {MonitorInstruction::evset_prime(), MonitorInstruction::evset_probe()};
  prog.evset_prime_addrs = draw_distinct_pages(10, rng);
  prog.evset_probe_addrs = prog.evset_prime_addrs;
  prog.probe_mode = ProbeMode::Aggregate;
  const auto records = m.run_program(p, prog);
  ASSERT_EQ(records.size(), 1u);
  ASSERT_EQ(records[0].latencies.size(), 1u);
  // Ten hits, each within eight deviations of a hit peak.
  EXPECT_GE(records[0].latencies[0], 10u * 136u);
  EXPECT_LE(records[0].latencies[0], 10u * 209u);
}

TEST(MonitorProgram, ShuffledProbeReportsInSetOrder) {
  TlbConfig c;
  c.ways = 16;
  c.device_domains = {{kMonitor, DomainId{0}}};
  Platform p(c, LatencyModel{}, true);
  Monitor m(kMonitor, 9);
  std::vector<PageAddress> pages;
  for (std::uint64_t i = 0; i < 8; ++i) pages.push_back(PageAddress{100 + i});
  m.prime(p, std::span<const PageAddress>(pages).first(4));
  const auto lat = m.probe_each(p, pages, /*shuffle=*/true);
  for (std::size_t i = 0; i < pages.size(); ++i)
    EXPECT_EQ(classify(lat[i], kThreshold), i < 4 ? AccessOutcome::Hit : AccessOutcome::Miss) << i;
}

TEST(MonitorProgram, ReadsAdvanceClockBySampledLatency) {
  Platform p = reference_platform();
  Monitor m(kMonitor, 4);
  const Cycles c = m.read(p, PageAddress{5});
  EXPECT_EQ(p.clock.now(), cycles_to_time(c));
}

TEST(QuerySender, FootprintIsFixedDistinctAndIgnoresRows) {
  QuerySenderConfig cfg;
  cfg.device = kGpu;
  cfg.seed = 7;
  QuerySender s(cfg);
  ASSERT_EQ(s.footprint().size(), 19u);
  std::set<PageAddress> distinct(s.footprint().begin(), s.footprint().end());
  EXPECT_EQ(distinct.size(), 19u);

  Platform a = reference_platform();
  Platform b = reference_platform();
  s.run_query(a, 0);
  s.run_query(b, 409600);
  auto ea = a.tlb.entries();
  auto eb = b.tlb.entries();
  ASSERT_EQ(ea.size(), eb.size());
  for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_EQ(ea[i].page, eb[i].page);
  EXPECT_EQ(a.clock.now(), std::chrono::milliseconds(300));
  s.run_query(a, 1);
  EXPECT_EQ(a.tlb.occupancy().total, 19u);
  EXPECT_EQ(a.clock.now(), std::chrono::milliseconds(600));
}

TEST(QuerySender, ZeroFootprintChangesNothingButTime) {
  QuerySenderConfig cfg;
  cfg.device = kGpu;
  cfg.footprint_pages = 0;
  QuerySender s(cfg);
  Platform p = reference_platform();
  s.run_query(p);
  EXPECT_EQ(p.tlb.occupancy().total, 0u);
}

TEST(QuerySender, QueryEvictsFootprintManyMonitorEntries) {
  Platform p = reference_platform();
  Monitor m(kMonitor, 1);
  Rng rng(11);
  const auto evset = draw_distinct_pages(118, rng);
  p.flush_all();
  m.prime(p, evset);
  QuerySenderConfig cfg;
  cfg.device = kGpu;
  cfg.seed = 5;
  QuerySender s(cfg);
  s.run_query(p);
  std::size_t evicted = 0;
  for (PageAddress a : evset) evicted += p.tlb.contains(DomainId{0}, a) ? 0 : 1;
  EXPECT_EQ(evicted, 19u);
  EXPECT_EQ(p.tlb.evictions(kGpu, DomainId{0}), 19u);
}

TEST(NicSender, RebootRemapsBuffersAroundPinnedOffset) {
  NicSenderConfig cfg;
  cfg.device = kNic;
  cfg.reboot_seed = 3;
  NicSender nic(cfg);
  std::set<std::uint64_t> regions;
  for (int boot = 0; boot < 50; ++boot) {
    if (boot) nic.reboot();
    const auto pages = nic.startup_buffer_pages();
    ASSERT_EQ(pages.front(), nic.pinned_page());
    EXPECT_EQ(nic.pinned_page().number % cfg.region_alignment_pages, cfg.pinned_offset);
    EXPECT_GE(pages.size(), 1u + cfg.buffer_count_min);
    EXPECT_LE(pages.size(), 1u + cfg.buffer_count_max);
    regions.insert(nic.pinned_page().number);
  }
  EXPECT_GT(regions.size(), 40u);

  NicSenderConfig other = cfg;
  other.reboot_seed = 4;
  NicSender nic2(other);
  NicSender nic3(cfg);
  EXPECT_NE(nic2.pinned_page(), nic3.pinned_page());
}

TEST(NicSender, TrafficAlwaysTouchesPinnedPage) {
  TlbConfig c;
  c.num_sets = 128;
  c.ways = 1;
  c.index_fn = IndexFunction::ModuloLowBits;
  c.device_domains = {{kMonitor, DomainId{0}}, {kNic, DomainId{2}}};
  Platform p(c, LatencyModel{}, false);
  NicSenderConfig cfg;
  cfg.device = kNic;
  NicSender nic(cfg);
  nic.on_packet(p);
  EXPECT_TRUE(p.tlb.contains(DomainId{2}, nic.pinned_page()));
  EXPECT_EQ(p.tlb.evictions(kNic, DomainId{0}), 0u);
}

TEST(FlushSender, OneFlushesZeroSleeps) {
  Platform p = reference_platform();
  Monitor m(kMonitor, 1);
  FlushSender s;
  const PageAddress target{77};
  m.read(p, target);
  std::vector<AccessOutcome> outcomes;
  for (bool bit : {true, false, true}) {
    const Nanos before = p.clock.now();
    s.send_bit(bit, p);
    EXPECT_EQ(p.clock.now() - before, std::chrono::microseconds(17));
    outcomes.push_back(classify(m.read(p, target), kThreshold));
  }
  EXPECT_EQ(outcomes, (std::vector<AccessOutcome>{AccessOutcome::Miss, AccessOutcome::Hit, AccessOutcome::Miss}));
}

TEST(FlushSender, NeedsFlushCapablePlatform) {
  Platform p = reference_platform(false);
  FlushSender s;
  try {
    s.send_bit(true, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::FlushUnavailable);
  }
  EXPECT_NO_THROW(s.send_bit(false, p));
}

}  // namespace
}  // namespace iotlbsim
