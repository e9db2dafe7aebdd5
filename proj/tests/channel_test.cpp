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
#include <numeric>

#include "iotlbsim/channel.hpp"
#include "iotlbsim/scenarios.hpp"

namespace iotlbsim {
namespace {

TEST(BitMessage, HelloIsBigEndianAscii) {
  const BitMessage m = BitMessage::from_text("Hello");
  EXPECT_EQ(m.to_bits(), "0100100001100101011011000110110001101111");
  EXPECT_EQ(m.size(), 40u);
  EXPECT_EQ(m.to_text(), "Hello");
}

TEST(BitMessage, LittleEndianRoundTrip) {
  const BitMessage m = BitMessage::from_text("Hi", Endianness::Little);
  EXPECT_EQ(m.to_bits(), "0001001010010110");
  EXPECT_EQ(m.to_text(), "Hi");
}

TEST(BitMessage, FromBitsRejectsOtherCharacters) {
  EXPECT_EQ(BitMessage::from_bits("1011").to_bits(), "1011");
  EXPECT_THROW(BitMessage::from_bits("10a1"), Error);
}

TEST(BitMessage, Patterns) {
  EXPECT_EQ(BitMessage::constant(4, true).to_bits(), "1111");
  EXPECT_EQ(BitMessage::constant(3, false).to_bits(), "000");
  EXPECT_EQ(BitMessage::alternating(5).to_bits(), "10101");
}

TEST(BitMessage, LfsrHasMaximalPeriod) {
  const BitMessage m = BitMessage::lfsr(2 * 65535);
  const std::size_t ones = static_cast<std::size_t>(std::count(m.bits.begin(), m.bits.begin() + 65535, 1));
  EXPECT_EQ(ones, 32768u);
  EXPECT_TRUE(std::equal(m.bits.begin(), m.bits.begin() + 65535, m.bits.begin() + 65535));
  // No shorter period divides 65535 = 3 * 5 * 17 * 257.
  for (std::size_t p : {3u, 5u, 15u, 17u, 51u, 85u, 255u, 257u, 771u, 1285u, 3855u, 4369u, 13107u, 21845u}) {
    EXPECT_FALSE(std::equal(m.bits.begin(), m.bits.begin() + 65535, m.bits.begin() + static_cast<std::ptrdiff_t>(p)))
        << p;
  }
}

TEST(Measure, HammingAndThroughput) {
  TransmissionReport r;
  r.decoded = BitMessage::from_bits("1001");
  r.duration = std::chrono::seconds(2);
  const ChannelMetrics m = measure(r, BitMessage::from_bits("1111"));
  EXPECT_DOUBLE_EQ(m.bit_error_rate, 0.5);
  EXPECT_DOUBLE_EQ(m.throughput_bps, 2.0);

  TransmissionReport empty;
  const ChannelMetrics z = measure(empty, BitMessage{});
  EXPECT_EQ(z.bit_error_rate, 0.0);
  EXPECT_EQ(z.throughput_bps, 0.0);

  try {
    measure(r, BitMessage::from_bits("111"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LengthMismatch);
  }
}

TEST(ChannelConfig, Validation) {
  ChannelConfig c;
  c.decode_threshold_misses = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.slot_1_duration = Nanos{0};
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.sync_jitter_stddev = Nanos{-1};
  EXPECT_THROW(c.validate(), Error);
}

struct PpSetup {
  ExperimentConfig config = reference_profile();
  Platform platform = make_platform(config, 1);
  Monitor monitor{config.monitor.device, 1};
  QuerySender sender{query_sender_config(config, 1)};
};

TEST(PrimeProbe, UnverifiedSetIsRejected) {
  PpSetup s;
  EvictionSet bad;
  bad.addresses = {PageAddress{1}};
  try {
    pp_transmit(BitMessage::from_bits("1"), s.sender, s.monitor, s.platform, bad, threshold_of(s.config));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ChannelSetupError);
  }
}

TEST(PrimeProbe, FootprintOverlapGivesMissCounts) {
  PpSetup s;
  const EvictionSet evset = receiver_evset(s.config, s.platform, s.monitor, 1);
  ASSERT_TRUE(evset.verified);
  ASSERT_EQ(evset.addresses.size(), 118u);
  const BitMessage sent = BitMessage::from_text("Hello");
  const TransmissionReport r =
      pp_transmit(sent, s.sender, s.monitor, s.platform, evset, threshold_of(s.config));
  EXPECT_EQ(r.decoded, sent);
  EXPECT_EQ(r.bit_error_rate, 0.0);
  // A query brings 19 fresh pages into a fully associative 118-entry LRU
  // table, each displacing one eviction-set page; idle slots displace none.
  for (std::size_t i = 0; i < sent.size(); ++i)
    EXPECT_EQ(r.per_bit_miss_counts[i], sent.bits[i] ? 19u : 0u) << i;
}

TEST(PrimeProbe, EmptyMessageTakesNoTime) {
  PpSetup s;
  const EvictionSet evset = receiver_evset(s.config, s.platform, s.monitor, 1);
  const TransmissionReport r =
      pp_transmit(BitMessage{}, s.sender, s.monitor, s.platform, evset, threshold_of(s.config));
  EXPECT_TRUE(r.decoded.empty());
  EXPECT_EQ(r.throughput_bps, 0.0);
}

TEST(PrimeProbe, ThroughputFollowsOnesDensity) {
  const ExperimentConfig c = reference_profile();
  const double zeros = run_pp_channel(c, 1, BitMessage::constant(16, false)).report.throughput_bps;
  const double hello = run_pp_channel(c, 1, BitMessage::from_text("Hello")).report.throughput_bps;
  const double ones = run_pp_channel(c, 1, BitMessage::constant(16, true)).report.throughput_bps;
  EXPECT_GT(zeros, hello);
  EXPECT_GT(hello, ones);
  EXPECT_NEAR(ones, 1.0 / 0.3, 0.01);
}

TEST(PrimeProbe, PartitionedSenderCannotSignal) {
  ExperimentConfig c = reference_profile();
  c.tlb.way_partition = {{c.monitor.device, {}}, {c.query.device, {}}};
  for (std::uint32_t w = 0; w < c.tlb.ways; ++w)
    c.tlb.way_partition[w < 100 ? c.monitor.device : c.query.device].insert(w);
  c.evset.pool_size = 1024;
  const ChannelRun one = run_pp_channel(c, 3, BitMessage::constant(8, true));
  const ChannelRun zero = run_pp_channel(c, 3, BitMessage::constant(8, false));
  EXPECT_EQ(one.report.decoded, zero.report.decoded);
  EXPECT_EQ(one.report.per_bit_miss_counts, zero.report.per_bit_miss_counts);
}

struct FrSetup {
  ExperimentConfig config = reference_profile();
  Platform platform = make_platform(config, 1);
  Monitor monitor{config.monitor.device, 1};
  FlushSender sender{config.flush};
};

TEST(FlushReload, AlternatingWithoutJitterIsExact) {
  FrSetup s;
  const BitMessage sent = BitMessage::alternating(64);
  const TransmissionReport r =
      fr_transmit(sent, s.sender, s.monitor, s.platform, PageAddress{7}, threshold_of(s.config));
  EXPECT_EQ(r.decoded, sent);
  EXPECT_EQ(r.duration, Nanos{64 * 17000});
  EXPECT_NEAR(r.throughput_bps, 1e6 / 17.0, 1e-6);
}

TEST(FlushReload, AllZerosUsesSameSlots) {
  FrSetup s;
  const BitMessage sent = BitMessage::constant(100, false);
  const TransmissionReport r =
      fr_transmit(sent, s.sender, s.monitor, s.platform, PageAddress{7}, threshold_of(s.config));
  EXPECT_EQ(r.decoded, sent);
  EXPECT_EQ(r.duration, Nanos{100 * 17000});
}

TEST(FlushReload, JitterCausesErrors) {
  ExperimentConfig c = reference_profile();
  c.channel.config.sync_jitter_stddev = std::chrono::microseconds(8);
  const ChannelRun r = run_fr_channel(c, 1, BitMessage::lfsr(4000));
  EXPECT_GT(r.report.bit_error_rate, 0.1);
  EXPECT_LT(r.report.bit_error_rate, 0.5);
}

TEST(FlushReload, SetupErrors) {
  ExperimentConfig c = reference_profile();
  c.flush_available = false;
  c.evset.flush = false;
  Platform p = make_platform(c, 1);
  Monitor m(c.monitor.device, 1);
  FlushSender sender(c.flush);
  try {
    fr_transmit(BitMessage::from_bits("1"), sender, m, p, PageAddress{7}, Threshold{205});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ChannelSetupError);
  }
  FrSetup s;
  ChannelConfig cc;
  cc.slot_0_duration = std::chrono::microseconds(1);
  EXPECT_THROW(fr_transmit(BitMessage::from_bits("0"), s.sender, s.monitor, s.platform, PageAddress{7},
                           Threshold{205}, cc),
               Error);
}

}  // namespace
}  // namespace iotlbsim
