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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iotlbsim/clock.hpp"
#include "iotlbsim/devices.hpp"
#include "iotlbsim/error.hpp"
#include "iotlbsim/evset.hpp"
#include "iotlbsim/platform.hpp"
#include "iotlbsim/rng.hpp"
#include "iotlbsim/timing.hpp"

namespace iotlbsim {

enum class Endianness { Big, Little };

constexpr std::string_view to_string(Endianness e) {
  return e == Endianness::Big ? "big" : "little";
}

/// A covert-channel payload, one byte per bit (0 or 1).
struct BitMessage {
  std::vector<std::uint8_t> bits;
  Endianness endianness = Endianness::Big;

  std::size_t size() const { return bits.size(); }
  bool empty() const { return bits.empty(); }

  /// Eight bits per character; Big sends the most significant bit first.
  static BitMessage from_text(std::string_view text, Endianness e = Endianness::Big) {
    BitMessage m;
    m.endianness = e;
    m.bits.reserve(text.size() * 8);
    for (unsigned char c : text) {
      for (int i = 0; i < 8; ++i) {
        const int shift = e == Endianness::Big ? 7 - i : i;
        m.bits.push_back(static_cast<std::uint8_t>((c >> shift) & 1));
      }
    }
    return m;
  }

  /// Parses a string of '0' and '1' characters.
  static BitMessage from_bits(std::string_view digits) {
    BitMessage m;
    for (char c : digits) {
      if (c != '0' && c != '1')
        throw Error(Errc::InvalidConfig, "bit string may only contain 0 and 1");
      m.bits.push_back(c == '1' ? 1 : 0);
    }
    return m;
  }

  static BitMessage constant(std::size_t length, bool bit) {
    BitMessage m;
    m.bits.assign(length, bit ? 1 : 0);
    return m;
  }

  static BitMessage alternating(std::size_t length) {
    BitMessage m;
    for (std::size_t i = 0; i < length; ++i) m.bits.push_back(i % 2 == 0 ? 1 : 0);
    return m;
  }

  static BitMessage random(std::size_t length, Rng& rng) {
    BitMessage m;
    for (std::size_t i = 0; i < length; ++i) m.bits.push_back(static_cast<std::uint8_t>(rng() >> 63));
    return m;
  }

  /// Output of the maximal 16-bit Fibonacci LFSR x^16 + x^14 + x^13 + x^11 + 1
  /// (period 65535). A zero seed is replaced by 1.
  static BitMessage lfsr(std::size_t length, std::uint16_t seed = 0xACE1u) {
    BitMessage m;
    std::uint16_t s = seed == 0 ? 1 : seed;
    m.bits.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
      m.bits.push_back(static_cast<std::uint8_t>(s & 1u));
      const unsigned fb = (s ^ (s >> 2) ^ (s >> 3) ^ (s >> 5)) & 1u;
      s = static_cast<std::uint16_t>((s >> 1) | (fb << 15));
    }
    return m;
  }

  /// Inverse of from_text; trailing bits that do not fill a byte are dropped.
  std::string to_text() const {
    std::string out;
    for (std::size_t b = 0; b + 8 <= bits.size(); b += 8) {
      unsigned c = 0;
      for (int i = 0; i < 8; ++i) {
        const int shift = endianness == Endianness::Big ? 7 - i : i;
        c |= static_cast<unsigned>(bits[b + static_cast<std::size_t>(i)] & 1) << shift;
      }
      out.push_back(static_cast<char>(c));
    }
    return out;
  }

  std::string to_bits() const {
    std::string out;
    out.reserve(bits.size());
    for (std::uint8_t b : bits) out.push_back(b ? '1' : '0');
    return out;
  }

  friend bool operator==(const BitMessage& a, const BitMessage& b) { return a.bits == b.bits; }
};

enum class ChannelKind { PrimeProbe, FlushReload };

constexpr std::string_view to_string(ChannelKind k) {
  return k == ChannelKind::PrimeProbe ? "prime_probe" : "flush_reload";
}

/// Slot durations left empty are derived: a PrimeProbe 1-slot lasts as long
/// as the query, a 0-slot only as long as prime and probe take; FlushReload
/// slots default to the flush duration.
struct ChannelConfig {
  ChannelKind channel = ChannelKind::PrimeProbe;
  std::optional<Nanos> slot_1_duration;
  std::optional<Nanos> slot_0_duration;
  std::uint32_t decode_threshold_misses = 9;
  Nanos sync_jitter_stddev{0};
  std::uint64_t seed = 0;

  void validate() const {
    if (slot_1_duration && slot_1_duration->count() <= 0)
      throw Error(Errc::InvalidConfig, "slot_1_duration must be positive");
    if (slot_0_duration && slot_0_duration->count() <= 0)
      throw Error(Errc::InvalidConfig, "slot_0_duration must be positive");
    if (decode_threshold_misses < 1)
      throw Error(Errc::InvalidConfig, "decode_threshold_misses must be at least 1");
    if (sync_jitter_stddev.count() < 0)
      throw Error(Errc::InvalidConfig, "sync_jitter_stddev must be non-negative");
  }

  friend bool operator==(const ChannelConfig&, const ChannelConfig&) = default;
};

struct TransmissionReport {
  BitMessage decoded;
  std::vector<std::uint32_t> per_bit_miss_counts;
  Nanos duration{0};
  double throughput_bps = 0;
  double bit_error_rate = 0;
};

struct ChannelMetrics {
  double throughput_bps = 0;
  double bit_error_rate = 0;
};

/// Hamming distance over length, and length over simulated duration.
inline ChannelMetrics measure(const TransmissionReport& report, const BitMessage& sent) {
  if (report.decoded.size() != sent.size())
    throw Error(Errc::LengthMismatch, "decoded " + std::to_string(report.decoded.size()) +
                                          " bits, sent " + std::to_string(sent.size()));
  ChannelMetrics m;
  if (sent.empty()) return m;
  std::size_t errors = 0;
  for (std::size_t i = 0; i < sent.size(); ++i) errors += (report.decoded.bits[i] != sent.bits[i]) ? 1 : 0;
  m.bit_error_rate = static_cast<double>(errors) / static_cast<double>(sent.size());
  const double seconds = to_seconds(report.duration);
  m.throughput_bps = seconds > 0 ? static_cast<double>(sent.size()) / seconds : 0.0;
  return m;
}

inline void finish(TransmissionReport& report, const BitMessage& sent) {
  const ChannelMetrics m = measure(report, sent);
  report.throughput_bps = m.throughput_bps;
  report.bit_error_rate = m.bit_error_rate;
}

/// Peripheral-to-peripheral Prime+Probe. Per bit the monitor primes its
/// eviction set, the sender runs a query (1) or stays idle (0), and the
/// monitor probes every address and counts the misses.
///
/// The probe walks the set in reverse prime order. Pages still resident are
/// then refreshed before the evicted ones are reloaded, so each reload
/// displaces a sender entry instead of a not yet probed eviction-set page.
inline TransmissionReport pp_transmit(const BitMessage& message, QuerySender& sender,
                                      Monitor& monitor, Platform& platform,
                                      const EvictionSet& evset, Threshold threshold,
                                      const ChannelConfig& config = {}) {
  config.validate();
  if (!evset.verified || evset.addresses.empty())
    throw Error(Errc::ChannelSetupError, "Prime+Probe needs a verified eviction set");

  MonitorProgram prime;
  prime.instructions = {MonitorInstruction::evset_prime()};
  prime.evset_prime_addrs = evset.addresses;
  MonitorProgram probe;
  probe.instructions = {MonitorInstruction::evset_probe()};
  probe.probe_mode = ProbeMode::PerAddress;
  probe.evset_probe_addrs.assign(evset.addresses.rbegin(), evset.addresses.rend());

  TransmissionReport report;
  report.decoded.endianness = message.endianness;
  const Nanos start = platform.clock.now();
  // Warm-up pass so the first bit starts from a primed set.
  monitor.run_program(platform, prime);
  for (std::uint8_t bit : message.bits) {
    monitor.run_program(platform, prime);
    const Nanos primed = platform.clock.now();
    if (bit) {
      sender.run_query(platform);
      if (config.slot_1_duration) platform.clock.advance_to(primed + *config.slot_1_duration);
    } else if (config.slot_0_duration) {
      platform.clock.advance_to(primed + *config.slot_0_duration);
    }
    const std::vector<ProbeRecord> records = monitor.run_program(platform, probe);
    std::uint32_t misses = 0;
    for (Cycles c : records.front().latencies)
      misses += classify(c, threshold) == AccessOutcome::Miss ? 1 : 0;
    report.per_bit_miss_counts.push_back(misses);
    report.decoded.bits.push_back(misses >= config.decode_threshold_misses ? 1 : 0);
  }
  report.duration = platform.clock.now() - start;
  finish(report, message);
  return report;
}

/// CPU-to-peripheral Flush+Reload on one target page. The sender acts at the
/// start of each slot: a 1 flushes the whole IOTLB, a 0 sleeps. The monitor
/// probes the target at the end of each slot; the probe reloads the entry,
/// so it also re-primes for the next slot.
///
/// With sync jitter the monitor's probe instants are displaced by a normal
/// offset (kept in order), so a probe can land before the flush it should
/// observe or after the next one. At equal instants the probe goes first.
inline TransmissionReport fr_transmit(const BitMessage& message, FlushSender& sender,
                                      Monitor& monitor, Platform& platform, PageAddress target,
                                      Threshold threshold, const ChannelConfig& config = {}) {
  config.validate();
  if (!platform.flush_available())
    throw Error(Errc::ChannelSetupError, "Flush+Reload needs a flush-capable sender");
  const Nanos flush = sender.config().flush_duration;
  const Nanos slot1 = config.slot_1_duration.value_or(flush);
  const Nanos slot0 = config.slot_0_duration.value_or(flush);
  if (slot1 < flush || slot0 < flush)
    throw Error(Errc::ChannelSetupError, "Flush+Reload slots cannot be shorter than a flush");

  const std::size_t n = message.size();
  const Nanos origin = platform.clock.now();
  std::vector<Nanos> slot_start(n + 1, origin);
  for (std::size_t i = 0; i < n; ++i) slot_start[i + 1] = slot_start[i] + (message.bits[i] ? slot1 : slot0);

  Rng jitter(derive_seed(config.seed, "fr-jitter"));
  std::vector<Nanos> probe_at(n);
  Nanos last = origin;
  for (std::size_t j = 0; j < n; ++j) {
    Nanos t = slot_start[j + 1];
    if (config.sync_jitter_stddev.count() > 0) {
      const double offset = standard_normal(jitter) * static_cast<double>(config.sync_jitter_stddev.count());
      t += Nanos{static_cast<Nanos::rep>(std::llround(offset))};
    }
    last = std::max(last, t);
    probe_at[j] = last;
  }

  TransmissionReport report;
  report.decoded.endianness = message.endianness;
  monitor.read(platform, target);
  std::size_t next_send = 0;
  for (std::size_t j = 0; j < n; ++j) {
    while (next_send < n && slot_start[next_send] < probe_at[j]) {
      platform.clock.advance_to(slot_start[next_send]);
      sender.send_bit(message.bits[next_send] != 0, platform);
      ++next_send;
    }
    platform.clock.advance_to(probe_at[j]);
    const bool miss = classify(monitor.read(platform, target), threshold) == AccessOutcome::Miss;
    report.per_bit_miss_counts.push_back(miss ? 1 : 0);
    report.decoded.bits.push_back(miss ? 1 : 0);
  }
  platform.clock.advance_to(slot_start[n]);
  report.duration = slot_start[n] - origin;
  finish(report, message);
  return report;
}

}  // namespace iotlbsim
