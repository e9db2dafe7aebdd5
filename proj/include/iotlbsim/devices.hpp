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

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "iotlbsim/clock.hpp"
#include "iotlbsim/error.hpp"
#include "iotlbsim/platform.hpp"
#include "iotlbsim/rng.hpp"
#include "iotlbsim/types.hpp"

namespace iotlbsim {

inline constexpr std::uint64_t kDefaultPageBase = 0x100000;
inline constexpr std::uint64_t kDefaultPageSpan = std::uint64_t{1} << 24;

/// `count` distinct pages drawn uniformly from [base, base + span).
inline std::vector<PageAddress> draw_distinct_pages(std::size_t count, Rng& rng,
                                                    std::uint64_t base = kDefaultPageBase,
                                                    std::uint64_t span = kDefaultPageSpan) {
  if (count > span) throw Error(Errc::InvalidConfig, "page region too small for allocation");
  std::vector<PageAddress> out;
  out.reserve(count);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(count * 2);
  while (out.size() < count) {
    const std::uint64_t page = base + uniform_index(rng, span);
    if (seen.insert(page).second) out.push_back(PageAddress{page});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Monitor device

enum class MonitorOp { EvsetPrime, EvsetProbe, TargetPrime, TargetProbe, Wait };

constexpr std::string_view to_string(MonitorOp op) {
  switch (op) {
    case MonitorOp::EvsetPrime: return "evset_prime";
    case MonitorOp::EvsetProbe: return "evset_probe";
    case MonitorOp::TargetPrime: return "target_prime";
    case MonitorOp::TargetProbe: return "target_probe";
    case MonitorOp::Wait: return "wait";
  }
  return "?";
}

struct MonitorInstruction {
  MonitorOp op = MonitorOp::Wait;
  std::uint64_t wait_cycles = 0;

  static MonitorInstruction evset_prime() { return {MonitorOp::EvsetPrime, 0}; }
  static MonitorInstruction evset_probe() { return {MonitorOp::EvsetProbe, 0}; }
  static MonitorInstruction target_prime() { return {MonitorOp::TargetPrime, 0}; }
  static MonitorInstruction target_probe() { return {MonitorOp::TargetProbe, 0}; }
  static MonitorInstruction wait(std::uint64_t cycles) { return {MonitorOp::Wait, cycles}; }
};

enum class ProbeMode { Aggregate, PerAddress };

/// The monitor's instruction memory holds at most seven instructions.
/// Prime and probe eviction sets are configured independently.
struct MonitorProgram {
  static constexpr std::size_t kMaxInstructions = 7;

  std::vector<MonitorInstruction> instructions;
  ProbeMode probe_mode = ProbeMode::PerAddress;
  std::vector<PageAddress> evset_prime_addrs;
  std::vector<PageAddress> evset_probe_addrs;
  std::optional<PageAddress> target;
  bool shuffle_probe_order = false;

  void validate() const {
    if (instructions.size() > kMaxInstructions)
      throw Error(Errc::ProgramTooLong, std::to_string(instructions.size()) +
                                            " instructions exceed the limit of 7");
    for (const MonitorInstruction& ins : instructions) {
      if (ins.op == MonitorOp::EvsetPrime && evset_prime_addrs.empty())
        throw Error(Errc::MissingOperand, "evset_prime without a prime eviction set");
      if (ins.op == MonitorOp::EvsetProbe && evset_probe_addrs.empty())
        throw Error(Errc::MissingOperand, "evset_probe without a probe eviction set");
      if ((ins.op == MonitorOp::TargetPrime || ins.op == MonitorOp::TargetProbe) && !target)
        throw Error(Errc::MissingOperand, std::string(to_string(ins.op)) + " without a target");
    }
  }
};

/// Latencies recorded by one probe instruction: one value per address in
/// PerAddress mode (in eviction-set order), a single sum in Aggregate mode.
struct ProbeRecord {
  std::size_t instruction = 0;
  std::vector<Cycles> latencies;
};

/// The programmable DMA device that times its own memory reads. Every read
/// goes through the IOTLB under the monitor's DeviceId and consumes its
/// sampled latency on the platform clock.
class Monitor {
 public:
  Monitor(DeviceId device, std::uint64_t seed) : device_(device), rng_(derive_seed(seed, "monitor")) {}

  DeviceId device() const { return device_; }

  Cycles read(Platform& platform, PageAddress page) {
    const AccessOutcome outcome = platform.tlb.access(device_, page);
    const Cycles latency = platform.timing.sample(outcome);
    platform.clock.advance_cycles(latency);
    return latency;
  }

  void prime(Platform& platform, std::span<const PageAddress> pages, bool shuffle = false) {
    if (!shuffle) {
      for (PageAddress p : pages) read(platform, p);
      return;
    }
    order_.assign(pages.begin(), pages.end());
    shuffle_in_place(order_, rng_);
    for (PageAddress p : order_) read(platform, p);
  }

  /// One latency per page, reported in the order of `pages` even when the
  /// accesses themselves are shuffled.
  std::vector<Cycles> probe_each(Platform& platform, std::span<const PageAddress> pages,
                                 bool shuffle = false) {
    std::vector<Cycles> out(pages.size());
    if (!shuffle) {
      for (std::size_t i = 0; i < pages.size(); ++i) out[i] = read(platform, pages[i]);
      return out;
    }
    index_.resize(pages.size());
    for (std::size_t i = 0; i < pages.size(); ++i) index_[i] = i;
    shuffle_in_place(index_, rng_);
    for (std::size_t i : index_) out[i] = read(platform, pages[i]);
    return out;
  }

  std::vector<ProbeRecord> run_program(Platform& platform, const MonitorProgram& program) {
    program.validate();
    std::vector<ProbeRecord> records;
    const bool shuffle = program.shuffle_probe_order;
    for (std::size_t i = 0; i < program.instructions.size(); ++i) {
      const MonitorInstruction& ins = program.instructions[i];
      switch (ins.op) {
        case MonitorOp::EvsetPrime:
          prime(platform, program.evset_prime_addrs, shuffle);
          break;
        case MonitorOp::EvsetProbe: {
          auto lat = probe_each(platform, program.evset_probe_addrs, shuffle);
          if (program.probe_mode == ProbeMode::Aggregate) {
            Cycles sum = 0;
            for (Cycles c : lat) sum += c;
            lat.assign(1, sum);
          }
          records.push_back({i, std::move(lat)});
          break;
        }
        case MonitorOp::TargetPrime:
          read(platform, *program.target);
          break;
        case MonitorOp::TargetProbe:
          records.push_back({i, {read(platform, *program.target)}});
          break;
        case MonitorOp::Wait:
          platform.clock.advance_cycles(ins.wait_cycles);
          break;
      }
    }
    return records;
  }

  Rng& rng() { return rng_; }

 private:
  DeviceId device_;
  Rng rng_;
  std::vector<PageAddress> order_;
  std::vector<std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Senders

struct QuerySenderConfig {
  DeviceId device{1};
  std::uint32_t footprint_pages = 19;
  Nanos query_duration = std::chrono::milliseconds(300);
  std::uint64_t seed = 0;

  friend bool operator==(const QuerySenderConfig&, const QuerySenderConfig&) = default;
};

/// GPU running database queries. Each query DMAs the same fixed set of pages;
/// the result travels back over MMIO, which never touches the IOTLB, so the
/// footprint does not depend on the number of rows returned.
class QuerySender {
 public:
  explicit QuerySender(QuerySenderConfig config) : config_(std::move(config)) {
    Rng rng(derive_seed(config_.seed, "query-footprint"));
    footprint_ = draw_distinct_pages(config_.footprint_pages, rng);
  }

  const QuerySenderConfig& config() const { return config_; }
  std::span<const PageAddress> footprint() const { return footprint_; }

  void run_query(Platform& platform, std::uint64_t rows = 1) {
    (void)rows;
    const Nanos start = platform.clock.now();
    for (PageAddress p : footprint_) platform.tlb.access(config_.device, p);
    platform.clock.advance_to(start + config_.query_duration);
  }

 private:
  QuerySenderConfig config_;
  std::vector<PageAddress> footprint_;
};

struct NicSenderConfig {
  DeviceId device{2};
  // Buffers are mapped at boot into a fresh IOVA region; the pinned page sits
  // at a fixed offset in that region and the remaining buffers follow it.
  std::uint64_t pinned_offset = 10;
  std::uint64_t region_alignment_pages = 4096;
  std::uint32_t buffer_count_min = 1;
  std::uint32_t buffer_count_max = 15;
  std::uint32_t packets_per_probe = 32;
  double buffer_touch_probability = 0.5;
  std::uint64_t reboot_seed = 0;

  friend bool operator==(const NicSenderConfig&, const NicSenderConfig&) = default;
};

/// Network card whose driver maps its transaction buffers once at startup.
/// A reboot remaps them: the number of extra buffers and the IOVA region
/// change, the pinned page keeps its role (and its offset in the region).
class NicSender {
 public:
  explicit NicSender(NicSenderConfig config)
      : config_(std::move(config)), rng_(derive_seed(config_.reboot_seed, "nic")) {
    if (config_.buffer_count_min > config_.buffer_count_max)
      throw Error(Errc::InvalidConfig, "buffer_count_min exceeds buffer_count_max");
    reboot();
  }

  const NicSenderConfig& config() const { return config_; }

  void reboot() {
    const std::uint64_t regions = kDefaultPageSpan / config_.region_alignment_pages;
    const std::uint64_t region = kDefaultPageBase + uniform_index(rng_, regions) * config_.region_alignment_pages;
    const std::uint32_t extra =
        config_.buffer_count_min +
        static_cast<std::uint32_t>(uniform_index(rng_, config_.buffer_count_max - config_.buffer_count_min + 1));
    pinned_ = PageAddress{region + config_.pinned_offset};
    buffers_.clear();
    buffers_.push_back(pinned_);
    for (std::uint32_t i = 1; i <= extra; ++i) buffers_.push_back(PageAddress{pinned_.number + i});
  }

  PageAddress pinned_page() const { return pinned_; }

  /// All pages mapped at startup; the pinned page comes first.
  std::span<const PageAddress> startup_buffer_pages() const { return buffers_; }

  void on_packet(Platform& platform) {
    platform.tlb.access(config_.device, pinned_);
    for (std::size_t i = 1; i < buffers_.size(); ++i) {
      if (uniform_unit(rng_) < config_.buffer_touch_probability)
        platform.tlb.access(config_.device, buffers_[i]);
    }
  }

  void traffic(Platform& platform) {
    for (std::uint32_t i = 0; i < config_.packets_per_probe; ++i) on_packet(platform);
  }

 private:
  NicSenderConfig config_;
  Rng rng_;
  PageAddress pinned_;
  std::vector<PageAddress> buffers_;
};

struct FlushSenderConfig {
  Nanos flush_duration = std::chrono::microseconds(17);

  friend bool operator==(const FlushSenderConfig&, const FlushSenderConfig&) = default;
};

/// CPU process with an IOTLB flush primitive: a global flush sends 1,
/// sleeping for the same duration sends 0.
class FlushSender {
 public:
  explicit FlushSender(FlushSenderConfig config = {}) : config_(config) {
    if (config_.flush_duration.count() <= 0)
      throw Error(Errc::InvalidConfig, "flush_duration must be positive");
  }

  const FlushSenderConfig& config() const { return config_; }

  void send_bit(bool bit, Platform& platform) {
    if (bit) platform.flush_all();
    platform.clock.advance(config_.flush_duration);
  }

 private:
  FlushSenderConfig config_;
};

}  // namespace iotlbsim
