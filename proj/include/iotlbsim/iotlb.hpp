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
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "iotlbsim/error.hpp"
#include "iotlbsim/rng.hpp"
#include "iotlbsim/types.hpp"

namespace iotlbsim {

enum class IndexFunction { ModuloLowBits, XorFold, FullyAssociative };
enum class ReplacementPolicy { Lru, Fifo, TreePlru, RandomSeeded };

constexpr std::string_view to_string(IndexFunction f) {
  switch (f) {
    case IndexFunction::ModuloLowBits: return "modulo_low_bits";
    case IndexFunction::XorFold: return "xor_fold";
    case IndexFunction::FullyAssociative: return "fully_associative";
  }
  return "?";
}

constexpr std::string_view to_string(ReplacementPolicy p) {
  switch (p) {
    case ReplacementPolicy::Lru: return "lru";
    case ReplacementPolicy::Fifo: return "fifo";
    case ReplacementPolicy::TreePlru: return "tree_plru";
    case ReplacementPolicy::RandomSeeded: return "random";
  }
  return "?";
}

using IndexSet = std::set<std::uint32_t>;

/// Organization, replacement policy and countermeasure knobs of a simulated
/// IOTLB. Defaults describe the reference profile: one fully associative set
/// of 118 entries with LRU replacement.
struct TlbConfig {
  std::uint32_t num_sets = 1;
  std::uint32_t ways = 118;
  IndexFunction index_fn = IndexFunction::FullyAssociative;
  ReplacementPolicy replacement = ReplacementPolicy::Lru;
  std::map<DeviceId, DomainId> device_domains;
  std::map<DeviceId, IndexSet> way_partition;
  std::map<DeviceId, IndexSet> set_partition;
  std::set<std::pair<DomainId, PageAddress>> uncacheable_pages;
  std::set<DeviceId> ats_bypass_devices;
  std::uint64_t rng_seed = 0;

  std::uint32_t capacity() const { return num_sets * ways; }

  void validate() const;

  friend bool operator==(const TlbConfig&, const TlbConfig&) = default;
};

namespace detail {

inline void check_partition(const std::map<DeviceId, IndexSet>& partition,
                            const std::map<DeviceId, DomainId>& domains,
                            std::uint32_t bound, std::string_view what) {
  for (const auto& [device, indices] : partition) {
    if (!domains.contains(device))
      throw Error(Errc::InvalidConfig, std::string(what) + " names unregistered device " +
                                           std::to_string(device.value));
    if (indices.empty())
      throw Error(Errc::InvalidConfig, std::string(what) + " for device " +
                                           std::to_string(device.value) + " is empty");
    if (*indices.rbegin() >= bound)
      throw Error(Errc::InvalidConfig, std::string(what) + " for device " +
                                           std::to_string(device.value) + " is out of range");
  }
  // Devices in different domains are isolated from each other and must not
  // share an index. Devices of one domain share entries anyway.
  for (auto a = partition.begin(); a != partition.end(); ++a) {
    for (auto b = std::next(a); b != partition.end(); ++b) {
      if (domains.at(a->first) == domains.at(b->first)) continue;
      for (std::uint32_t idx : a->second) {
        if (b->second.contains(idx))
          throw Error(Errc::InvalidConfig,
                      std::string(what) + " of devices " + std::to_string(a->first.value) +
                          " and " + std::to_string(b->first.value) + " overlap");
      }
    }
  }
}

}  // namespace detail

inline void TlbConfig::validate() const {
  if (num_sets == 0) throw Error(Errc::InvalidConfig, "num_sets must be positive");
  if (ways == 0) throw Error(Errc::InvalidConfig, "ways must be positive");
  if (index_fn == IndexFunction::FullyAssociative && num_sets != 1)
    throw Error(Errc::InvalidConfig, "fully associative organization requires num_sets = 1");
  if (index_fn == IndexFunction::XorFold && !std::has_single_bit(num_sets))
    throw Error(Errc::InvalidConfig, "xor_fold indexing requires a power-of-two num_sets");
  for (const auto& [device, domain] : device_domains) {
    if (device.value >= (1u << 16))
      throw Error(Errc::InvalidConfig, "device id " + std::to_string(device.value) + " too large");
    if (domain.value >= DomainId::kLimit)
      throw Error(Errc::InvalidConfig, "domain id " + std::to_string(domain.value) + " too large");
  }
  detail::check_partition(way_partition, device_domains, ways, "way_partition");
  detail::check_partition(set_partition, device_domains, num_sets, "set_partition");
  for (const auto& [domain, page] : uncacheable_pages) {
    if (page.number >= PageAddress::kLimit)
      throw Error(Errc::InvalidConfig, "uncacheable page exceeds the 52-bit IOVA page range");
  }
  for (DeviceId device : ats_bypass_devices) {
    if (!device_domains.contains(device))
      throw Error(Errc::InvalidConfig,
                  "ats bypass names unregistered device " + std::to_string(device.value));
  }
}

struct Occupancy {
  std::vector<std::uint32_t> per_set;
  std::uint64_t total = 0;
};

struct TlbEntry {
  std::uint32_t set = 0;
  std::uint32_t way = 0;
  DomainId domain;
  PageAddress page;
};

namespace detail {

/// Open-addressing map from packed entry key to slot index. The all-ones
/// key is reserved as the empty marker.
class FlatIndex {
 public:
  static constexpr std::uint64_t kEmpty = ~std::uint64_t{0};

  explicit FlatIndex(std::size_t expected = 0) {
    const std::size_t cap = std::bit_ceil(std::max<std::size_t>(16, expected * 4));
    keys_.assign(cap, kEmpty);
    values_.assign(cap, 0);
    mask_ = cap - 1;
    shift_ = 64 - std::countr_zero(cap);
  }

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  // Slot index of `key`, or -1.
  std::int64_t find(std::uint64_t key) const {
    for (std::size_t i = home(key);; i = (i + 1) & mask_) {
      if (keys_[i] == key) return values_[i];
      if (keys_[i] == kEmpty) return -1;
    }
  }

  bool contains(std::uint64_t key) const { return find(key) >= 0; }

  void insert(std::uint64_t key, std::uint32_t value) {
    std::size_t i = home(key);
    while (keys_[i] != kEmpty) i = (i + 1) & mask_;
    keys_[i] = key;
    values_[i] = value;
    ++size_;
  }

  void erase(std::uint64_t key) {
    std::size_t i = home(key);
    while (keys_[i] != key) {
      if (keys_[i] == kEmpty) return;
      i = (i + 1) & mask_;
    }
    keys_[i] = kEmpty;
    --size_;
    // Backward-shift the rest of the probe run so lookups never need tombstones.
    for (std::size_t j = (i + 1) & mask_; keys_[j] != kEmpty; j = (j + 1) & mask_) {
      const std::size_t k = home(keys_[j]);
      const bool stays = i <= j ? (i < k && k <= j) : (i < k || k <= j);
      if (stays) continue;
      keys_[i] = keys_[j];
      values_[i] = values_[j];
      keys_[j] = kEmpty;
      i = j;
    }
  }

  void clear() {
    if (size_ == 0) return;
    std::fill(keys_.begin(), keys_.end(), kEmpty);
    size_ = 0;
  }

 private:
  std::size_t home(std::uint64_t key) const {
    return static_cast<std::size_t>((key * 0x9e3779b97f4a7c15ULL) >> shift_);
  }

  std::vector<std::uint64_t> keys_;
  std::vector<std::uint32_t> values_;
  std::size_t mask_ = 0;
  int shift_ = 0;
  std::size_t size_ = 0;
};

}  // namespace detail

/// A shared IOTLB. Entries are keyed by (domain, page): devices that share a
/// domain share translations, devices in different domains only interact
/// through replacement.
class Tlb {
 public:
  explicit Tlb(TlbConfig config) : config_(std::move(config)) {
    config_.validate();
    const std::size_t slots = std::size_t{config_.num_sets} * config_.ways;
    keys_.assign(slots, 0);
    valid_.assign(slots, 0);
    prev_.assign(slots, kNil);
    next_.assign(slots, kNil);
    head_.assign(config_.num_sets, kNil);
    tail_.assign(config_.num_sets, kNil);
    fill_.assign(config_.num_sets, 0);
    free_.resize(config_.num_sets);
    reset_free_lists();
    plru_leaves_ = std::bit_ceil(config_.ways);
    if (config_.replacement == ReplacementPolicy::TreePlru)
      plru_bits_.assign(std::size_t{config_.num_sets} * plru_leaves_, 0);
    if (config_.replacement == ReplacementPolicy::RandomSeeded) {
      set_rng_.reserve(config_.num_sets);
      for (std::uint32_t s = 0; s < config_.num_sets; ++s)
        set_rng_.emplace_back(derive_seed(config_.rng_seed, {0x5e7ULL, s}));
    }
    where_ = detail::FlatIndex(slots);
    std::uint32_t next_slot = 0;
    for (const auto& [device, domain] : config_.device_domains) {
      if (device.value >= devices_.size()) devices_.resize(device.value + 1);
      DeviceInfo info;
      info.domain = domain;
      info.slot = next_slot++;
      domain_count_ = std::max<std::size_t>(domain_count_, domain.value + 1);
      info.bypass = config_.ats_bypass_devices.contains(device);
      if (auto it = config_.way_partition.find(device); it != config_.way_partition.end()) {
        info.ways.assign(it->second.begin(), it->second.end());
        info.way_mask.assign(config_.ways, 0);
        for (std::uint32_t w : info.ways) info.way_mask[w] = 1;
      }
      if (auto it = config_.set_partition.find(device); it != config_.set_partition.end())
        info.sets.assign(it->second.begin(), it->second.end());
      devices_[device.value] = std::move(info);
    }
    evictions_.assign(std::size_t{next_slot} * domain_count_, 0);
    for (const auto& [domain, page] : config_.uncacheable_pages)
      uncacheable_.insert(pack(domain, page));
  }

  const TlbConfig& config() const { return config_; }

  DomainId domain_of(DeviceId device) const { return info(device).domain; }

  AccessOutcome access(DeviceId device, PageAddress page) {
    const DeviceInfo& dev = info(device);
    if (dev.bypass) return AccessOutcome::Miss;
    const std::uint64_t key = pack(dev.domain, page);
    if (!uncacheable_.empty() && uncacheable_.contains(key)) return AccessOutcome::Miss;

    if (const std::int64_t hit = where_.find(key); hit >= 0) {
      touch(static_cast<std::uint32_t>(hit));
      return AccessOutcome::Hit;
    }

    const std::uint32_t set = set_for(dev, page);
    std::uint32_t way;
    if (!take_free_way(set, dev, way)) {
      way = choose_victim(set, dev);
      const std::uint32_t victim = slot_index(set, way);
      where_.erase(keys_[victim]);
      unlink(set, victim);
      ++evictions_[dev.slot * domain_count_ + (keys_[victim] >> 52)];
    } else {
      ++fill_[set];
    }
    const std::uint32_t index = slot_index(set, way);
    keys_[index] = key;
    valid_[index] = 1;
    link_tail(set, index);
    where_.insert(key, index);
    if (config_.replacement == ReplacementPolicy::TreePlru) plru_touch(set, way);
    return AccessOutcome::Miss;
  }

  void flush_all() {
    if (where_.empty()) return;
    std::fill(valid_.begin(), valid_.end(), 0);
    std::fill(fill_.begin(), fill_.end(), 0);
    std::fill(head_.begin(), head_.end(), kNil);
    std::fill(tail_.begin(), tail_.end(), kNil);
    std::fill(plru_bits_.begin(), plru_bits_.end(), 0);
    reset_free_lists();
    where_.clear();
  }

  void flush_device(DeviceId device) {
    const std::uint32_t domain = info(device).domain.value;
    for (std::uint32_t i = 0; i < keys_.size(); ++i) {
      if (valid_[i] && (keys_[i] >> 52) == domain) {
        const std::uint32_t set = i / config_.ways;
        where_.erase(keys_[i]);
        unlink(set, i);
        valid_[i] = 0;
        --fill_[set];
        free_[set].push_back(i % config_.ways);
      }
    }
  }

  Occupancy occupancy() const {
    Occupancy occ;
    occ.per_set = fill_;
    for (std::uint32_t n : fill_) occ.total += n;
    return occ;
  }

  bool contains(DomainId domain, PageAddress page) const {
    return where_.contains(pack(domain, page));
  }

  /// Resident entries per set: oldest first for LRU (least recently used)
  /// and FIFO (first inserted), way order for the other policies.
  std::vector<TlbEntry> entries() const {
    std::vector<TlbEntry> out;
    out.reserve(where_.size());
    const bool ordered = config_.replacement == ReplacementPolicy::Lru ||
                         config_.replacement == ReplacementPolicy::Fifo;
    for (std::uint32_t set = 0; set < config_.num_sets; ++set) {
      auto emit = [&](std::uint32_t index) {
        out.push_back(TlbEntry{set, index % config_.ways,
                               DomainId{static_cast<std::uint32_t>(keys_[index] >> 52)},
                               PageAddress{keys_[index] & (PageAddress::kLimit - 1)}});
      };
      if (ordered) {
        for (std::uint32_t i = head_[set]; i != kNil; i = next_[i]) emit(i);
      } else {
        for (std::uint32_t w = 0; w < config_.ways; ++w)
          if (valid_[slot_index(set, w)]) emit(slot_index(set, w));
      }
    }
    return out;
  }

  /// Number of entries of `victim` evicted by misses of `cause`.
  std::uint64_t evictions(DeviceId cause, DomainId victim) const {
    const DeviceInfo& dev = info(cause);
    if (victim.value >= domain_count_) return 0;
    return evictions_[dev.slot * domain_count_ + victim.value];
  }

  /// Structural self-check used by property tests.
  bool check_invariants() const {
    std::uint64_t valid = 0;
    std::unordered_set<std::uint64_t> seen;
    for (std::uint32_t set = 0; set < config_.num_sets; ++set) {
      std::uint32_t in_set = 0;
      for (std::uint32_t way = 0; way < config_.ways; ++way) {
        const std::uint32_t i = slot_index(set, way);
        if (!valid_[i]) continue;
        ++in_set;
        if (!seen.insert(keys_[i]).second) return false;
        if (where_.find(keys_[i]) != i) return false;
      }
      std::uint32_t listed = 0;
      for (std::uint32_t i = head_[set]; i != kNil; i = next_[i]) {
        if (!valid_[i] || ++listed > config_.ways) return false;
      }
      if (in_set != fill_[set] || in_set > config_.ways || listed != in_set) return false;
      if (free_[set].size() + in_set != config_.ways) return false;
      valid += in_set;
    }
    return valid == where_.size() && valid <= config_.capacity();
  }

 private:
  static constexpr std::uint32_t kNil = ~std::uint32_t{0};

  struct DeviceInfo {
    DomainId domain;
    std::uint32_t slot = 0;  // row in evictions_
    bool bypass = false;
    std::vector<std::uint32_t> ways;      // empty: all ways
    std::vector<std::uint8_t> way_mask;   // indexed by way when partitioned
    std::vector<std::uint32_t> sets;      // empty: all sets
  };

  static std::uint64_t pack(DomainId domain, PageAddress page) {
    return (std::uint64_t{domain.value} << 52) | (page.number & (PageAddress::kLimit - 1));
  }

  const DeviceInfo& info(DeviceId device) const {
    if (device.value >= devices_.size() || !devices_[device.value].has_value())
      throw Error(Errc::UnknownDevice, "device " + std::to_string(device.value) +
                                           " is not registered with the IOMMU");
    return *devices_[device.value];
  }

  std::uint32_t slot_index(std::uint32_t set, std::uint32_t way) const {
    return set * config_.ways + way;
  }

  void reset_free_lists() {
    // Stored in reverse so that ways fill in ascending order.
    for (auto& f : free_) {
      f.resize(config_.ways);
      for (std::uint32_t w = 0; w < config_.ways; ++w) f[w] = config_.ways - 1 - w;
    }
  }

  std::uint64_t raw_index(PageAddress page) const {
    switch (config_.index_fn) {
      case IndexFunction::FullyAssociative: return 0;
      case IndexFunction::ModuloLowBits: return page.number;
      case IndexFunction::XorFold: {
        const int bits = std::countr_zero(config_.num_sets);
        const std::uint64_t mask = config_.num_sets - 1;
        return (page.number & mask) ^ ((page.number >> bits) & mask);
      }
    }
    return 0;
  }

  std::uint32_t set_for(const DeviceInfo& dev, PageAddress page) const {
    const std::uint64_t raw = raw_index(page);
    if (!dev.sets.empty()) return dev.sets[raw % dev.sets.size()];
    return static_cast<std::uint32_t>(raw % config_.num_sets);
  }

  bool allowed(const DeviceInfo& dev, std::uint32_t way) const {
    return dev.ways.empty() || dev.way_mask[way] != 0;
  }

  // Invalid ways are filled before anything is evicted.
  bool take_free_way(std::uint32_t set, const DeviceInfo& dev, std::uint32_t& way) {
    auto& f = free_[set];
    if (f.empty()) return false;
    if (dev.ways.empty()) {
      way = f.back();
      f.pop_back();
      return true;
    }
    for (std::size_t i = f.size(); i-- > 0;) {
      if (dev.way_mask[f[i]]) {
        way = f[i];
        f.erase(f.begin() + static_cast<std::ptrdiff_t>(i));
        return true;
      }
    }
    return false;
  }

  void link_tail(std::uint32_t set, std::uint32_t index) {
    prev_[index] = tail_[set];
    next_[index] = kNil;
    if (tail_[set] != kNil) next_[tail_[set]] = index;
    else head_[set] = index;
    tail_[set] = index;
  }

  void unlink(std::uint32_t set, std::uint32_t index) {
    if (prev_[index] != kNil) next_[prev_[index]] = next_[index];
    else head_[set] = next_[index];
    if (next_[index] != kNil) prev_[next_[index]] = prev_[index];
    else tail_[set] = prev_[index];
    prev_[index] = next_[index] = kNil;
  }

  void touch(std::uint32_t index) {
    if (config_.replacement == ReplacementPolicy::Lru) {
      const std::uint32_t set = index / config_.ways;
      if (tail_[set] != index) {
        unlink(set, index);
        link_tail(set, index);
      }
    } else if (config_.replacement == ReplacementPolicy::TreePlru) {
      plru_touch(index / config_.ways, index % config_.ways);
    }
  }

  // Only called on a full (for this device) set.
  std::uint32_t choose_victim(std::uint32_t set, const DeviceInfo& dev) {
    switch (config_.replacement) {
      case ReplacementPolicy::Lru:
      case ReplacementPolicy::Fifo:
        for (std::uint32_t i = head_[set]; i != kNil; i = next_[i]) {
          if (allowed(dev, i % config_.ways)) return i % config_.ways;
        }
        return 0;
      case ReplacementPolicy::RandomSeeded: {
        Rng& rng = set_rng_[set];
        if (dev.ways.empty())
          return static_cast<std::uint32_t>(uniform_index(rng, config_.ways));
        return dev.ways[uniform_index(rng, dev.ways.size())];
      }
      case ReplacementPolicy::TreePlru:
        return plru_victim(set, dev);
    }
    return 0;
  }

  // Tree-PLRU over bit_ceil(ways) leaves stored heap-style (node 1 is the
  // root). A node bit of 0 points the victim search left, 1 points right.
  // Leaves beyond `ways` and leaves outside the device's partition are
  // never chosen.
  std::uint8_t* plru_nodes(std::uint32_t set) {
    return plru_bits_.data() + std::size_t{set} * plru_leaves_;
  }

  void plru_touch(std::uint32_t set, std::uint32_t way) {
    std::uint8_t* nodes = plru_nodes(set);
    std::uint32_t node = 1;
    std::uint32_t lo = 0;
    std::uint32_t span = plru_leaves_;
    while (span > 1) {
      span /= 2;
      const bool right = way >= lo + span;
      nodes[node] = right ? 0 : 1;
      node = node * 2 + (right ? 1 : 0);
      if (right) lo += span;
    }
  }

  bool subtree_has_candidate(const DeviceInfo& dev, std::uint32_t lo, std::uint32_t span) const {
    const std::uint32_t hi = std::min(lo + span, config_.ways);
    for (std::uint32_t w = lo; w < hi; ++w)
      if (allowed(dev, w)) return true;
    return false;
  }

  std::uint32_t plru_victim(std::uint32_t set, const DeviceInfo& dev) {
    std::uint8_t* nodes = plru_nodes(set);
    std::uint32_t node = 1;
    std::uint32_t lo = 0;
    std::uint32_t span = plru_leaves_;
    while (span > 1) {
      span /= 2;
      bool right = nodes[node] != 0;
      if (!subtree_has_candidate(dev, right ? lo + span : lo, span)) right = !right;
      node = node * 2 + (right ? 1 : 0);
      if (right) lo += span;
    }
    return lo;
  }

  TlbConfig config_;
  std::vector<std::uint64_t> keys_;
  std::vector<std::uint8_t> valid_;
  // Per-set list of valid slots, oldest first (recency for LRU, insertion
  // for FIFO; maintained but unused by the other policies).
  std::vector<std::uint32_t> prev_;
  std::vector<std::uint32_t> next_;
  std::vector<std::uint32_t> head_;
  std::vector<std::uint32_t> tail_;
  std::vector<std::uint32_t> fill_;
  std::vector<std::vector<std::uint32_t>> free_;
  std::uint32_t plru_leaves_ = 1;
  std::vector<std::uint8_t> plru_bits_;
  std::vector<Rng> set_rng_;
  detail::FlatIndex where_;
  std::unordered_set<std::uint64_t> uncacheable_;
  std::vector<std::optional<DeviceInfo>> devices_;
  // Eviction counts indexed by cause device row and victim domain. Only
  // domains of registered devices can own entries.
  std::size_t domain_count_ = 0;  // highest registered domain + 1
  std::vector<std::uint64_t> evictions_;
};

}  // namespace iotlbsim
