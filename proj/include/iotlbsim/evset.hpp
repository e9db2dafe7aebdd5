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
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "iotlbsim/clock.hpp"
#include "iotlbsim/devices.hpp"
#include "iotlbsim/error.hpp"
#include "iotlbsim/platform.hpp"
#include "iotlbsim/rng.hpp"
#include "iotlbsim/timing.hpp"
#include "iotlbsim/types.hpp"

namespace iotlbsim {

/// Candidate pages for eviction-set construction. Removal is O(1); the
/// order of the remaining pages changes on removal but stays deterministic.
class AddressPool {
 public:
  AddressPool() = default;

  explicit AddressPool(std::vector<PageAddress> pages) {
    for (PageAddress p : pages) give_back(p);
  }

  static AddressPool allocate(std::size_t count, Rng& rng) {
    return AddressPool(draw_distinct_pages(count, rng));
  }

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  bool contains(PageAddress p) const { return index_.contains(p.number); }
  std::span<const PageAddress> pages() const { return items_; }

  PageAddress take_random(Rng& rng) {
    if (items_.empty()) throw Error(Errc::EmptyInput, "address pool is empty");
    const PageAddress p = items_[uniform_index(rng, items_.size())];
    remove(p);
    return p;
  }

  bool remove(PageAddress p) {
    auto it = index_.find(p.number);
    if (it == index_.end()) return false;
    const std::size_t pos = it->second;
    index_.erase(it);
    if (pos != items_.size() - 1) {
      items_[pos] = items_.back();
      index_[items_[pos].number] = pos;
    }
    items_.pop_back();
    return true;
  }

  void give_back(PageAddress p) {
    if (!index_.emplace(p.number, items_.size()).second)
      throw Error(Errc::InvalidConfig, "page " + std::to_string(p.number) + " is already pooled");
    items_.push_back(p);
  }

 private:
  std::vector<PageAddress> items_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

struct EvictionSet {
  PageAddress target;
  std::vector<PageAddress> addresses;
  bool verified = false;
};

struct EvictionTestOptions {
  bool flush = true;
  std::uint32_t trials = 100;
  // Randomize the evset_prime access order on every test.
  bool shuffle = false;
  // Idle time before each prime+probe test.
  Nanos inter_test_delay{0};

  friend bool operator==(const EvictionTestOptions&, const EvictionTestOptions&) = default;
};

/// Prime+probe eviction test run by the monitor device: optionally flush,
/// touch the target, touch every eviction-set page, then time the target.
class EvictionTester {
 public:
  EvictionTester(Platform& platform, Monitor& monitor, Threshold threshold,
                 EvictionTestOptions options = {})
      : platform_(platform), monitor_(monitor), threshold_(threshold), options_(options) {
    if (options_.flush && !platform_.flush_available())
      throw Error(Errc::FlushUnavailable, "eviction tests with flush need a flush-capable platform");
  }

  const EvictionTestOptions& options() const { return options_; }
  Threshold threshold() const { return threshold_; }
  Platform& platform() { return platform_; }
  Monitor& monitor() { return monitor_; }

  /// One test; true when the final target read is slower than the threshold.
  bool trial(PageAddress target, std::span<const PageAddress> evset, bool shuffle) {
    ++trials_run_;
    platform_.clock.advance(options_.inter_test_delay);
    if (options_.flush) platform_.flush_all();
    monitor_.read(platform_, target);
    monitor_.prime(platform_, evset, shuffle);
    return classify(monitor_.read(platform_, target), threshold_) == AccessOutcome::Miss;
  }

  /// True iff all `trials` tests show contention. Stops at the first fast
  /// probe since the outcome is then decided.
  bool evicts(PageAddress target, std::span<const PageAddress> evset, std::uint32_t trials) {
    ++calls_;
    for (std::uint32_t i = 0; i < trials; ++i) {
      if (!trial(target, evset, options_.shuffle)) return false;
    }
    return true;
  }

  bool evicts(PageAddress target, std::span<const PageAddress> evset) {
    return evicts(target, evset, options_.trials);
  }

  /// Fraction of `reps` tests (shuffled prime order) that evicted the target.
  double eviction_rate(PageAddress target, std::span<const PageAddress> evset, std::uint32_t reps) {
    if (reps == 0) return 0.0;
    std::uint32_t hits = 0;
    for (std::uint32_t i = 0; i < reps; ++i) hits += trial(target, evset, true) ? 1 : 0;
    return static_cast<double>(hits) / reps;
  }

  std::uint64_t calls() const { return calls_; }
  std::uint64_t trials_run() const { return trials_run_; }

 private:
  Platform& platform_;
  Monitor& monitor_;
  Threshold threshold_;
  EvictionTestOptions options_;
  std::uint64_t calls_ = 0;
  std::uint64_t trials_run_ = 0;
};

struct GrowReduceOptions {
  // Grow until this many eviction tests have succeeded.
  std::uint32_t grow_successes = 50;

  friend bool operator==(const GrowReduceOptions&, const GrowReduceOptions&) = default;
};

/// Grow-reduce construction for one target. Grow moves random pool pages
/// into the set and counts successful eviction tests; reduce drops every
/// page the set can do without and returns it to the pool.
inline EvictionSet construct_evset(EvictionTester& tester, PageAddress target, AddressPool& pool,
                                   Rng& rng, GrowReduceOptions options = {}) {
  if (pool.contains(target)) throw Error(Errc::InvalidConfig, "target must not be in the pool");
  EvictionSet set;
  set.target = target;
  std::vector<PageAddress>& evset = set.addresses;

  std::uint32_t count = 0;
  while (count < options.grow_successes && !pool.empty()) {
    evset.push_back(pool.take_random(rng));
    if (tester.evicts(target, evset)) ++count;
  }

  const std::vector<PageAddress> grown = evset;
  for (PageAddress page : grown) {
    auto pos = std::find(evset.begin(), evset.end(), page);
    const auto offset = pos - evset.begin();
    evset.erase(pos);
    if (!tester.evicts(target, evset)) {
      evset.insert(evset.begin() + offset, page);
    } else {
      pool.give_back(page);
    }
  }

  set.verified = !evset.empty() && tester.evicts(target, evset);
  return set;
}

struct FindAllOptions {
  std::size_t pool_size = 4096;
  // Trials used when checking whether an existing set already covers a
  // fresh target.
  std::uint32_t check_trials = 10;
  GrowReduceOptions grow;
};

struct FindAllResult {
  std::vector<PageAddress> initial;
  // Targets that needed a new set, and targets an existing set covered.
  std::vector<PageAddress> targets;
  std::vector<PageAddress> covered;
  std::vector<EvictionSet> evsets;
  AddressPool pool;
};

inline bool any_set_evicts(EvictionTester& tester, std::span<const EvictionSet> sets,
                           PageAddress target, std::uint32_t trials) {
  for (const EvictionSet& s : sets) {
    if (!s.addresses.empty() && tester.evicts(target, s.addresses, trials)) return true;
  }
  return false;
}

/// Builds as many eviction sets as it takes to cover every page of the pool.
inline FindAllResult find_all_evsets(EvictionTester& tester, AddressPool pool, Rng& rng,
                                     const FindAllOptions& options = {}) {
  FindAllResult r;
  r.initial.assign(pool.pages().begin(), pool.pages().end());
  while (!pool.empty()) {
    const PageAddress target = pool.take_random(rng);
    if (any_set_evicts(tester, r.evsets, target, options.check_trials)) {
      r.covered.push_back(target);
      continue;
    }
    r.targets.push_back(target);
    EvictionSet set = construct_evset(tester, target, pool, rng, options.grow);
    if (!set.addresses.empty()) r.evsets.push_back(std::move(set));
  }
  r.pool = std::move(pool);
  return r;
}

inline FindAllResult find_all_evsets(EvictionTester& tester, Rng& rng,
                                     const FindAllOptions& options = {}) {
  return find_all_evsets(tester, AddressPool::allocate(options.pool_size, rng), rng, options);
}

struct GrowSplitOptions {
  std::size_t pool_size = 4096;
  std::uint32_t check_trials = 10;
};

struct GrowSplitResult {
  std::vector<PageAddress> initial;
  std::vector<PageAddress> targets;
  std::vector<EvictionSet> evsets;
  // Conflict-set pages that ended up in no eviction set.
  std::vector<PageAddress> leftover;
};

/// Grow-split baseline for partitioned structures. Grow a conflict set from
/// every candidate that it does not already evict; then, for each remaining
/// candidate the conflict set evicts, split off the members whose removal
/// stops the eviction. Candidate screening uses `check_trials`, split
/// decisions use the full trial count.
inline GrowSplitResult grow_split(EvictionTester& tester, AddressPool pool, Rng& rng,
                                  const GrowSplitOptions& options = {}) {
  GrowSplitResult r;
  r.initial.assign(pool.pages().begin(), pool.pages().end());
  std::vector<PageAddress> lines = r.initial;
  shuffle_in_place(lines, rng);

  std::vector<PageAddress> conflict;
  std::vector<PageAddress> rest;
  for (PageAddress c : lines) {
    if (!conflict.empty() && tester.evicts(c, conflict, options.check_trials)) {
      rest.push_back(c);
    } else {
      conflict.push_back(c);
    }
  }

  std::vector<PageAddress> without;
  for (PageAddress c : rest) {
    if (conflict.empty() || !tester.evicts(c, conflict, options.check_trials)) continue;
    EvictionSet set;
    set.target = c;
    std::vector<PageAddress> keep;
    for (std::size_t i = 0; i < conflict.size(); ++i) {
      without.assign(conflict.begin(), conflict.end());
      without.erase(without.begin() + static_cast<std::ptrdiff_t>(i));
      if (!tester.evicts(c, without)) set.addresses.push_back(conflict[i]);
      else keep.push_back(conflict[i]);
    }
    if (set.addresses.empty()) continue;
    set.verified = tester.evicts(c, set.addresses);
    conflict = std::move(keep);
    r.targets.push_back(c);
    r.evsets.push_back(std::move(set));
  }
  r.leftover = std::move(conflict);
  return r;
}

inline GrowSplitResult grow_split(EvictionTester& tester, Rng& rng,
                                  const GrowSplitOptions& options = {}) {
  return grow_split(tester, AddressPool::allocate(options.pool_size, rng), rng, options);
}

/// One record per algorithm run, in the shape of the comparison table.
struct EvsetStats {
  std::size_t number_of_sets = 0;
  double mean_set_size = 0;
  // Fraction of targets whose best set evicts them in a majority of tests.
  double useful_sets_per_target = 0;
  double average_best_eviction_rate = 0;
};

/// Re-tests every (target, set) pair `reps` times with shuffled prime order
/// and aggregates each target's best rate.
inline EvsetStats evaluate(EvictionTester& tester, std::span<const EvictionSet> evsets,
                           std::span<const PageAddress> targets, std::uint32_t reps = 40) {
  if (targets.empty()) throw Error(Errc::EmptyInput, "no targets to evaluate");
  if (evsets.empty()) throw Error(Errc::EmptyInput, "no eviction sets to evaluate");
  EvsetStats stats;
  stats.number_of_sets = evsets.size();
  double size_sum = 0;
  for (const EvictionSet& s : evsets) size_sum += static_cast<double>(s.addresses.size());
  stats.mean_set_size = size_sum / static_cast<double>(evsets.size());

  double best_sum = 0;
  std::size_t useful = 0;
  for (PageAddress t : targets) {
    double best = 0;
    for (const EvictionSet& s : evsets) {
      if (std::find(s.addresses.begin(), s.addresses.end(), t) != s.addresses.end()) continue;
      best = std::max(best, tester.eviction_rate(t, s.addresses, reps));
      if (best >= 1.0) break;
    }
    best_sum += best;
    if (best > 0.5) ++useful;
  }
  stats.useful_sets_per_target = static_cast<double>(useful) / static_cast<double>(targets.size());
  stats.average_best_eviction_rate = best_sum / static_cast<double>(targets.size());
  return stats;
}

enum class EvsetAlgorithm { GrowReduce, GrowSplit };

constexpr std::string_view to_string(EvsetAlgorithm a) {
  return a == EvsetAlgorithm::GrowReduce ? "grow-reduce" : "grow-split";
}

/// Size histogram (size -> number of sets).
inline std::map<std::size_t, std::size_t> size_histogram(std::span<const EvictionSet> evsets) {
  std::map<std::size_t, std::size_t> h;
  for (const EvictionSet& s : evsets) ++h[s.addresses.size()];
  return h;
}

}  // namespace iotlbsim
