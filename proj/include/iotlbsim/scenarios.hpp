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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "iotlbsim/channel.hpp"
#include "iotlbsim/config.hpp"
#include "iotlbsim/devices.hpp"
#include "iotlbsim/evset.hpp"
#include "iotlbsim/output.hpp"
#include "iotlbsim/platform.hpp"

namespace iotlbsim {

enum class ScenarioName { SqlTrace, HelloChannel, EvsetHistograms, Table2, Nic };

constexpr std::string_view to_string(ScenarioName n) {
  switch (n) {
    case ScenarioName::SqlTrace: return "sql-trace";
    case ScenarioName::HelloChannel: return "hello";
    case ScenarioName::EvsetHistograms: return "evset-histograms";
    case ScenarioName::Table2: return "table2";
    case ScenarioName::Nic: return "nic";
  }
  return "?";
}

inline std::optional<ScenarioName> parse_scenario(std::string_view name) {
  for (ScenarioName n : {ScenarioName::SqlTrace, ScenarioName::HelloChannel, ScenarioName::EvsetHistograms,
                         ScenarioName::Table2, ScenarioName::Nic}) {
    if (to_string(n) == name) return n;
  }
  return std::nullopt;
}

/// Profile a scenario runs on unless the caller supplies one.
constexpr std::string_view default_profile(ScenarioName n) {
  switch (n) {
    case ScenarioName::EvsetHistograms: return "noflush-118-random";
    case ScenarioName::Nic: return "nic-128x1";
    default: return "reference-118-lru";
  }
}

// ---------------------------------------------------------------------------
// Eviction-set runs

struct EvsetRun {
  EvsetAlgorithm algorithm = EvsetAlgorithm::GrowReduce;
  bool flush = true;
  std::uint64_t seed = 0;
  EvsetStats stats;
  std::vector<std::size_t> set_sizes;
  std::uint64_t trials = 0;
};

/// One complete run: fresh platform, pool and monitor derived from `seed`,
/// the configured algorithm, then evaluation of the resulting sets.
inline EvsetRun run_evset_experiment(const ExperimentConfig& c, EvsetAlgorithm algorithm, std::uint64_t seed) {
  Platform platform = make_platform(c, seed);
  Monitor monitor(c.monitor.device, derive_seed(seed, "monitor"));
  EvictionTester tester(platform, monitor, threshold_of(c), test_options(c));
  Rng rng(derive_seed(seed, "evset"));
  AddressPool pool = AddressPool::allocate(c.evset.pool_size, rng);

  EvsetRun run;
  run.algorithm = algorithm;
  run.flush = c.evset.flush;
  run.seed = seed;
  std::vector<EvictionSet> sets;
  std::vector<PageAddress> targets;
  if (algorithm == EvsetAlgorithm::GrowReduce) {
    FindAllOptions o;
    o.pool_size = c.evset.pool_size;
    o.check_trials = c.evset.check_trials;
    o.grow.grow_successes = c.evset.grow_successes;
    FindAllResult r = find_all_evsets(tester, std::move(pool), rng, o);
    sets = std::move(r.evsets);
    targets = std::move(r.targets);
  } else {
    GrowSplitOptions o;
    o.pool_size = c.evset.pool_size;
    o.check_trials = c.evset.check_trials;
    GrowSplitResult r = grow_split(tester, std::move(pool), rng, o);
    sets = std::move(r.evsets);
    targets = std::move(r.targets);
  }
  for (const EvictionSet& s : sets) run.set_sizes.push_back(s.addresses.size());
  if (!sets.empty() && !targets.empty()) run.stats = evaluate(tester, sets, targets, c.evset.evaluate_reps);
  run.trials = tester.trials_run();
  return run;
}

inline Table evset_runs_table(const std::vector<EvsetRun>& runs, std::string name = "evsets") {
  Table t{std::move(name),
          {"algorithm", "flush", "seed", "number_of_sets", "mean_set_size", "useful_sets_per_target",
           "average_best_eviction_rate"},
          {}};
  for (const EvsetRun& r : runs) {
    t.add({std::string(to_string(r.algorithm)), std::int64_t{r.flush}, r.seed,
           std::uint64_t{r.stats.number_of_sets}, r.stats.mean_set_size, r.stats.useful_sets_per_target,
           r.stats.average_best_eviction_rate});
  }
  return t;
}

inline Table size_histogram_table(const std::vector<EvsetRun>& runs, std::string name = "evset_sizes") {
  std::map<std::size_t, std::uint64_t> h;
  for (const EvsetRun& r : runs)
    for (std::size_t s : r.set_sizes) ++h[s];
  Table t{std::move(name), {"size", "count"}, {}};
  for (const auto& [size, count] : h) t.add({std::uint64_t{size}, count});
  return t;
}

/// Builds the eviction set a Prime+Probe receiver uses: grow-reduce on one
/// random target with the configured eviction tests.
inline EvictionSet receiver_evset(const ExperimentConfig& c, Platform& platform, Monitor& monitor,
                                  std::uint64_t seed) {
  EvictionTester tester(platform, monitor, threshold_of(c), test_options(c));
  Rng rng(derive_seed(seed, "receiver-evset"));
  AddressPool pool = AddressPool::allocate(c.evset.pool_size, rng);
  if (pool.empty()) throw Error(Errc::ChannelSetupError, "empty address pool");
  const PageAddress target = pool.take_random(rng);
  GrowReduceOptions o;
  o.grow_successes = c.evset.grow_successes;
  return construct_evset(tester, target, pool, rng, o);
}

// ---------------------------------------------------------------------------
// SQL trace

struct SqlPanel {
  std::string label;
  std::optional<std::uint64_t> rows;  // empty: no query
  std::vector<Cycles> latencies;      // per eviction-set address, prime order
  std::uint32_t above_threshold = 0;
};

struct SqlTraceResult {
  Threshold threshold;
  std::vector<SqlPanel> panels;
};

/// Prime, optionally run one query, probe every address of the receiver's
/// eviction set. Panels: no query, then queries returning 0, 1 and 409600
/// rows.
inline SqlTraceResult run_sql_trace(const ExperimentConfig& c, std::uint64_t seed,
                                    std::vector<std::optional<std::uint64_t>> panels = {std::nullopt, 0, 1, 409600}) {
  Platform platform = make_platform(c, seed);
  Monitor monitor(c.monitor.device, derive_seed(seed, "monitor"));
  const EvictionSet evset = receiver_evset(c, platform, monitor, seed);
  if (!evset.verified) throw Error(Errc::ChannelSetupError, "could not build a verified eviction set");
  QuerySender sender(query_sender_config(c, seed));

  SqlTraceResult result;
  result.threshold = threshold_of(c);
  MonitorProgram prime;
  prime.instructions = {MonitorInstruction::evset_prime()};
  prime.evset_prime_addrs = evset.addresses;
  MonitorProgram probe;
  probe.instructions = {MonitorInstruction::evset_probe()};
  probe.evset_probe_addrs.assign(evset.addresses.rbegin(), evset.addresses.rend());

  for (const auto& rows : panels) {
    SqlPanel panel;
    panel.label = rows ? "rows_" + std::to_string(*rows) : "no_query";
    panel.rows = rows;
    monitor.run_program(platform, prime);
    monitor.run_program(platform, prime);
    if (rows) sender.run_query(platform, *rows);
    const auto records = monitor.run_program(platform, probe);
    const auto& reversed = records.front().latencies;
    panel.latencies.assign(reversed.rbegin(), reversed.rend());
    for (Cycles l : panel.latencies)
      panel.above_threshold += classify(l, result.threshold) == AccessOutcome::Miss ? 1 : 0;
    result.panels.push_back(std::move(panel));
  }
  return result;
}

inline std::vector<Table> sql_trace_tables(const SqlTraceResult& r) {
  Table trace{"sql_trace", {"panel", "address_index", "latency_cycles", "above_threshold"}, {}};
  Table summary{"sql_trace_summary", {"panel", "rows", "addresses_above_threshold", "threshold_cycles"}, {}};
  for (const SqlPanel& p : r.panels) {
    for (std::size_t i = 0; i < p.latencies.size(); ++i)
      trace.add({p.label, std::uint64_t{i}, std::uint64_t{p.latencies[i]},
                 std::int64_t{p.latencies[i] > r.threshold.cycles}});
    summary.add({p.label, p.rows ? Cell{*p.rows} : Cell{std::string("none")}, std::uint64_t{p.above_threshold},
                 std::uint64_t{r.threshold.cycles}});
  }
  return {trace, summary};
}

// ---------------------------------------------------------------------------
// Covert channels

struct ChannelRun {
  BitMessage sent;
  TransmissionReport report;
  std::size_t evset_size = 0;
};

/// Prime+Probe from the query sender to the monitor on a fresh platform.
inline ChannelRun run_pp_channel(const ExperimentConfig& c, std::uint64_t seed, const BitMessage& message) {
  Platform platform = make_platform(c, seed);
  Monitor monitor(c.monitor.device, derive_seed(seed, "monitor"));
  const EvictionSet evset = receiver_evset(c, platform, monitor, seed);
  QuerySender sender(query_sender_config(c, seed));
  ChannelConfig cc = c.channel.config;
  cc.seed = derive_seed(seed, "channel");
  ChannelRun run;
  run.sent = message;
  run.evset_size = evset.addresses.size();
  run.report = pp_transmit(message, sender, monitor, platform, evset, threshold_of(c), cc);
  return run;
}

/// Flush+Reload from the CPU flusher to the monitor on a fresh platform.
inline ChannelRun run_fr_channel(const ExperimentConfig& c, std::uint64_t seed, const BitMessage& message) {
  Platform platform = make_platform(c, seed);
  Monitor monitor(c.monitor.device, derive_seed(seed, "monitor"));
  FlushSender sender(c.flush);
  Rng rng(derive_seed(seed, "fr-target"));
  const PageAddress target = draw_distinct_pages(1, rng).front();
  ChannelConfig cc = c.channel.config;
  cc.seed = derive_seed(seed, "channel");
  ChannelRun run;
  run.sent = message;
  run.report = fr_transmit(message, sender, monitor, platform, target, threshold_of(c), cc);
  return run;
}

inline Table channel_trace_table(const ChannelRun& run, std::string name = "channel_trace") {
  Table t{std::move(name), {"bit_index", "sent_bit", "miss_count", "decoded_bit"}, {}};
  for (std::size_t i = 0; i < run.sent.size(); ++i) {
    t.add({std::uint64_t{i}, std::uint64_t{run.sent.bits[i]}, std::uint64_t{run.report.per_bit_miss_counts[i]},
           std::uint64_t{run.report.decoded.bits[i]}});
  }
  return t;
}

inline nlohmann::ordered_json channel_report_record(const ChannelRun& run, ChannelKind kind, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["channel"] = to_string(kind);
  j["seed"] = seed;
  j["bits"] = run.sent.size();
  j["decoded"] = run.report.decoded.to_bits();
  if (run.sent.size() % 8 == 0) {
    const std::string text = run.report.decoded.to_text();
    if (std::all_of(text.begin(), text.end(), [](char ch) { return ch >= 0x20 && ch < 0x7f; }))
      j["decoded_text"] = text;
  }
  j["per_bit_miss_counts"] = run.report.per_bit_miss_counts;
  j["duration_ns"] = run.report.duration.count();
  j["throughput_bps"] = run.report.throughput_bps;
  j["bit_error_rate"] = run.report.bit_error_rate;
  return j;
}

// ---------------------------------------------------------------------------
// Eviction-set histograms

struct HistogramVariant {
  bool shuffle = false;
  Nanos inter_test_delay{0};
  std::vector<EvsetRun> runs;
};

/// find-all with and without prime-order shuffling and a 100 ns pause
/// between tests.
inline std::vector<HistogramVariant> run_evset_histograms(const ExperimentConfig& c, std::uint64_t seed,
                                                          std::uint32_t reps) {
  std::vector<HistogramVariant> out;
  for (bool shuffle : {false, true}) {
    for (Nanos delay : {Nanos{0}, Nanos{100}}) {
      HistogramVariant v;
      v.shuffle = shuffle;
      v.inter_test_delay = delay;
      ExperimentConfig variant = c;
      variant.evset.shuffle = shuffle;
      variant.evset.inter_test_delay = delay;
      for (std::uint32_t r = 0; r < reps; ++r)
        v.runs.push_back(run_evset_experiment(variant, EvsetAlgorithm::GrowReduce, seed + r));
      out.push_back(std::move(v));
    }
  }
  return out;
}

inline Table evset_histograms_table(const std::vector<HistogramVariant>& variants) {
  Table t{"evset_histograms", {"shuffle", "inter_test_delay_ns", "size", "count"}, {}};
  for (const HistogramVariant& v : variants) {
    for (const auto& row : size_histogram_table(v.runs).rows)
      t.add({std::int64_t{v.shuffle}, std::int64_t{v.inter_test_delay.count()}, row[0], row[1]});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Algorithm comparison (table2 scenario)

struct Table2Cell {
  std::string profile;
  EvsetAlgorithm algorithm = EvsetAlgorithm::GrowReduce;
  std::vector<EvsetRun> runs;

  EvsetStats mean() const {
    EvsetStats m;
    if (runs.empty()) return m;
    double sets = 0;
    for (const EvsetRun& r : runs) {
      sets += static_cast<double>(r.stats.number_of_sets);
      m.mean_set_size += r.stats.mean_set_size;
      m.useful_sets_per_target += r.stats.useful_sets_per_target;
      m.average_best_eviction_rate += r.stats.average_best_eviction_rate;
    }
    const double n = static_cast<double>(runs.size());
    m.number_of_sets = static_cast<std::size_t>(sets / n + 0.5);
    m.mean_set_size /= n;
    m.useful_sets_per_target /= n;
    m.average_best_eviction_rate /= n;
    return m;
  }

  double mean_number_of_sets() const {
    double sets = 0;
    for (const EvsetRun& r : runs) sets += static_cast<double>(r.stats.number_of_sets);
    return runs.empty() ? 0.0 : sets / static_cast<double>(runs.size());
  }
};

/// Both algorithms on one profile, `reps` runs each. Run r of either
/// algorithm uses seed + r, so the two columns are paired.
inline std::vector<Table2Cell> run_table2_profile(const std::string& profile, std::uint64_t seed,
                                                  std::uint32_t reps) {
  const ExperimentConfig c = *builtin_profile(profile);
  std::vector<Table2Cell> cells;
  for (EvsetAlgorithm a : {EvsetAlgorithm::GrowReduce, EvsetAlgorithm::GrowSplit}) {
    Table2Cell cell;
    cell.profile = profile;
    cell.algorithm = a;
    for (std::uint32_t r = 0; r < reps; ++r) cell.runs.push_back(run_evset_experiment(c, a, seed + r));
    cells.push_back(std::move(cell));
  }
  return cells;
}

inline std::vector<Table2Cell> run_table2(std::uint64_t seed, std::uint32_t reps) {
  std::vector<Table2Cell> cells = run_table2_profile("reference-118-lru", seed, reps);
  for (Table2Cell& c : run_table2_profile("noflush-118-random", seed, reps)) cells.push_back(std::move(c));
  return cells;
}

inline std::vector<Table> table2_tables(const std::vector<Table2Cell>& cells) {
  Table summary{"table2",
                {"profile", "flush", "algorithm", "runs", "number_of_sets", "mean_set_size",
                 "useful_sets_per_target", "average_best_eviction_rate"},
                {}};
  std::vector<EvsetRun> all;
  for (const Table2Cell& cell : cells) {
    const EvsetStats m = cell.mean();
    const bool flush = !cell.runs.empty() && cell.runs.front().flush;
    summary.add({cell.profile, std::int64_t{flush}, std::string(to_string(cell.algorithm)),
                 std::uint64_t{cell.runs.size()}, cell.mean_number_of_sets(), m.mean_set_size,
                 m.useful_sets_per_target, m.average_best_eviction_rate});
    all.insert(all.end(), cell.runs.begin(), cell.runs.end());
  }
  return {summary, evset_runs_table(all, "table2_runs")};
}

// ---------------------------------------------------------------------------
// NIC experiment

struct NicOptions {
  std::uint32_t reboots = 120;
  std::uint32_t probes_per_boot = 10;
  // Sets the monitor's own descriptor and control pages map to. Probing a
  // hypothesized set there always misses.
  std::vector<std::uint32_t> infrastructure_sets{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 125, 126, 127};
};

struct NicExperimentResult {
  // Fraction of boots in which the index was evicted in every probe.
  std::vector<double> with_traffic;
  std::vector<double> without_traffic;
  std::vector<std::uint32_t> buffer_counts;  // extra buffers per boot

  /// evicted_regardless, evicted_during_activity or never.
  std::string class_of(std::size_t index) const {
    if (without_traffic[index] >= 1.0) return "evicted_regardless";
    if (with_traffic[index] > 0.0) return "evicted_during_activity";
    return "never";
  }
};

/// One hypothesized single-page eviction set per set index, primed and
/// probed while the NIC is idle and while it handles packets, across
/// reboots that remap the NIC's buffers.
inline NicExperimentResult run_nic_experiment(const ExperimentConfig& c, std::uint64_t seed,
                                              const NicOptions& options = {}) {
  const std::uint32_t sets = c.tlb.num_sets;
  Platform platform = make_platform(c, seed);
  Monitor monitor(c.monitor.device, derive_seed(seed, "monitor"));
  NicSender nic(nic_sender_config(c, seed));
  const Threshold threshold = threshold_of(c);

  // Page numbers are multiples of the set count apart, so page base + i
  // maps to set i under low-bit indexing.
  const std::uint64_t probe_base = std::uint64_t{1} << 32;
  const std::uint64_t infra_base = probe_base + (std::uint64_t{1} << 24);
  std::vector<PageAddress> probe_pages;
  for (std::uint32_t i = 0; i < sets; ++i) probe_pages.push_back(PageAddress{probe_base + i});
  std::vector<PageAddress> infra_pages;
  for (std::uint32_t s : options.infrastructure_sets) {
    if (s < sets) infra_pages.push_back(PageAddress{infra_base + s});
  }

  auto consistently_evicted = [&](bool traffic) {
    std::vector<std::uint8_t> always(sets, 1);
    for (std::uint32_t p = 0; p < options.probes_per_boot; ++p) {
      monitor.prime(platform, probe_pages);
      monitor.prime(platform, infra_pages);
      if (traffic) nic.traffic(platform);
      const std::vector<Cycles> lat = monitor.probe_each(platform, probe_pages);
      for (std::uint32_t i = 0; i < sets; ++i)
        if (classify(lat[i], threshold) == AccessOutcome::Hit) always[i] = 0;
    }
    return always;
  };

  NicExperimentResult result;
  result.with_traffic.assign(sets, 0.0);
  result.without_traffic.assign(sets, 0.0);
  for (std::uint32_t boot = 0; boot < options.reboots; ++boot) {
    if (boot > 0) nic.reboot();
    result.buffer_counts.push_back(static_cast<std::uint32_t>(nic.startup_buffer_pages().size() - 1));
    const auto idle = consistently_evicted(false);
    const auto busy = consistently_evicted(true);
    for (std::uint32_t i = 0; i < sets; ++i) {
      result.without_traffic[i] += idle[i];
      result.with_traffic[i] += busy[i];
    }
  }
  for (std::uint32_t i = 0; i < sets; ++i) {
    result.without_traffic[i] /= options.reboots;
    result.with_traffic[i] /= options.reboots;
  }
  return result;
}

inline std::vector<Table> nic_tables(const NicExperimentResult& r) {
  Table t{"nic_eviction",
          {"index", "probability_with_traffic", "probability_without_traffic", "class"},
          {}};
  for (std::size_t i = 0; i < r.with_traffic.size(); ++i)
    t.add({std::uint64_t{i + 1}, r.with_traffic[i], r.without_traffic[i], r.class_of(i)});
  Table boots{"nic_boots", {"boot", "extra_buffers"}, {}};
  for (std::size_t b = 0; b < r.buffer_counts.size(); ++b)
    boots.add({std::uint64_t{b}, std::uint64_t{r.buffer_counts[b]}});
  return {t, boots};
}

}  // namespace iotlbsim
