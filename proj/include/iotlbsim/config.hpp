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

#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "iotlbsim/channel.hpp"
#include "iotlbsim/devices.hpp"
#include "iotlbsim/error.hpp"
#include "iotlbsim/evset.hpp"
#include "iotlbsim/iotlb.hpp"
#include "iotlbsim/platform.hpp"
#include "iotlbsim/rng.hpp"
#include "iotlbsim/timing.hpp"

namespace iotlbsim {

enum class OutputFormat { Csv, Jsonl };

constexpr std::string_view to_string(OutputFormat f) { return f == OutputFormat::Csv ? "csv" : "jsonl"; }

struct MonitorSection {
  DeviceId device{0};
  DomainId domain{0};

  friend bool operator==(const MonitorSection&, const MonitorSection&) = default;
};

struct QuerySection {
  DeviceId device{1};
  DomainId domain{1};
  std::uint32_t footprint_pages = 19;
  Nanos query_duration = std::chrono::milliseconds(300);

  friend bool operator==(const QuerySection&, const QuerySection&) = default;
};

struct NicSection {
  DeviceId device{2};
  DomainId domain{2};
  std::uint64_t pinned_offset = 10;
  std::uint64_t region_alignment_pages = 4096;
  std::uint32_t buffer_count_min = 1;
  std::uint32_t buffer_count_max = 15;
  std::uint32_t packets_per_probe = 32;
  double buffer_touch_probability = 0.5;

  friend bool operator==(const NicSection&, const NicSection&) = default;
};

struct EvsetSection {
  EvsetAlgorithm algorithm = EvsetAlgorithm::GrowReduce;
  bool flush = true;
  std::uint32_t trials = 100;
  std::uint32_t pool_size = 4096;
  std::uint32_t check_trials = 10;
  std::uint32_t grow_successes = 50;
  std::uint32_t evaluate_reps = 40;
  bool shuffle = false;
  Nanos inter_test_delay{0};

  friend bool operator==(const EvsetSection&, const EvsetSection&) = default;
};

struct ChannelSection {
  ChannelConfig config;
  std::string message = "Hello";
  Endianness endianness = Endianness::Big;

  friend bool operator==(const ChannelSection&, const ChannelSection&) = default;
};

/// Everything one experiment needs. Random streams are not configured
/// individually; they all derive from `seed`.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  OutputFormat output_format = OutputFormat::Csv;
  TlbConfig tlb;
  bool flush_available = true;
  LatencyModel timing;
  std::optional<Cycles> threshold_cycles;
  MonitorSection monitor;
  QuerySection query;
  NicSection nic;
  FlushSenderConfig flush;
  EvsetSection evset;
  ChannelSection channel;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

using nlohmann::json;

inline std::string join_path(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

[[noreturn]] inline void constraint(const std::string& path, const std::string& what) {
  throw Error(Errc::ConfigConstraint, path + ": " + what);
}

/// Reads the keys of one JSON object and remembers which ones were used, so
/// that leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& object, std::string path) : object_(object), path_(std::move(path)) {
    if (!object_.is_object()) constraint(path_.empty() ? "<root>" : path_, "expected an object");
  }

  const std::string& path() const { return path_; }

  const json* find(std::string_view key) {
    used_.insert(std::string(key));
    auto it = object_.find(std::string(key));
    return it == object_.end() ? nullptr : &*it;
  }

  std::optional<Section> child(std::string_view key) {
    const json* v = find(key);
    if (v == nullptr) return std::nullopt;
    return Section(*v, join_path(path_, key));
  }

  template <typename T>
  void unsigned_int(std::string_view key, T& out, std::uint64_t max = std::numeric_limits<T>::max()) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_number_unsigned()) constraint(join_path(path_, key), "expected a non-negative integer");
    const auto value = v->get<std::uint64_t>();
    if (value > max) constraint(join_path(path_, key), "must be at most " + std::to_string(max));
    out = static_cast<T>(value);
  }

  void nanos(std::string_view key, Nanos& out) {
    std::uint64_t ns = static_cast<std::uint64_t>(out.count());
    unsigned_int(key, ns, static_cast<std::uint64_t>(std::numeric_limits<Nanos::rep>::max()));
    out = Nanos{static_cast<Nanos::rep>(ns)};
  }

  void optional_nanos(std::string_view key, std::optional<Nanos>& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (v->is_null()) {
      out.reset();
      return;
    }
    Nanos n{0};
    nanos(key, n);
    out = n;
  }

  void number(std::string_view key, double& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_number()) constraint(join_path(path_, key), "expected a number");
    out = v->get<double>();
  }

  void boolean(std::string_view key, bool& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_boolean()) constraint(join_path(path_, key), "expected true or false");
    out = v->get<bool>();
  }

  void string(std::string_view key, std::string& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    if (!v->is_string()) constraint(join_path(path_, key), "expected a string");
    out = v->get<std::string>();
  }

  template <typename E, std::size_t N>
  void enumeration(std::string_view key, E& out, const E (&values)[N]) {
    std::string name;
    const json* v = find(key);
    if (v == nullptr) return;
    string(key, name);
    std::string allowed;
    for (E e : values) {
      if (to_string(e) == name) {
        out = e;
        return;
      }
      allowed += (allowed.empty() ? "" : ", ") + std::string(to_string(e));
    }
    constraint(join_path(path_, key), "must be one of " + allowed);
  }

  void finish() const {
    for (const auto& [key, value] : object_.items()) {
      if (!used_.contains(key))
        throw Error(Errc::ConfigUnknownKey, "unknown key " + join_path(path_, key));
    }
  }

 private:
  const json& object_;
  std::string path_;
  std::set<std::string> used_;
};

inline json parse_json(std::string_view text) {
  // Duplicate keys are a syntax error; nlohmann would keep the last one.
  std::vector<std::set<std::string>> open;
  std::optional<std::string> duplicate;
  auto callback = [&](int, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start: open.emplace_back(); break;
      case json::parse_event_t::object_end: open.pop_back(); break;
      case json::parse_event_t::key:
        if (!open.back().insert(parsed.get<std::string>()).second && !duplicate)
          duplicate = parsed.get<std::string>();
        break;
      default: break;
    }
    return true;
  };
  json root;
  try {
    root = json::parse(text.begin(), text.end(), callback);
  } catch (const json::parse_error& e) {
    throw Error(Errc::ConfigSyntax, e.what());
  }
  if (duplicate) throw Error(Errc::ConfigSyntax, "duplicate key \"" + *duplicate + "\"");
  return root;
}

inline void read_peaks(Section& s, std::string_view key, std::vector<LatencyPeak>& out) {
  const json* v = s.find(key);
  if (v == nullptr) return;
  const std::string path = join_path(s.path(), key);
  if (!v->is_array()) constraint(path, "expected an array of peaks");
  out.clear();
  for (std::size_t i = 0; i < v->size(); ++i) {
    Section peak((*v)[i], path + "[" + std::to_string(i) + "]");
    LatencyPeak p;
    peak.number("mean_cycles", p.mean_cycles);
    peak.number("weight", p.weight);
    peak.finish();
    out.push_back(p);
  }
}

inline std::map<DeviceId, IndexSet> read_partition(Section& s, std::string_view key) {
  std::map<DeviceId, IndexSet> out;
  const json* v = s.find(key);
  if (v == nullptr) return out;
  const std::string path = join_path(s.path(), key);
  if (!v->is_object()) constraint(path, "expected an object mapping device ids to index lists");
  for (const auto& [device, list] : v->items()) {
    const std::string entry = path + "." + device;
    std::uint32_t id = 0;
    try {
      std::size_t used = 0;
      const unsigned long parsed = std::stoul(device, &used);
      if (used != device.size() || parsed >= (1u << 16)) throw std::out_of_range(device);
      id = static_cast<std::uint32_t>(parsed);
    } catch (const std::exception&) {
      constraint(entry, "device id must be an integer below 65536");
    }
    if (!list.is_array()) constraint(entry, "expected an array of indices");
    IndexSet indices;
    for (const json& idx : list) {
      if (!idx.is_number_unsigned() || idx.get<std::uint64_t>() > 0xffffffffULL)
        constraint(entry, "indices must be non-negative integers");
      indices.insert(idx.get<std::uint32_t>());
    }
    out[DeviceId{id}] = std::move(indices);
  }
  return out;
}

inline void register_device(TlbConfig& tlb, DeviceId device, DomainId domain, const std::string& path) {
  auto [it, inserted] = tlb.device_domains.emplace(device, domain);
  if (!inserted && it->second != domain)
    constraint(path, "device " + std::to_string(device.value) + " is already registered in domain " +
                         std::to_string(it->second.value));
}

inline void register_devices(ExperimentConfig& c) {
  c.tlb.device_domains.clear();
  register_device(c.tlb, c.monitor.device, c.monitor.domain, "monitor.device");
  register_device(c.tlb, c.query.device, c.query.domain, "sender.query.device");
  register_device(c.tlb, c.nic.device, c.nic.domain, "sender.nic.device");
}

inline void check_constraints(ExperimentConfig& c) {
  if (c.tlb.num_sets == 0) constraint("tlb.num_sets", "must be positive");
  if (c.tlb.ways == 0) constraint("tlb.ways", "must be positive");
  for (const auto* section : {&c.monitor.domain, &c.query.domain, &c.nic.domain}) {
    if (section->value >= DomainId::kLimit)
      constraint("domain", "domain ids must be below " + std::to_string(DomainId::kLimit));
  }
  register_devices(c);
  try {
    c.tlb.validate();
  } catch (const Error& e) {
    constraint("tlb", e.what());
  }
  try {
    c.timing.validate();
  } catch (const Error& e) {
    constraint("timing", e.what());
  }
  if (!c.threshold_cycles) {
    try {
      calibrate(c.timing);
    } catch (const Error& e) {
      constraint("timing", e.what());
    }
  }
  if (c.query.footprint_pages == 0) constraint("sender.query.footprint_pages", "must be at least 1");
  if (c.query.query_duration.count() <= 0) constraint("sender.query.query_duration_ns", "must be positive");
  if (c.nic.region_alignment_pages == 0) constraint("sender.nic.region_alignment_pages", "must be positive");
  if (c.nic.pinned_offset + c.nic.buffer_count_max >= c.nic.region_alignment_pages)
    constraint("sender.nic.pinned_offset", "buffers must fit inside one region");
  if (c.nic.buffer_count_min > c.nic.buffer_count_max)
    constraint("sender.nic.buffer_count_min", "must not exceed buffer_count_max");
  if (!(c.nic.buffer_touch_probability >= 0 && c.nic.buffer_touch_probability <= 1))
    constraint("sender.nic.buffer_touch_probability", "must lie in [0, 1]");
  if (c.flush.flush_duration.count() <= 0) constraint("sender.flush.flush_duration_ns", "must be positive");
  if (c.evset.trials == 0) constraint("evset.trials", "must be positive");
  if (c.evset.check_trials == 0) constraint("evset.check_trials", "must be positive");
  if (c.evset.evaluate_reps == 0) constraint("evset.evaluate_reps", "must be positive");
  if (c.evset.flush && !c.flush_available)
    constraint("evset.flush", "flush-based eviction tests need tlb.flush_available");
  if (c.channel.config.slot_1_duration && c.channel.config.slot_1_duration->count() == 0)
    constraint("channel.slot_1_duration_ns", "must be positive");
  if (c.channel.config.slot_0_duration && c.channel.config.slot_0_duration->count() == 0)
    constraint("channel.slot_0_duration_ns", "must be positive");
  if (c.channel.config.decode_threshold_misses == 0)
    constraint("channel.decode_threshold_misses", "must be at least 1");
}

inline constexpr IndexFunction kIndexFunctions[] = {IndexFunction::ModuloLowBits, IndexFunction::XorFold,
                                                    IndexFunction::FullyAssociative};
inline constexpr ReplacementPolicy kPolicies[] = {ReplacementPolicy::Lru, ReplacementPolicy::Fifo,
                                                  ReplacementPolicy::TreePlru, ReplacementPolicy::RandomSeeded};
inline constexpr OutputFormat kOutputFormats[] = {OutputFormat::Csv, OutputFormat::Jsonl};
inline constexpr EvsetAlgorithm kAlgorithms[] = {EvsetAlgorithm::GrowReduce, EvsetAlgorithm::GrowSplit};
inline constexpr Endianness kEndianness[] = {Endianness::Big, Endianness::Little};

}  // namespace detail

/// Overlays a JSON document on `base`. Keys that are absent keep their base
/// value.
inline ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {}) {
  using detail::Section;
  const auto root_json = detail::parse_json(text);
  Section root(root_json, "");
  ExperimentConfig c = std::move(base);
  root.unsigned_int("seed", c.seed);
  root.enumeration("output_format", c.output_format, detail::kOutputFormats);

  if (auto s = root.child("tlb")) {
    s->unsigned_int("num_sets", c.tlb.num_sets);
    s->unsigned_int("ways", c.tlb.ways);
    s->enumeration("index_function", c.tlb.index_fn, detail::kIndexFunctions);
    s->enumeration("replacement", c.tlb.replacement, detail::kPolicies);
    s->boolean("flush_available", c.flush_available);
    if (s->find("way_partition")) c.tlb.way_partition = detail::read_partition(*s, "way_partition");
    if (s->find("set_partition")) c.tlb.set_partition = detail::read_partition(*s, "set_partition");
    if (const auto* v = s->find("uncacheable_pages")) {
      if (!v->is_array()) detail::constraint("tlb.uncacheable_pages", "expected an array");
      c.tlb.uncacheable_pages.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        Section page((*v)[i], "tlb.uncacheable_pages[" + std::to_string(i) + "]");
        std::uint32_t domain = 0;
        std::uint64_t number = 0;
        page.unsigned_int("domain", domain);
        page.unsigned_int("page", number);
        page.finish();
        c.tlb.uncacheable_pages.insert({DomainId{domain}, PageAddress{number}});
      }
    }
    if (const auto* v = s->find("ats_bypass_devices")) {
      if (!v->is_array()) detail::constraint("tlb.ats_bypass_devices", "expected an array");
      c.tlb.ats_bypass_devices.clear();
      for (const auto& d : *v) {
        if (!d.is_number_unsigned()) detail::constraint("tlb.ats_bypass_devices", "expected device ids");
        c.tlb.ats_bypass_devices.insert(DeviceId{d.get<std::uint32_t>()});
      }
    }
    s->finish();
  }

  if (auto s = root.child("timing")) {
    detail::read_peaks(*s, "hit_peaks", c.timing.hit_peaks);
    detail::read_peaks(*s, "miss_peaks", c.timing.miss_peaks);
    s->number("jitter_stddev", c.timing.jitter_stddev);
    if (const auto* v = s->find("threshold_cycles")) {
      if (v->is_null()) {
        c.threshold_cycles.reset();
      } else {
        Cycles t = 0;
        s->unsigned_int("threshold_cycles", t);
        c.threshold_cycles = t;
      }
    }
    s->finish();
  }

  if (auto s = root.child("monitor")) {
    s->unsigned_int("device", c.monitor.device.value, 0xffff);
    s->unsigned_int("domain", c.monitor.domain.value);
    s->finish();
  }

  if (auto sender = root.child("sender")) {
    if (auto s = sender->child("query")) {
      s->unsigned_int("device", c.query.device.value, 0xffff);
      s->unsigned_int("domain", c.query.domain.value);
      s->unsigned_int("footprint_pages", c.query.footprint_pages);
      s->nanos("query_duration_ns", c.query.query_duration);
      s->finish();
    }
    if (auto s = sender->child("nic")) {
      s->unsigned_int("device", c.nic.device.value, 0xffff);
      s->unsigned_int("domain", c.nic.domain.value);
      s->unsigned_int("pinned_offset", c.nic.pinned_offset);
      s->unsigned_int("region_alignment_pages", c.nic.region_alignment_pages);
      s->unsigned_int("buffer_count_min", c.nic.buffer_count_min);
      s->unsigned_int("buffer_count_max", c.nic.buffer_count_max);
      s->unsigned_int("packets_per_probe", c.nic.packets_per_probe);
      s->number("buffer_touch_probability", c.nic.buffer_touch_probability);
      s->finish();
    }
    if (auto s = sender->child("flush")) {
      s->nanos("flush_duration_ns", c.flush.flush_duration);
      s->finish();
    }
    sender->finish();
  }

  if (auto s = root.child("evset")) {
    s->enumeration("algorithm", c.evset.algorithm, detail::kAlgorithms);
    s->boolean("flush", c.evset.flush);
    s->unsigned_int("trials", c.evset.trials);
    s->unsigned_int("pool_size", c.evset.pool_size);
    s->unsigned_int("check_trials", c.evset.check_trials);
    s->unsigned_int("grow_successes", c.evset.grow_successes);
    s->unsigned_int("evaluate_reps", c.evset.evaluate_reps);
    s->boolean("shuffle", c.evset.shuffle);
    s->nanos("inter_test_delay_ns", c.evset.inter_test_delay);
    s->finish();
  }

  if (auto s = root.child("channel")) {
    s->optional_nanos("slot_1_duration_ns", c.channel.config.slot_1_duration);
    s->optional_nanos("slot_0_duration_ns", c.channel.config.slot_0_duration);
    s->unsigned_int("decode_threshold_misses", c.channel.config.decode_threshold_misses);
    s->nanos("sync_jitter_stddev_ns", c.channel.config.sync_jitter_stddev);
    s->string("message", c.channel.message);
    s->enumeration("endianness", c.channel.endianness, detail::kEndianness);
    s->finish();
  }

  root.finish();
  detail::check_constraints(c);
  return c;
}

/// Canonical JSON form; every key is written, object keys are sorted.
inline std::string serialize_config(const ExperimentConfig& c) {
  using nlohmann::json;
  auto peaks = [](const std::vector<LatencyPeak>& ps) {
    json out = json::array();
    for (const LatencyPeak& p : ps) out.push_back({{"mean_cycles", p.mean_cycles}, {"weight", p.weight}});
    return out;
  };
  auto partition = [](const std::map<DeviceId, IndexSet>& p) {
    json out = json::object();
    for (const auto& [device, indices] : p) out[std::to_string(device.value)] = indices;
    return out;
  };
  auto optional_ns = [](const std::optional<Nanos>& n) { return n ? json(n->count()) : json(nullptr); };

  json uncacheable = json::array();
  for (const auto& [domain, page] : c.tlb.uncacheable_pages)
    uncacheable.push_back({{"domain", domain.value}, {"page", page.number}});
  json bypass = json::array();
  for (DeviceId d : c.tlb.ats_bypass_devices) bypass.push_back(d.value);

  json j;
  j["seed"] = c.seed;
  j["output_format"] = to_string(c.output_format);
  j["tlb"] = {{"num_sets", c.tlb.num_sets},
              {"ways", c.tlb.ways},
              {"index_function", to_string(c.tlb.index_fn)},
              {"replacement", to_string(c.tlb.replacement)},
              {"flush_available", c.flush_available},
              {"way_partition", partition(c.tlb.way_partition)},
              {"set_partition", partition(c.tlb.set_partition)},
              {"uncacheable_pages", uncacheable},
              {"ats_bypass_devices", bypass}};
  j["timing"] = {{"hit_peaks", peaks(c.timing.hit_peaks)},
                 {"miss_peaks", peaks(c.timing.miss_peaks)},
                 {"jitter_stddev", c.timing.jitter_stddev},
                 {"threshold_cycles", c.threshold_cycles ? json(*c.threshold_cycles) : json(nullptr)}};
  j["monitor"] = {{"device", c.monitor.device.value},
                  {"domain", c.monitor.domain.value}};
  j["sender"]["query"] = {{"device", c.query.device.value},
                          {"domain", c.query.domain.value},
                          {"footprint_pages", c.query.footprint_pages},
                          {"query_duration_ns", c.query.query_duration.count()}};
  j["sender"]["nic"] = {{"device", c.nic.device.value},
                        {"domain", c.nic.domain.value},
                        {"pinned_offset", c.nic.pinned_offset},
                        {"region_alignment_pages", c.nic.region_alignment_pages},
                        {"buffer_count_min", c.nic.buffer_count_min},
                        {"buffer_count_max", c.nic.buffer_count_max},
                        {"packets_per_probe", c.nic.packets_per_probe},
                        {"buffer_touch_probability", c.nic.buffer_touch_probability}};
  j["sender"]["flush"] = {{"flush_duration_ns", c.flush.flush_duration.count()}};
  j["evset"] = {{"algorithm", to_string(c.evset.algorithm)},
                {"flush", c.evset.flush},
                {"trials", c.evset.trials},
                {"pool_size", c.evset.pool_size},
                {"check_trials", c.evset.check_trials},
                {"grow_successes", c.evset.grow_successes},
                {"evaluate_reps", c.evset.evaluate_reps},
                {"shuffle", c.evset.shuffle},
                {"inter_test_delay_ns", c.evset.inter_test_delay.count()}};
  j["channel"] = {{"slot_1_duration_ns", optional_ns(c.channel.config.slot_1_duration)},
                  {"slot_0_duration_ns", optional_ns(c.channel.config.slot_0_duration)},
                  {"decode_threshold_misses", c.channel.config.decode_threshold_misses},
                  {"sync_jitter_stddev_ns", c.channel.config.sync_jitter_stddev.count()},
                  {"message", c.channel.message},
                  {"endianness", to_string(c.channel.endianness)}};
  return j.dump(2) + "\n";
}

/// FNV-1a over the canonical serialization.
inline std::uint64_t config_digest(const ExperimentConfig& c) { return fnv1a64(serialize_config(c)); }

// ---------------------------------------------------------------------------
// Built-in profiles

/// One fully associative 118-entry LRU set; the CPU side can flush.
inline ExperimentConfig reference_profile() {
  ExperimentConfig c;
  detail::register_devices(c);
  return c;
}

/// Same capacity with random replacement and no flush primitive, which
/// makes eviction tests unreliable.
inline ExperimentConfig noflush_random_profile() {
  ExperimentConfig c;
  c.tlb.replacement = ReplacementPolicy::RandomSeeded;
  c.flush_available = false;
  c.evset.flush = false;
  detail::register_devices(c);
  return c;
}

/// 128 direct-mapped sets indexed by the low page bits, two devices in
/// separate domains, no flush.
inline ExperimentConfig nic_profile() {
  ExperimentConfig c;
  c.tlb.num_sets = 128;
  c.tlb.ways = 1;
  c.tlb.index_fn = IndexFunction::ModuloLowBits;
  c.flush_available = false;
  c.evset.flush = false;
  detail::register_devices(c);
  return c;
}

inline const std::vector<std::string>& builtin_profile_names() {
  static const std::vector<std::string> names{"reference-118-lru", "noflush-118-random", "nic-128x1"};
  return names;
}

inline std::optional<ExperimentConfig> builtin_profile(std::string_view name) {
  if (name == "reference-118-lru") return reference_profile();
  if (name == "noflush-118-random") return noflush_random_profile();
  if (name == "nic-128x1") return nic_profile();
  return std::nullopt;
}

/// A built-in profile name, or the path of a JSON config file that is
/// overlaid on the reference profile.
inline ExperimentConfig load_profile(const std::string& name_or_path) {
  if (auto builtin = builtin_profile(name_or_path)) return *builtin;
  std::ifstream in(name_or_path, std::ios::binary);
  if (!in) throw Error(Errc::InvalidConfig, "no built-in profile or readable file named " + name_or_path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), reference_profile());
}

// ---------------------------------------------------------------------------
// Instantiation

inline Threshold threshold_of(const ExperimentConfig& c) {
  if (c.threshold_cycles) return Threshold{*c.threshold_cycles};
  return calibrate(c.timing);
}

/// A fresh platform whose random streams derive from `seed`.
inline Platform make_platform(const ExperimentConfig& c, std::uint64_t seed) {
  TlbConfig tlb = c.tlb;
  tlb.rng_seed = derive_seed(seed, "tlb");
  LatencyModel timing = c.timing;
  timing.rng_seed = derive_seed(seed, "timing");
  return Platform(std::move(tlb), std::move(timing), c.flush_available);
}

inline EvictionTestOptions test_options(const ExperimentConfig& c) {
  EvictionTestOptions o;
  o.flush = c.evset.flush;
  o.trials = c.evset.trials;
  o.shuffle = c.evset.shuffle;
  o.inter_test_delay = c.evset.inter_test_delay;
  return o;
}

inline QuerySenderConfig query_sender_config(const ExperimentConfig& c, std::uint64_t seed) {
  QuerySenderConfig q;
  q.device = c.query.device;
  q.footprint_pages = c.query.footprint_pages;
  q.query_duration = c.query.query_duration;
  q.seed = derive_seed(seed, "query");
  return q;
}

inline NicSenderConfig nic_sender_config(const ExperimentConfig& c, std::uint64_t seed) {
  NicSenderConfig n;
  n.device = c.nic.device;
  n.pinned_offset = c.nic.pinned_offset;
  n.region_alignment_pages = c.nic.region_alignment_pages;
  n.buffer_count_min = c.nic.buffer_count_min;
  n.buffer_count_max = c.nic.buffer_count_max;
  n.packets_per_probe = c.nic.packets_per_probe;
  n.buffer_touch_probability = c.nic.buffer_touch_probability;
  n.reboot_seed = derive_seed(seed, "nic");
  return n;
}

inline BitMessage channel_message(const ExperimentConfig& c) {
  return BitMessage::from_text(c.channel.message, c.channel.endianness);
}

}  // namespace iotlbsim
