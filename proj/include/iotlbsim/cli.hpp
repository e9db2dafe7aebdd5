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
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "iotlbsim/channel.hpp"
#include "iotlbsim/config.hpp"
#include "iotlbsim/output.hpp"
#include "iotlbsim/scenarios.hpp"

namespace iotlbsim {

namespace detail {

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::uint32_t reps = 1;
  std::optional<bool> flush;
  std::string out = "out";
  std::optional<std::string> profile;
  std::optional<Cycles> threshold;
  std::optional<std::string> format;
};

inline void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--seed", f.seed, "Global seed; run r of --reps uses seed + r");
  cmd->add_option("--reps", f.reps, "Number of repetitions")->check(CLI::PositiveNumber);
  cmd->add_flag_function(
      "--flush,!--no-flush", [&f](std::int64_t n) { f.flush = n > 0; },
      "Use (or avoid) IOTLB flushes in eviction tests");
  cmd->add_option("--out", f.out, "Output directory")->capture_default_str();
  cmd->add_option("--profile", f.profile, "Built-in profile name or path of a JSON config");
  cmd->add_option("--threshold", f.threshold, "Hit/miss threshold in cycles (default: calibrated)");
  cmd->add_option("--format", f.format, "Output format")->check(CLI::IsMember({"csv", "jsonl"}));
}

inline ExperimentConfig resolve_config(const CommonFlags& f, std::string_view fallback_profile) {
  ExperimentConfig c = load_profile(f.profile.value_or(std::string(fallback_profile)));
  if (f.seed) c.seed = *f.seed;
  if (f.flush) {
    c.evset.flush = *f.flush;
    if (*f.flush && !c.flush_available)
      throw Error(Errc::FlushUnavailable, "profile has no IOTLB flush primitive; drop --flush");
  }
  if (f.threshold) c.threshold_cycles = *f.threshold;
  if (f.format) c.output_format = *f.format == "csv" ? OutputFormat::Csv : OutputFormat::Jsonl;
  check_constraints(c);
  return c;
}

inline std::map<std::string, std::string> common_parameters(const CommonFlags& f, std::string_view profile) {
  return {{"reps", std::to_string(f.reps)}, {"profile", f.profile.value_or(std::string(profile))}};
}

struct MessageFlags {
  std::optional<std::string> message;
  std::optional<std::string> bits;
  std::optional<std::string> pattern;
  std::size_t length = 100;
};

inline void add_message(CLI::App* cmd, MessageFlags& m) {
  cmd->add_option("--message", m.message, "Text payload (8 bits per character)");
  cmd->add_option("--bits", m.bits, "Explicit payload of 0/1 characters");
  cmd->add_option("--pattern", m.pattern, "Generated payload")
      ->check(CLI::IsMember({"all-ones", "all-zeros", "alternating", "lfsr"}));
  cmd->add_option("--length", m.length, "Length of a generated payload")->capture_default_str();
}

inline BitMessage resolve_message(const MessageFlags& m, const ExperimentConfig& c) {
  if (m.bits) return BitMessage::from_bits(*m.bits);
  if (m.pattern) {
    if (*m.pattern == "all-ones") return BitMessage::constant(m.length, true);
    if (*m.pattern == "all-zeros") return BitMessage::constant(m.length, false);
    if (*m.pattern == "alternating") return BitMessage::alternating(m.length);
    return BitMessage::lfsr(m.length);
  }
  if (m.message) return BitMessage::from_text(*m.message, c.channel.endianness);
  return channel_message(c);
}

inline std::map<std::string, std::string> message_parameters(const MessageFlags& m, const BitMessage& msg) {
  std::map<std::string, std::string> p;
  if (m.message) p["message"] = *m.message;
  if (m.bits) p["bits"] = *m.bits;
  if (m.pattern) {
    p["pattern"] = *m.pattern;
    p["length"] = std::to_string(m.length);
  }
  p["message_bits"] = std::to_string(msg.size());
  return p;
}

}  // namespace detail

/// Entry point of the iotlbsim tool. Returns the process exit status.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deterministic IOTLB simulator and side-channel toolkit", "iotlbsim"};
  app.require_subcommand(1);

  detail::CommonFlags common;

  auto* find = app.add_subcommand("find-evsets", "Construct eviction sets and report their quality");
  detail::add_common(find, common);
  std::optional<std::string> algorithm;
  find->add_option("--algorithm", algorithm, "Algorithm (default: from config)")
      ->check(CLI::IsMember({"grow-reduce", "grow-split"}));

  auto* pp = app.add_subcommand("channel-pp", "Prime+Probe covert channel from the query sender");
  detail::add_common(pp, common);
  detail::MessageFlags pp_msg;
  detail::add_message(pp, pp_msg);

  auto* fr = app.add_subcommand("channel-fr", "Flush+Reload covert channel from the CPU");
  detail::add_common(fr, common);
  detail::MessageFlags fr_msg;
  detail::add_message(fr, fr_msg);
  std::optional<std::int64_t> jitter_ns;
  fr->add_option("--jitter-ns", jitter_ns, "Standard deviation of the monitor's slot offset")
      ->check(CLI::NonNegativeNumber);

  auto* scenario = app.add_subcommand("scenario", "Run a canned experiment");
  detail::add_common(scenario, common);
  std::string scenario_name;
  scenario->add_option("name", scenario_name, "sql-trace | hello | evset-histograms | table2 | nic")
      ->required()
      ->check(CLI::IsMember({"sql-trace", "hello", "evset-histograms", "table2", "nic"}));
  std::uint32_t reboots = 120;
  scenario->add_option("--reboots", reboots, "Reboots in the nic scenario")->capture_default_str();

  auto* validate = app.add_subcommand("validate-config", "Check a JSON config and print its canonical form");
  std::string config_path;
  validate->add_option("path", config_path, "Config file")->required();

  if (argc > 1 && argv[1][0] != '-' && app.get_subcommand_no_throw(argv[1]) == nullptr) {
    err << "error: unknown subcommand '" << argv[1] << "'\n\n" << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << "\n\n" << app.help();
    return e.get_exit_code();
  }

  try {
    if (*find) {
      ExperimentConfig c = detail::resolve_config(common, "reference-118-lru");
      const EvsetAlgorithm a = algorithm ? (*algorithm == "grow-split" ? EvsetAlgorithm::GrowSplit
                                                                       : EvsetAlgorithm::GrowReduce)
                                         : c.evset.algorithm;
      std::vector<EvsetRun> runs;
      for (std::uint32_t r = 0; r < common.reps; ++r) runs.push_back(run_evset_experiment(c, a, c.seed + r));
      OutputSet files(common.out, c.output_format);
      files.add(evset_runs_table(runs));
      files.add(size_histogram_table(runs));
      auto params = detail::common_parameters(common, "reference-118-lru");
      params["algorithm"] = std::string(to_string(a));
      files.write("find-evsets", c, params);
      for (const EvsetRun& r : runs)
        out << to_string(a) << " seed=" << r.seed << " sets=" << r.stats.number_of_sets
            << " mean_size=" << r.stats.mean_set_size << " rate=" << r.stats.average_best_eviction_rate << "\n";
      return 0;
    }

    if (*pp || *fr) {
      const bool is_pp = pp->parsed();
      ExperimentConfig c = detail::resolve_config(common, "reference-118-lru");
      if (!is_pp && jitter_ns) c.channel.config.sync_jitter_stddev = Nanos{*jitter_ns};
      const detail::MessageFlags& mf = is_pp ? pp_msg : fr_msg;
      const BitMessage message = detail::resolve_message(mf, c);
      OutputSet files(common.out, c.output_format);
      auto params = detail::common_parameters(common, "reference-118-lru");
      for (const auto& [k, v] : detail::message_parameters(mf, message)) params[k] = v;
      const ChannelKind kind = is_pp ? ChannelKind::PrimeProbe : ChannelKind::FlushReload;
      for (std::uint32_t r = 0; r < common.reps; ++r) {
        const std::uint64_t seed = c.seed + r;
        const ChannelRun run = is_pp ? run_pp_channel(c, seed, message) : run_fr_channel(c, seed, message);
        const std::string suffix = common.reps > 1 ? "_" + std::to_string(r) : "";
        files.add(channel_trace_table(run, "channel_trace" + suffix));
        files.add_record("channel_report" + suffix, channel_report_record(run, kind, seed));
        out << to_string(kind) << " seed=" << seed << " bits=" << message.size()
            << " ber=" << run.report.bit_error_rate << " throughput_bps=" << run.report.throughput_bps << "\n";
      }
      files.write(is_pp ? "channel-pp" : "channel-fr", c, params);
      return 0;
    }

    if (*scenario) {
      const ScenarioName name = *parse_scenario(scenario_name);
      const std::string profile(default_profile(name));
      ExperimentConfig c = detail::resolve_config(common, profile);
      OutputSet files(common.out, c.output_format);
      auto params = detail::common_parameters(common, profile);
      params["scenario"] = scenario_name;
      switch (name) {
        case ScenarioName::SqlTrace:
          for (const Table& t : sql_trace_tables(run_sql_trace(c, c.seed))) files.add(t);
          break;
        case ScenarioName::HelloChannel: {
          const ChannelRun run = run_pp_channel(c, c.seed, BitMessage::from_text("Hello", c.channel.endianness));
          files.add(channel_trace_table(run));
          files.add_record("channel_report", channel_report_record(run, ChannelKind::PrimeProbe, c.seed));
          break;
        }
        case ScenarioName::EvsetHistograms:
          files.add(evset_histograms_table(run_evset_histograms(c, c.seed, common.reps)));
          break;
        case ScenarioName::Table2:
          for (const Table& t : table2_tables(run_table2(c.seed, common.reps))) files.add(t);
          break;
        case ScenarioName::Nic: {
          NicOptions o;
          o.reboots = reboots;
          params["reboots"] = std::to_string(reboots);
          for (const Table& t : nic_tables(run_nic_experiment(c, c.seed, o))) files.add(t);
          break;
        }
      }
      files.write("scenario " + scenario_name, c, params);
      out << "scenario " << scenario_name << " wrote " << files.files().size() + 1 << " files to "
          << common.out << "\n";
      return 0;
    }

    if (*validate) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) throw Error(Errc::InvalidConfig, "cannot read " + config_path);
      std::stringstream buffer;
      buffer << in.rdbuf();
      out << serialize_config(parse_config(buffer.str(), reference_profile()));
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace iotlbsim
