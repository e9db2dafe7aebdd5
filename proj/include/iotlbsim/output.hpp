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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "iotlbsim/config.hpp"
#include "iotlbsim/error.hpp"

namespace iotlbsim {

using Cell = std::variant<std::int64_t, std::uint64_t, double, std::string>;

/// A named result table. Every output file is one of these.
struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size())
      throw Error(Errc::InvalidConfig, "row width does not match table " + name);
    rows.push_back(std::move(row));
  }
};

inline std::string format_cell(const Cell& c) {
  struct Visitor {
    std::string operator()(std::int64_t v) const { return std::to_string(v); }
    std::string operator()(std::uint64_t v) const { return std::to_string(v); }
    std::string operator()(double v) const {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", v);
      return buf;
    }
    std::string operator()(const std::string& v) const {
      if (v.find_first_of(",\"\n") == std::string::npos) return v;
      std::string out = "\"";
      for (char ch : v) {
        if (ch == '"') out += '"';
        out += ch;
      }
      return out + "\"";
    }
  };
  return std::visit(Visitor{}, c);
}

inline nlohmann::json cell_json(const Cell& c) {
  return std::visit([](const auto& v) { return nlohmann::json(v); }, c);
}

inline std::string render_csv(const Table& t) {
  std::string out;
  for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "," : "") + t.columns[i];
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + format_cell(row[i]);
    out += "\n";
  }
  return out;
}

inline std::string render_jsonl(const Table& t) {
  std::string out;
  for (const auto& row : t.rows) {
    nlohmann::ordered_json obj;
    for (std::size_t i = 0; i < row.size(); ++i) obj[t.columns[i]] = cell_json(row[i]);
    out += obj.dump() + "\n";
  }
  return out;
}

/// Collects the files of one invocation and writes them together with a
/// manifest naming the command, seed and config digest.
class OutputSet {
 public:
  OutputSet(std::filesystem::path dir, OutputFormat format) : dir_(std::move(dir)), format_(format) {}

  const std::filesystem::path& dir() const { return dir_; }

  void add(const Table& table) {
    const std::string ext = format_ == OutputFormat::Csv ? ".csv" : ".jsonl";
    files_[table.name + ext] = format_ == OutputFormat::Csv ? render_csv(table) : render_jsonl(table);
  }

  /// A single JSON document (reports that are records rather than tables).
  void add_record(const std::string& name, const nlohmann::ordered_json& record) {
    files_[name + ".json"] = record.dump(2) + "\n";
  }

  void write(const std::string& command, const ExperimentConfig& config,
             const std::map<std::string, std::string>& parameters) {
    std::filesystem::create_directories(dir_);
    nlohmann::ordered_json manifest;
    manifest["command"] = command;
    manifest["seed"] = config.seed;
    char digest[17];
    std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(config_digest(config)));
    manifest["config_digest"] = std::string("fnv1a64:") + digest;
    manifest["parameters"] = parameters;
    manifest["files"] = nlohmann::json::array();
    for (const auto& [name, body] : files_) manifest["files"].push_back(name);
    files_["config.json"] = serialize_config(config);
    manifest["files"].push_back("config.json");
    for (const auto& [name, body] : files_) write_file(dir_ / name, body);
    write_file(dir_ / "manifest.json", manifest.dump(2) + "\n");
  }

  const std::map<std::string, std::string>& files() const { return files_; }

 private:
  static void write_file(const std::filesystem::path& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::InvalidConfig, "cannot write " + path.string());
    out << body;
  }

  std::filesystem::path dir_;
  OutputFormat format_;
  std::map<std::string, std::string> files_;
};

}  // namespace iotlbsim
