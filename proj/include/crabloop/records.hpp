// Copyright 2026 The crabloop Authors
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
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "crabloop/optimizer.hpp"

namespace crabloop {

using Json = nlohmann::json;

inline constexpr const char* kLogFormat = "crabloop-log/1";

/// One closed-loop evaluation. Diagnostics are NaN when the plant was not
/// invoked (penalized parameter vectors).
struct IterationRecord {
  int n = 0;
  Phase phase = Phase::simplex;
  /// Reference name for phase == reference, empty otherwise.
  std::string label;
  ParameterVector params;
  double fom = 0.0;
  double fidelity = 0.0;
  double energy_excess = 0.0;
  std::uint64_t seed = 0;
  /// Simulated experiment clock: cumulative protocol time of all
  /// evaluations up to and including this one.
  double wall_time_ms = 0.0;
  bool plant_called = true;
  bool reevaluation = false;
  std::string error;
};

Json to_json(const IterationRecord& record);
IterationRecord record_from_json(const Json& j);

Phase phase_from_string(const std::string& s);

/// Parsed contents of an iteration log. Lines that are not complete JSON
/// records (a crash mid-write) are dropped and reported via `valid_bytes`.
struct LogContents {
  Json header;
  std::vector<IterationRecord> records;
  std::optional<Json> summary;
  std::size_t valid_bytes = 0;
};

LogContents read_log(const std::string& path);

/// Append-only line-delimited log. Every append is flushed before returning.
class RunLog {
 public:
  /// Truncates `path` and writes the header line.
  static RunLog create(const std::string& path, const Json& header);
  /// Reopens an existing log for appending after its last complete line.
  static RunLog reopen(const std::string& path, std::size_t valid_bytes);

  void append(const Json& line);

 private:
  explicit RunLog(std::ofstream out) : out_(std::move(out)) {}
  std::ofstream out_;
};

/// Writes `j` as one line to `path`, replacing the file.
void write_json_file(const std::string& path, const Json& j);

/// FNV-1a 64-bit digest, hex encoded.
std::string digest_hex(const std::string& text);

}  // namespace crabloop
