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

#include "crabloop/records.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <sstream>

#include "crabloop/errors.hpp"

namespace crabloop {

namespace {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_or_nan(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

Phase phase_from_string(const std::string& s) {
  if (s == "reference") return Phase::reference;
  if (s == "simplex") return Phase::simplex;
  if (s == "restart") return Phase::restart;
  throw Error(ErrorKind::io, "unknown phase '" + s + "'");
}

Json to_json(const IterationRecord& r) {
  Json j;
  j["type"] = "iteration";
  j["n"] = r.n;
  j["phase"] = std::string(to_string(r.phase));
  j["label"] = r.label;
  j["params"] = r.params;
  j["fom"] = number_or_null(r.fom);
  j["fidelity"] = number_or_null(r.fidelity);
  j["energy_excess"] = number_or_null(r.energy_excess);
  j["seed"] = r.seed;
  j["wall_time_ms"] = r.wall_time_ms;
  j["plant"] = r.plant_called;
  j["reevaluation"] = r.reevaluation;
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

IterationRecord record_from_json(const Json& j) {
  IterationRecord r;
  r.n = j.at("n").get<int>();
  r.phase = phase_from_string(j.at("phase").get<std::string>());
  r.label = j.value("label", std::string{});
  r.params = j.at("params").get<ParameterVector>();
  r.fom = number_or_nan(j.at("fom"));
  r.fidelity = number_or_nan(j.at("fidelity"));
  r.energy_excess = number_or_nan(j.at("energy_excess"));
  r.seed = j.at("seed").get<std::uint64_t>();
  r.wall_time_ms = j.at("wall_time_ms").get<double>();
  r.plant_called = j.at("plant").get<bool>();
  r.reevaluation = j.value("reevaluation", false);
  r.error = j.value("error", std::string{});
  return r;
}

LogContents read_log(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open log " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  LogContents log;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) break;  // torn final line
    const std::string line = text.substr(pos, end - pos);
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) break;
    const std::string type = j.value("type", std::string{});
    if (type == "header") {
      log.header = std::move(j);
    } else if (type == "iteration") {
      log.records.push_back(record_from_json(j));
    } else if (type == "summary") {
      log.summary = std::move(j);
    } else {
      throw Error(ErrorKind::io, "unknown record type in " + path);
    }
    pos = end + 1;
  }
  log.valid_bytes = pos;
  return log;
}

RunLog RunLog::create(const std::string& path, const Json& header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot create log " + path);
  RunLog log(std::move(out));
  log.append(header);
  return log;
}

RunLog RunLog::reopen(const std::string& path, std::size_t valid_bytes) {
  std::error_code ec;
  std::filesystem::resize_file(path, valid_bytes, ec);
  if (ec) throw Error(ErrorKind::io, "cannot truncate log " + path + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorKind::io, "cannot reopen log " + path);
  return RunLog(std::move(out));
}

void RunLog::append(const Json& line) {
  out_ << line.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorKind::io, "log write failed");
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path);
  out << j.dump(2) << '\n';
}

std::string digest_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace crabloop
