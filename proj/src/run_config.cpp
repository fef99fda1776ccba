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

#include "crabloop/run_config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "crabloop/errors.hpp"

namespace crabloop {

namespace {

void overlay(Json& base, const Json& patch, const std::string& prefix) {
  if (!patch.is_object()) throw Error(ErrorKind::config, "config section '" + prefix + "' must be an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw Error(ErrorKind::config, "unknown config key '" + key + "'");
    Json& slot = base[it.key()];
    if (slot.is_object()) {
      overlay(slot, it.value(), key);
    } else {
      slot = it.value();
    }
  }
}

void collect_keys(const Json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it.value().is_object()) {
      collect_keys(it.value(), key, out);
    } else {
      out.push_back(key);
    }
  }
}

template <typename T>
T get(const Json& j, const char* section, const char* key) {
  try {
    return j.at(section).at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::config, std::string("bad value for ") + section + "." + key + ": " + e.what());
  }
}

Boundary boundary_from_string(const std::string& s) {
  if (s == "open") return Boundary::open;
  if (s == "periodic") return Boundary::periodic;
  throw Error(ErrorKind::config, "boundary must be 'open' or 'periodic'");
}

FrequencyPolicy policy_from_string(const std::string& s) {
  if (s == "harmonic") return FrequencyPolicy::harmonic;
  if (s == "randomized") return FrequencyPolicy::randomized;
  throw Error(ErrorKind::config, "frequency_policy must be 'harmonic' or 'randomized'");
}

}  // namespace

std::string to_string(Mode m) {
  switch (m) {
    case Mode::crab_sfmi: return "crab_sfmi";
    case Mode::exponential_2param: return "exponential_2param";
    case Mode::landscape_map: return "landscape_map";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& s) {
  if (s == "crab_sfmi") return Mode::crab_sfmi;
  if (s == "exponential_2param") return Mode::exponential_2param;
  if (s == "landscape_map") return Mode::landscape_map;
  throw Error(ErrorKind::config, "unknown mode '" + s + "'");
}

Json config_to_json(const RunConfig& c) {
  const HubbardConfig& h = c.plant.hubbard;
  Json j;
  j["mode"] = to_string(c.mode);
  j["master_seed"] = c.master_seed;
  j["plant"] = {
      {"sites", h.sites},
      {"bosons", h.bosons},
      {"boundary", h.boundary == Boundary::open ? "open" : "periodic"},
      {"u_scale", h.mapping.u_scale},
      {"s_min_Er", h.mapping.s_min},
      {"kappa", h.kappa},
      {"lambda_nm", h.lambda_nm},
      {"atom", h.atom},
      {"samples_per_ms", c.plant.samples_per_ms},
      {"hold_ms", c.plant.hold_ms},
      {"round_trip", c.plant.round_trip},
      {"noise_sigma", c.plant.noise_sigma},
  };
  j["ramp"] = {
      {"s_max_Er", c.base_ramp.s_max},
      {"delta_t_ms", c.base_ramp.delta_t},
      {"tau_ms", c.base_ramp.tau},
  };
  j["crab"] = {
      {"n_f", c.crab.n_f},
      {"frequency_policy", c.crab.frequency_policy == FrequencyPolicy::harmonic ? "harmonic" : "randomized"},
      {"initial_coeffs", c.crab.initial_coeffs},
      {"coeff_bound", c.crab.coeff_bound},
  };
  j["exponential"] = {
      {"delta_t0_ms", c.exponential.delta_t0_ms},
      {"tau0_ms", c.exponential.tau0_ms},
      {"delta_t_min_ms", c.exponential.delta_t_min_ms},
      {"delta_t_max_ms", c.exponential.delta_t_max_ms},
      {"tau_min_ms", c.exponential.tau_min_ms},
      {"tau_max_ms", c.exponential.tau_max_ms},
  };
  const OptimizerOptions& o = c.optimizer;
  j["optimizer"] = {
      {"max_evals", o.max_evals},
      {"f_tol", o.f_tol},
      {"x_tol", o.x_tol},
      {"restarts", o.restarts},
      {"init_scale", o.init_scale},
      {"reeval_best", o.reeval_best},
      {"randomize_init", o.randomize_init},
      {"penalty_base", c.penalty_base},
  };
  j["references"] = c.references;
  j["landscape"] = {
      {"delta_t_min_ms", c.landscape.delta_t_min_ms},
      {"delta_t_max_ms", c.landscape.delta_t_max_ms},
      {"delta_t_points", c.landscape.delta_t_points},
      {"tau_min_ms", c.landscape.tau_min_ms},
      {"tau_max_ms", c.landscape.tau_max_ms},
      {"tau_points", c.landscape.tau_points},
  };
  j["output"] = {{"dir", c.output_dir}};
  return j;
}

Json default_config_json() { return config_to_json(RunConfig{}); }

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  collect_keys(default_config_json(), "", keys);
  return keys;
}

RunConfig config_from_json(const Json& user) {
  Json j = default_config_json();
  overlay(j, user, "");

  RunConfig c;
  try {
    c.mode = mode_from_string(j.at("mode").get<std::string>());
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.references = j.at("references").get<std::vector<std::string>>();
    c.output_dir = j.at("output").at("dir").get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::config, std::string("bad top-level config value: ") + e.what());
  }
  HubbardConfig& h = c.plant.hubbard;
  h.sites = get<int>(j, "plant", "sites");
  h.bosons = get<int>(j, "plant", "bosons");
  h.boundary = boundary_from_string(get<std::string>(j, "plant", "boundary"));
  h.mapping.u_scale = get<double>(j, "plant", "u_scale");
  h.mapping.s_min = get<double>(j, "plant", "s_min_Er");
  h.kappa = get<double>(j, "plant", "kappa");
  h.lambda_nm = get<double>(j, "plant", "lambda_nm");
  h.atom = get<std::string>(j, "plant", "atom");
  c.plant.samples_per_ms = get<double>(j, "plant", "samples_per_ms");
  c.plant.hold_ms = get<double>(j, "plant", "hold_ms");
  c.plant.round_trip = get<bool>(j, "plant", "round_trip");
  c.plant.noise_sigma = get<double>(j, "plant", "noise_sigma");

  c.base_ramp.s_max = get<double>(j, "ramp", "s_max_Er");
  c.base_ramp.delta_t = get<double>(j, "ramp", "delta_t_ms");
  c.base_ramp.tau = get<double>(j, "ramp", "tau_ms");

  c.crab.n_f = get<int>(j, "crab", "n_f");
  c.crab.frequency_policy = policy_from_string(get<std::string>(j, "crab", "frequency_policy"));
  c.crab.initial_coeffs = get<std::vector<double>>(j, "crab", "initial_coeffs");
  c.crab.coeff_bound = get<double>(j, "crab", "coeff_bound");

  c.exponential.delta_t0_ms = get<double>(j, "exponential", "delta_t0_ms");
  c.exponential.tau0_ms = get<double>(j, "exponential", "tau0_ms");
  c.exponential.delta_t_min_ms = get<double>(j, "exponential", "delta_t_min_ms");
  c.exponential.delta_t_max_ms = get<double>(j, "exponential", "delta_t_max_ms");
  c.exponential.tau_min_ms = get<double>(j, "exponential", "tau_min_ms");
  c.exponential.tau_max_ms = get<double>(j, "exponential", "tau_max_ms");

  OptimizerOptions& o = c.optimizer;
  o.max_evals = get<int>(j, "optimizer", "max_evals");
  o.f_tol = get<double>(j, "optimizer", "f_tol");
  o.x_tol = get<double>(j, "optimizer", "x_tol");
  o.restarts = get<int>(j, "optimizer", "restarts");
  o.init_scale = get<std::vector<double>>(j, "optimizer", "init_scale");
  o.reeval_best = get<bool>(j, "optimizer", "reeval_best");
  o.randomize_init = get<bool>(j, "optimizer", "randomize_init");
  c.penalty_base = get<double>(j, "optimizer", "penalty_base");

  c.landscape.delta_t_min_ms = get<double>(j, "landscape", "delta_t_min_ms");
  c.landscape.delta_t_max_ms = get<double>(j, "landscape", "delta_t_max_ms");
  c.landscape.delta_t_points = get<int>(j, "landscape", "delta_t_points");
  c.landscape.tau_min_ms = get<double>(j, "landscape", "tau_min_ms");
  c.landscape.tau_max_ms = get<double>(j, "landscape", "tau_max_ms");
  c.landscape.tau_points = get<int>(j, "landscape", "tau_points");
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot read config file '" + path + "'");
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::config, "config file '" + path + "' is not valid JSON");
  return config_from_json(j);
}

void apply_overrides(Json& document, const std::vector<std::string>& overrides) {
  const Json defaults = default_config_json();
  for (const std::string& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::config, "override '" + item + "' is not of the form key=value");
    }
    const std::string key = item.substr(0, eq);
    const std::string raw = item.substr(eq + 1);
    Json value = Json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    const Json::json_pointer ptr("/" + [&] {
      std::string p = key;
      for (char& ch : p) if (ch == '.') ch = '/';
      return p;
    }());
    if (!defaults.contains(ptr) || defaults.at(ptr).is_object()) {
      throw Error(ErrorKind::config, "override key '" + key + "' is not a config key");
    }
    document[ptr] = std::move(value);
  }
}

void validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
  validate(c.plant.hubbard);
  if (!(c.plant.samples_per_ms > 0.0)) fail("plant.samples_per_ms must be positive");
  if (!(c.plant.hold_ms >= 0.0)) fail("plant.hold_ms must be nonnegative");
  if (!(c.plant.noise_sigma >= 0.0)) fail("plant.noise_sigma must be nonnegative");
  if (!(c.base_ramp.delta_t > 0.0) || c.base_ramp.tau == 0.0 || !(c.base_ramp.s_max >= 0.0)) {
    fail("ramp needs delta_t_ms > 0, tau_ms != 0 and s_max_Er >= 0");
  }
  if (!(c.penalty_base > 3.0)) fail("optimizer.penalty_base must exceed every physical FOM");
  if (!(c.optimizer.f_tol > 0.0) || !(c.optimizer.x_tol > 0.0)) fail("optimizer tolerances must be positive");
  if (c.optimizer.restarts < 0) fail("optimizer.restarts must be nonnegative");
  for (const auto& r : c.references) {
    if (r != "quasi_adiabatic" && r != "uncorrected") fail("unknown reference '" + r + "'");
  }
  std::size_t dim = 0;
  switch (c.mode) {
    case Mode::crab_sfmi:
      if (c.crab.n_f < 1) fail("crab.n_f must be at least 1");
      if (!c.crab.initial_coeffs.empty() && c.crab.initial_coeffs.size() != 2 * static_cast<std::size_t>(c.crab.n_f)) {
        fail("crab.initial_coeffs needs 2 * n_f entries");
      }
      if (!(c.crab.coeff_bound > 0.0)) fail("crab.coeff_bound must be positive");
      dim = 2 * static_cast<std::size_t>(c.crab.n_f);
      break;
    case Mode::exponential_2param: {
      const auto& e = c.exponential;
      if (!(e.delta_t_min_ms > 0.0 && e.delta_t_min_ms < e.delta_t_max_ms)) fail("exponential delta_t bounds invalid");
      if (!(e.tau_min_ms > 0.0 && e.tau_min_ms < e.tau_max_ms)) fail("exponential tau bounds invalid");
      dim = 2;
      break;
    }
    case Mode::landscape_map: {
      const auto& l = c.landscape;
      if (l.delta_t_points < 1 || l.tau_points < 1 || l.delta_t_points > 64 || l.tau_points > 64) {
        fail("landscape grid must be between 1x1 and 64x64");
      }
      if (!(l.delta_t_min_ms > 0.0 && l.delta_t_min_ms <= l.delta_t_max_ms)) fail("landscape delta_t range invalid");
      if (!(l.tau_min_ms > 0.0 && l.tau_min_ms <= l.tau_max_ms)) fail("landscape tau range invalid");
      dim = 2;
      break;
    }
  }
  if (!c.optimizer.init_scale.empty() && c.optimizer.init_scale.size() != dim) {
    fail("optimizer.init_scale needs one entry per parameter");
  }
  if (c.mode != Mode::landscape_map && c.optimizer.max_evals < static_cast<int>(dim) + 2) {
    fail("optimizer.max_evals must be at least dimension + 2");
  }
}

std::string config_digest(const RunConfig& config) {
  Json j = config_to_json(config);
  j.erase("output");
  return digest_hex(j.dump());
}

}  // namespace crabloop
