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

#include "crabloop/errors.hpp"

namespace crabloop {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::domain: return "domain";
    case ErrorKind::invalid_ramp: return "invalid_ramp";
    case ErrorKind::invalid_count: return "invalid_count";
    case ErrorKind::singular_correction: return "singular_correction";
    case ErrorKind::degenerate_simplex: return "degenerate_simplex";
    case ErrorKind::budget: return "budget";
    case ErrorKind::shallow_depth: return "shallow_depth";
    case ErrorKind::dimension_overflow: return "dimension_overflow";
    case ErrorKind::norm_drift: return "norm_drift";
    case ErrorKind::non_identifiable: return "non_identifiable";
    case ErrorKind::fit_nonconvergence: return "fit_nonconvergence";
    case ErrorKind::digest_mismatch: return "digest_mismatch";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace crabloop
