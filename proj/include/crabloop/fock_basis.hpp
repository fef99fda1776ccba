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
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace crabloop {

/// Number of ways to place `bosons` indistinguishable bosons on `sites`
/// sites, C(N + L - 1, N). Saturates at UINT64_MAX.
std::uint64_t fock_dimension(int sites, int bosons);

/// Fixed-particle-number occupation basis in descending lexicographic order:
/// |N,0,...,0>, |N-1,1,0,...>, ..., |0,...,0,N>.
class FockBasis {
 public:
  using Occupation = std::uint8_t;

  FockBasis(int sites, int bosons);

  std::size_t size() const { return size_; }
  int sites() const { return sites_; }
  int bosons() const { return bosons_; }

  std::span<const Occupation> state(std::size_t i) const {
    return {occupations_.data() + i * static_cast<std::size_t>(sites_),
            static_cast<std::size_t>(sites_)};
  }

  std::optional<std::size_t> index_of(std::span<const Occupation> occ) const;

  /// Index of the site-reversed configuration of state i.
  std::size_t reflected(std::size_t i) const { return reflection_[i]; }

 private:
  std::uint64_t key(std::span<const Occupation> occ) const;

  int sites_;
  int bosons_;
  std::size_t size_ = 0;
  std::vector<Occupation> occupations_;
  std::unordered_map<std::uint64_t, std::size_t> lookup_;
  std::vector<std::size_t> reflection_;
};

}  // namespace crabloop
