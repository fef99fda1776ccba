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

#include "crabloop/fock_basis.hpp"

#include <algorithm>
#include <limits>

#include "crabloop/errors.hpp"

namespace crabloop {

std::uint64_t fock_dimension(int sites, int bosons) {
  if (sites <= 0 || bosons < 0) return 0;
  // C(n, k) with n = N + L - 1, k = min(N, L - 1), computed incrementally.
  const std::uint64_t n = static_cast<std::uint64_t>(bosons + sites - 1);
  const std::uint64_t k = std::min<std::uint64_t>(static_cast<std::uint64_t>(bosons),
                                                  static_cast<std::uint64_t>(sites - 1));
  unsigned __int128 c = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    c = c * (n - k + i) / i;
    if (c > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(c);
}

FockBasis::FockBasis(int sites, int bosons) : sites_(sites), bosons_(bosons) {
  if (sites < 1 || bosons < 0 || bosons > 255) {
    throw Error(ErrorKind::config, "invalid lattice size or particle number");
  }
  const std::uint64_t dim = fock_dimension(sites, bosons);
  occupations_.reserve(static_cast<std::size_t>(dim) * static_cast<std::size_t>(sites));

  std::vector<Occupation> occ(static_cast<std::size_t>(sites), 0);
  // Depth-first over the first site's occupation from N down to 0 yields
  // descending lexicographic order.
  auto fill = [&](auto&& self, int site, int remaining) -> void {
    if (site == sites_ - 1) {
      occ[static_cast<std::size_t>(site)] = static_cast<Occupation>(remaining);
      occupations_.insert(occupations_.end(), occ.begin(), occ.end());
      return;
    }
    for (int n = remaining; n >= 0; --n) {
      occ[static_cast<std::size_t>(site)] = static_cast<Occupation>(n);
      self(self, site + 1, remaining - n);
    }
  };
  fill(fill, 0, bosons);
  size_ = occupations_.size() / static_cast<std::size_t>(sites);

  lookup_.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) lookup_.emplace(key(state(i)), i);

  reflection_.resize(size_);
  std::vector<Occupation> rev(static_cast<std::size_t>(sites));
  for (std::size_t i = 0; i < size_; ++i) {
    auto s = state(i);
    std::reverse_copy(s.begin(), s.end(), rev.begin());
    reflection_[i] = *index_of(rev);
  }
}

std::uint64_t FockBasis::key(std::span<const Occupation> occ) const {
  std::uint64_t k = 0;
  const std::uint64_t radix = static_cast<std::uint64_t>(bosons_) + 1;
  for (Occupation n : occ) k = k * radix + n;
  return k;
}

std::optional<std::size_t> FockBasis::index_of(std::span<const Occupation> occ) const {
  if (occ.size() != static_cast<std::size_t>(sites_)) return std::nullopt;
  int total = 0;
  for (Occupation n : occ) total += n;
  if (total != bosons_) return std::nullopt;
  auto it = lookup_.find(key(occ));
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

}  // namespace crabloop
