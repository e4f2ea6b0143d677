// Copyright 2026 The mlens Authors
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

#include <limits>

#include "mlens/feat/features.hpp"
#include "mlens/simd/kernels.hpp"

namespace mlens::feat {

std::vector<std::uint64_t> pack_bits(std::span<const Descriptor512> descriptors) {
  std::vector<std::uint64_t> out;
  out.reserve(descriptors.size() * simd::kDescriptorWords);
  for (const auto& d : descriptors) out.insert(out.end(), d.bits.begin(), d.bits.end());
  return out;
}

std::vector<MatchPair> match_packed(std::span<const std::uint64_t> query, std::span<const std::uint64_t> reference,
                                    const MatchConfig& cfg) {
  constexpr std::size_t W = simd::kDescriptorWords;
  require(!query.empty() && !reference.empty(), ErrorCode::InvalidArgument, "matching needs non-empty inputs");
  require(query.size() % W == 0 && reference.size() % W == 0, ErrorCode::InvalidArgument,
          "packed descriptors must be whole 512-bit strings");
  const std::size_t nq = query.size() / W, nr = reference.size() / W;
  const auto& k = simd::kernels();
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  struct Best {
    std::uint32_t d1 = kNone, d2 = kNone, idx = kNone;
  };
  std::vector<Best> q_best(nq);
  std::vector<std::uint32_t> r_best_d(nr, kNone), r_best_q(nr, kNone);
  std::vector<std::uint32_t> dist(nr);
  for (std::size_t q = 0; q < nq; ++q) {
    k.hamming512_many(query.data() + q * W, reference.data(), nr, dist.data());
    Best& b = q_best[q];
    for (std::size_t r = 0; r < nr; ++r) {
      const std::uint32_t d = dist[r];
      if (d < b.d1) {
        b.d2 = b.d1;
        b.d1 = d;
        b.idx = static_cast<std::uint32_t>(r);
      } else if (d < b.d2) {
        b.d2 = d;
      }
      if (d < r_best_d[r]) {
        r_best_d[r] = d;
        r_best_q[r] = static_cast<std::uint32_t>(q);
      }
    }
  }
  std::vector<MatchPair> out;
  for (std::size_t q = 0; q < nq; ++q) {
    const Best& b = q_best[q];
    if (b.d1 > cfg.max_hamming) continue;
    if (b.d2 != kNone && !(b.d1 < cfg.ratio * b.d2)) continue;
    if (r_best_q[b.idx] != q) continue;
    out.push_back({static_cast<std::uint32_t>(q), b.idx, b.d1});
  }
  return out;
}

std::vector<MatchPair> match_descriptors(std::span<const Descriptor512> query,
                                         std::span<const Descriptor512> reference, const MatchConfig& cfg) {
  require(!query.empty() && !reference.empty(), ErrorCode::InvalidArgument, "matching needs non-empty inputs");
  return match_packed(pack_bits(query), pack_bits(reference), cfg);
}

}  // namespace mlens::feat
