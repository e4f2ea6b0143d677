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

#include "mlens/index/lsh.hpp"

#include <algorithm>
#include <cmath>

#include "mlens/common/error.hpp"
#include "mlens/common/random.hpp"
#include "mlens/simd/kernels.hpp"

namespace mlens::retrieval {

LshIndex::LshIndex(std::vector<std::vector<float>> vectors, std::vector<std::uint32_t> ids, const LshConfig& cfg)
    : cfg_(cfg), ids_(std::move(ids)) {
  require(!vectors.empty(), ErrorCode::InvalidArgument, "LSH index needs at least one vector");
  require(vectors.size() == ids_.size(), ErrorCode::InvalidArgument, "one id per vector");
  require(cfg.tables >= 1 && cfg.bits >= 1 && cfg.bits <= 32, ErrorCode::InvalidArgument, "invalid LSH configuration");
  dim_ = vectors.front().size();
  require(dim_ > 0, ErrorCode::InvalidArgument, "empty vectors");
  const auto& kern = simd::kernels();
  data_.reserve(vectors.size() * dim_);
  for (const auto& v : vectors) {
    require(v.size() == dim_, ErrorCode::InvalidArgument, "vector dimensions differ");
    data_.insert(data_.end(), v.begin(), v.end());
    norms_.push_back(std::sqrt(static_cast<double>(kern.dot_f32(v.data(), v.data(), dim_))));
  }

  Rng root(cfg.seed);
  planes_.resize(static_cast<std::size_t>(cfg.tables) * cfg.bits * dim_);
  for (int t = 0; t < cfg.tables; ++t) {
    Rng rng = root.fork(static_cast<std::uint64_t>(t));
    float* dst = planes_.data() + static_cast<std::size_t>(t) * cfg.bits * dim_;
    for (std::size_t i = 0; i < static_cast<std::size_t>(cfg.bits) * dim_; ++i) dst[i] = static_cast<float>(rng.normal());
  }
  buckets_.resize(static_cast<std::size_t>(cfg.tables));
  for (std::size_t pos = 0; pos < ids_.size(); ++pos)
    for (std::size_t t = 0; t < buckets_.size(); ++t)
      buckets_[t][signature(t, vector(pos))].push_back(static_cast<std::uint32_t>(pos));
}

std::uint32_t LshIndex::signature(std::size_t table, std::span<const float> v) const {
  const auto& kern = simd::kernels();
  const float* planes = planes_.data() + table * static_cast<std::size_t>(cfg_.bits) * dim_;
  std::uint32_t sig = 0;
  for (int b = 0; b < cfg_.bits; ++b)
    if (kern.dot_f32(planes + static_cast<std::size_t>(b) * dim_, v.data(), dim_) >= 0.0f) sig |= 1u << b;
  return sig;
}

std::vector<std::uint32_t> LshIndex::candidates(std::span<const float> v) const {
  require(v.size() == dim_, ErrorCode::InvalidArgument, "query dimension does not match the index");
  std::vector<std::uint32_t> out;
  for (std::size_t t = 0; t < buckets_.size(); ++t) {
    const auto it = buckets_[t].find(signature(t, v));
    if (it != buckets_[t].end()) out.insert(out.end(), it->second.begin(), it->second.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Neighbor> LshIndex::rank(std::span<const float> v, std::span<const std::uint32_t> positions,
                                     std::size_t k) const {
  const auto& kern = simd::kernels();
  const double qn = std::sqrt(static_cast<double>(kern.dot_f32(v.data(), v.data(), dim_)));
  std::vector<Neighbor> out;
  out.reserve(positions.size());
  for (std::uint32_t pos : positions) {
    const double denom = qn * norms_[pos];
    const double cos = denom > 0.0 ? kern.dot_f32(v.data(), data_.data() + pos * dim_, dim_) / denom : 0.0;
    out.push_back({ids_[pos], 1.0 - cos});
  }
  const std::size_t keep = std::min(k, out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(keep), out.end(),
                    [](const Neighbor& a, const Neighbor& b) {
                      return a.distance < b.distance || (a.distance == b.distance && a.ref_id < b.ref_id);
                    });
  out.resize(keep);
  return out;
}

std::vector<Neighbor> LshIndex::query(std::span<const float> v, std::size_t k) const {
  const auto cand = candidates(v);
  if (cand.size() < std::min(k, size())) return query_exact(v, k);
  return rank(v, cand, k);
}

std::vector<Neighbor> LshIndex::query_exact(std::span<const float> v, std::size_t k) const {
  require(v.size() == dim_, ErrorCode::InvalidArgument, "query dimension does not match the index");
  std::vector<std::uint32_t> all(size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<std::uint32_t>(i);
  return rank(v, all, k);
}

}  // namespace mlens::retrieval
