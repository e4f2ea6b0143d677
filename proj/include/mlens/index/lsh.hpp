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

#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace mlens::retrieval {

struct LshConfig {
  int tables = 16;
  int bits = 18;  ///< hyperplanes per table, at most 32
  std::uint64_t seed = 0x15b;
};

struct Neighbor {
  std::uint32_t ref_id = 0;
  double distance = 0.0;  ///< cosine distance, 1 - cos

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Random-hyperplane LSH over dense vectors with exact cosine re-ranking of
/// the bucket candidates. Hyperplanes are regenerated from the seed, so only
/// the configuration and the stored vectors need persisting.
class LshIndex {
 public:
  LshIndex() = default;

  /// Throws InvalidArgument on empty input, mismatched dimensions or a bad
  /// configuration.
  LshIndex(std::vector<std::vector<float>> vectors, std::vector<std::uint32_t> ids, const LshConfig& cfg = {});

  /// The min(k, size()) nearest stored vectors by cosine distance, ascending,
  /// ties by ascending id. Candidates come from the matching buckets; when
  /// there are fewer than k of them the whole index is scanned.
  std::vector<Neighbor> query(std::span<const float> v, std::size_t k = 5) const;

  /// Exhaustive scan with the same ordering rules.
  std::vector<Neighbor> query_exact(std::span<const float> v, std::size_t k = 5) const;

  /// Positions (not ids) of stored vectors sharing a bucket with `v` in any
  /// table, ascending.
  std::vector<std::uint32_t> candidates(std::span<const float> v) const;

  std::size_t size() const { return ids_.size(); }
  std::size_t dimension() const { return dim_; }
  const LshConfig& config() const { return cfg_; }
  const std::vector<std::uint32_t>& ids() const { return ids_; }
  std::span<const float> vector(std::size_t pos) const { return {data_.data() + pos * dim_, dim_}; }

 private:
  std::uint32_t signature(std::size_t table, std::span<const float> v) const;
  std::vector<Neighbor> rank(std::span<const float> v, std::span<const std::uint32_t> positions, std::size_t k) const;

  LshConfig cfg_;
  std::size_t dim_ = 0;
  std::vector<float> data_;  ///< size() x dim_
  std::vector<double> norms_;
  std::vector<std::uint32_t> ids_;
  std::vector<float> planes_;  ///< tables x bits x dim_
  std::vector<std::unordered_map<std::uint32_t, std::vector<std::uint32_t>>> buckets_;
};

}  // namespace mlens::retrieval
