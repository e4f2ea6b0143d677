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
#include <functional>
#include <span>
#include <vector>

#include "mlens/feat/features.hpp"

namespace mlens::retrieval {

inline constexpr std::size_t kBits = 512;

/// Bernoulli mixture over 512-bit descriptors.
struct BmmParams {
  std::size_t K = 0;
  std::size_t D = kBits;
  std::vector<double> weights;  ///< K priors
  std::vector<double> means;    ///< K x D, row-major

  double mean(std::size_t k, std::size_t d) const { return means[k * D + d]; }
};

struct EmConfig {
  int max_iters = 100;
  /// Stop when the mean per-descriptor log-likelihood gains less than this.
  double tol = 1e-4;
  double eps = 1e-4;  ///< means are clamped to [eps, 1 - eps]
  std::uint64_t seed = 7;
  /// Training uses a seeded uniform subsample when the collection is larger.
  std::size_t max_samples = 100000;
  /// Called after every M-step with the iteration number, the updated
  /// parameters and the mean log-likelihood of the parameters the E-step
  /// used.
  std::function<void(int, const BmmParams&, double)> on_iteration;
};

struct BmmFit {
  BmmParams params;
  /// Mean per-descriptor log-likelihood of the initial parameters and of the
  /// parameters after each M-step (iterations + 1 entries).
  std::vector<double> log_likelihood;
  int iterations = 0;
};

/// EM with k-means++ seeding on Hamming distance. `packed` holds 8 words per
/// descriptor. Throws InvalidArgument when fewer than 10*K descriptors are
/// given.
BmmFit train_bmm(std::span<const std::uint64_t> packed, std::size_t K, const EmConfig& cfg = {});
BmmFit train_bmm(std::span<const feat::Descriptor512> descriptors, std::size_t K, const EmConfig& cfg = {});

/// Mean per-descriptor log-likelihood under the mixture.
double mean_log_likelihood(const BmmParams& bmm, std::span<const std::uint64_t> packed);

/// Fisher Vector of a descriptor set: [K prior gradients | K x D mean
/// gradients], signed square root, then L2 normalisation. Throws EmptyPatch
/// on an empty set.
std::vector<float> encode_fv(std::span<const std::uint64_t> packed, const BmmParams& bmm);
std::vector<float> encode_fv(std::span<const feat::Descriptor512> descriptors, const BmmParams& bmm);

inline std::size_t fv_dimension(const BmmParams& bmm) { return bmm.K * (bmm.D + 1); }

}  // namespace mlens::retrieval
