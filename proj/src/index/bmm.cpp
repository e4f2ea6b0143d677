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

#include "mlens/index/bmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mlens/common/random.hpp"
#include "mlens/simd/kernels.hpp"

namespace mlens::retrieval {
namespace {

constexpr std::size_t W = simd::kDescriptorWords;

/// Per-component terms of log p(x | k) = base_k + sum over set bits of logit_kd.
struct LogModel {
  std::vector<double> log_weight, base, logit;
};

LogModel log_model(const BmmParams& bmm) {
  LogModel m;
  m.log_weight.resize(bmm.K);
  m.base.assign(bmm.K, 0.0);
  m.logit.resize(bmm.K * bmm.D);
  for (std::size_t k = 0; k < bmm.K; ++k) {
    m.log_weight[k] = std::log(bmm.weights[k]);
    for (std::size_t d = 0; d < bmm.D; ++d) {
      const double mu = bmm.mean(k, d);
      m.base[k] += std::log1p(-mu);
      m.logit[k * bmm.D + d] = std::log(mu) - std::log1p(-mu);
    }
  }
  return m;
}

/// Posteriors of one descriptor into `post`; returns log p(x).
double posteriors(const LogModel& m, std::size_t K, const std::uint64_t* bits, double* post) {
  const auto& kern = simd::kernels();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    post[k] = m.log_weight[k] + m.base[k] + kern.masked_sum512(bits, m.logit.data() + k * kBits);
    top = std::max(top, post[k]);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    post[k] = std::exp(post[k] - top);
    sum += post[k];
  }
  for (std::size_t k = 0; k < K; ++k) post[k] /= sum;
  return top + std::log(sum);
}

std::vector<std::size_t> sample_rows(std::size_t n, std::size_t limit, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= limit) return idx;
  for (std::size_t i = 0; i < limit; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// k-means++ seeding on Hamming distance followed by one hard-assignment
/// M-step.
BmmParams initialise(std::span<const std::uint64_t> data, std::size_t n, std::size_t K, const EmConfig& cfg,
                     Rng& rng) {
  const auto& kern = simd::kernels();
  std::vector<std::size_t> centres{static_cast<std::size_t>(rng.below(n))};
  std::vector<std::uint32_t> nearest(n, std::numeric_limits<std::uint32_t>::max());
  std::vector<std::uint32_t> assign(n, 0);
  std::vector<std::uint32_t> dist(n);
  for (std::size_t c = 0;; ++c) {
    kern.hamming512_many(data.data() + centres[c] * W, data.data(), n, dist.data());
    for (std::size_t i = 0; i < n; ++i)
      if (dist[i] < nearest[i]) {
        nearest[i] = dist[i];
        assign[i] = static_cast<std::uint32_t>(c);
      }
    if (centres.size() == K) break;
    double total = 0.0;
    for (std::uint32_t d : nearest) total += static_cast<double>(d) * d;
    std::size_t pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (pick = 0; pick + 1 < n; ++pick) {
        r -= static_cast<double>(nearest[pick]) * nearest[pick];
        if (r < 0.0) break;
      }
    } else {
      pick = static_cast<std::size_t>(rng.below(n));
    }
    centres.push_back(pick);
  }

  BmmParams p;
  p.K = K;
  p.weights.assign(K, 0.0);
  p.means.assign(K * kBits, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    p.weights[assign[i]] += 1.0;
    kern.masked_add512(p.means.data() + assign[i] * kBits, data.data() + i * W, 1.0);
  }
  for (std::size_t k = 0; k < K; ++k) {
    const double count = std::max(p.weights[k], 1.0);
    for (std::size_t d = 0; d < kBits; ++d)
      p.means[k * kBits + d] = std::clamp(p.means[k * kBits + d] / count, cfg.eps, 1.0 - cfg.eps);
    p.weights[k] = std::max(p.weights[k], 1.0) / static_cast<double>(n);
  }
  const double wsum = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
  for (double& w : p.weights) w /= wsum;
  return p;
}

}  // namespace

double mean_log_likelihood(const BmmParams& bmm, std::span<const std::uint64_t> packed) {
  const std::size_t n = packed.size() / W;
  require(n > 0, ErrorCode::InvalidArgument, "no descriptors");
  const LogModel m = log_model(bmm);
  std::vector<double> post(bmm.K);
  double ll = 0.0;
  for (std::size_t i = 0; i < n; ++i) ll += posteriors(m, bmm.K, packed.data() + i * W, post.data());
  return ll / static_cast<double>(n);
}

BmmFit train_bmm(std::span<const std::uint64_t> packed, std::size_t K, const EmConfig& cfg) {
  require(packed.size() % W == 0, ErrorCode::InvalidArgument, "packed descriptors must be whole 512-bit strings");
  const std::size_t total = packed.size() / W;
  require(K >= 1 && total >= 10 * K, ErrorCode::InvalidArgument, "BMM training needs at least 10*K descriptors");
  require(cfg.eps > 0.0 && cfg.eps < 0.5 && cfg.max_iters >= 1, ErrorCode::InvalidArgument, "invalid EM configuration");

  Rng rng(cfg.seed);
  const auto rows = sample_rows(total, std::max(cfg.max_samples, 10 * K), rng);
  std::vector<std::uint64_t> data;
  if (rows.size() == total) {
    data.assign(packed.begin(), packed.end());
  } else {
    data.reserve(rows.size() * W);
    for (std::size_t r : rows) data.insert(data.end(), packed.begin() + r * W, packed.begin() + (r + 1) * W);
  }
  const std::size_t n = rows.size();
  const auto& kern = simd::kernels();

  BmmFit fit;
  fit.params = initialise(data, n, K, cfg, rng);
  BmmParams& p = fit.params;
  std::vector<double> post(K), resp_sum(K), acc(K * kBits);
  // The weight floor keeps log(weight) finite if a component loses all
  // support; its effect on the likelihood is far below the tolerance.
  constexpr double kWeightFloor = 1e-12;

  bool converged = false;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const LogModel m = log_model(p);
    std::fill(resp_sum.begin(), resp_sum.end(), 0.0);
    std::fill(acc.begin(), acc.end(), 0.0);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t* bits = data.data() + i * W;
      ll += posteriors(m, K, bits, post.data());
      for (std::size_t k = 0; k < K; ++k) {
        resp_sum[k] += post[k];
        if (post[k] > 0.0) kern.masked_add512(acc.data() + k * kBits, bits, post[k]);
      }
    }
    ll /= static_cast<double>(n);
    fit.log_likelihood.push_back(ll);
    if (it > 1 && ll - fit.log_likelihood[fit.log_likelihood.size() - 2] < cfg.tol) {
      converged = true;
      break;
    }

    for (std::size_t k = 0; k < K; ++k) {
      p.weights[k] = std::max(resp_sum[k] / static_cast<double>(n), kWeightFloor);
      if (resp_sum[k] <= 0.0) continue;
      for (std::size_t d = 0; d < kBits; ++d)
        p.means[k * kBits + d] = std::clamp(acc[k * kBits + d] / resp_sum[k], cfg.eps, 1.0 - cfg.eps);
    }
    const double wsum = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
    for (double& w : p.weights) w /= wsum;
    fit.iterations = it;
    if (cfg.on_iteration) cfg.on_iteration(it, p, ll);
  }
  if (!converged) fit.log_likelihood.push_back(mean_log_likelihood(p, data));
  return fit;
}

BmmFit train_bmm(std::span<const feat::Descriptor512> descriptors, std::size_t K, const EmConfig& cfg) {
  return train_bmm(feat::pack_bits(descriptors), K, cfg);
}

std::vector<float> encode_fv(std::span<const std::uint64_t> packed, const BmmParams& bmm) {
  require(packed.size() % W == 0, ErrorCode::InvalidArgument, "packed descriptors must be whole 512-bit strings");
  const std::size_t T = packed.size() / W;
  require(T > 0, ErrorCode::EmptyPatch, "no descriptors to encode");
  require(bmm.K > 0 && bmm.D == kBits, ErrorCode::InvalidArgument, "untrained mixture");
  const std::size_t K = bmm.K, D = bmm.D;

  // Visit descriptors in a canonical order so the floating-point sums, and
  // therefore the vector, do not depend on the input order.
  std::vector<std::size_t> order(T);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(packed.begin() + a * W, packed.begin() + (a + 1) * W, packed.begin() + b * W,
                                        packed.begin() + (b + 1) * W);
  });

  const auto& kern = simd::kernels();
  const LogModel m = log_model(bmm);
  std::vector<double> post(K), gamma_sum(K, 0.0), gamma_x(K * D, 0.0);
  std::vector<double> prior_grad(K, 0.0);
  for (std::size_t i : order) {
    const std::uint64_t* bits = packed.data() + i * W;
    posteriors(m, K, bits, post.data());
    for (std::size_t k = 0; k < K; ++k) {
      gamma_sum[k] += post[k];
      prior_grad[k] += post[k] - bmm.weights[k];
      if (post[k] > 0.0) kern.masked_add512(gamma_x.data() + k * D, bits, post[k]);
    }
  }

  std::vector<double> fv(K * (D + 1));
  const double t = static_cast<double>(T);
  for (std::size_t k = 0; k < K; ++k) {
    const double scale = 1.0 / (t * std::sqrt(bmm.weights[k]));
    fv[k] = prior_grad[k] * scale;
    for (std::size_t d = 0; d < D; ++d) {
      const double mu = bmm.mean(k, d);
      fv[K + k * D + d] = (gamma_x[k * D + d] - gamma_sum[k] * mu) / std::sqrt(mu * (1.0 - mu)) * scale;
    }
  }
  double norm_sq = 0.0;
  for (double& v : fv) {
    v = std::copysign(std::sqrt(std::fabs(v)), v);
    norm_sq += v * v;
  }
  std::vector<float> out(fv.size());
  const double inv = norm_sq > 0.0 ? 1.0 / std::sqrt(norm_sq) : 0.0;
  for (std::size_t i = 0; i < fv.size(); ++i) out[i] = static_cast<float>(fv[i] * inv);
  return out;
}

std::vector<float> encode_fv(std::span<const feat::Descriptor512> descriptors, const BmmParams& bmm) {
  require(!descriptors.empty(), ErrorCode::EmptyPatch, "no descriptors to encode");
  return encode_fv(feat::pack_bits(descriptors), bmm);
}

}  // namespace mlens::retrieval
