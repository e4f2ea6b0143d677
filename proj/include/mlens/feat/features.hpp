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

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mlens/img/image.hpp"

namespace mlens::feat {

struct Keypoint {
  Point2 pt;       ///< full-resolution coordinates
  int octave = 0;  ///< pyramid level it was found on (scale 2^octave)
  float score = 0;
};

struct AgastConfig {
  int threshold = 20;
  int octaves = 4;
  int max_keypoints = 500;
};

/// Segment-test corners on the 16-pixel Bresenham circle of radius 3: a
/// pixel is a corner when 9 contiguous circle pixels are all brighter than
/// centre + threshold or all darker than centre - threshold. The score is
/// the smallest contrast along the best arc, so a pixel is a corner at
/// threshold t exactly when score > t. Runs per octave of a
/// factor-2 block-mean pyramid with 3x3 non-maximum suppression, then keeps
/// the strongest max_keypoints overall. On octaves 0 and 1 positions get a
/// per-axis parabolic sub-pixel peak, within half a pixel of the winning
/// pixel.
/// Throws InvalidArgument for images smaller than 48x48.
std::vector<Keypoint> detect_agast(const ImageGray8& img, const AgastConfig& cfg = {});

/// Score of one pixel (0 when it is not a segment-test corner at any
/// threshold). Exposed for testing.
int segment_test_score(const ImageGray8& img, int x, int y);

struct Descriptor512 {
  std::array<std::uint64_t, 8> bits{};
  Point2 keypoint;
  int octave = 0;
  float orientation = 0;  ///< radians

  bool bit(std::size_t i) const { return (bits[i >> 6] >> (i & 63)) & 1u; }
};

struct FreakConfig {
  /// Pattern scale at octave 0 in pixels; doubles per octave.
  double pattern_scale = 22.0;
  bool orientation_normalized = true;
};

struct FreakResult {
  std::vector<Descriptor512> descriptors;
  std::size_t dropped = 0;  ///< keypoints whose pattern leaves the image
};

/// Retina-inspired binary descriptor: 43 receptive fields on 8 concentric
/// rings, each averaged over a box proportional to its size; orientation
/// from 45 symmetric field pairs, quantized to 256 bins; 512 ordered
/// intensity comparisons. Bit n of `bits` is comparison n of the standard
/// pair table.
FreakResult extract_freak(const ImageGray8& img, std::span<const Keypoint> keypoints, const FreakConfig& cfg = {});

/// Pixels of support the pattern needs around a keypoint of this octave.
double freak_support_radius(int octave, const FreakConfig& cfg = {});

std::uint32_t hamming(const Descriptor512& a, const Descriptor512& b);

struct MatchConfig {
  std::uint32_t max_hamming = 96;
  double ratio = 0.8;
};

struct MatchPair {
  std::uint32_t query_idx = 0;
  std::uint32_t reference_idx = 0;
  std::uint32_t hamming = 0;
};

/// Contiguous 8-word-per-descriptor bit buffer, the layout the Hamming
/// kernels scan.
std::vector<std::uint64_t> pack_bits(std::span<const Descriptor512> descriptors);

/// Nearest and second-nearest reference per query; kept when the nearest is
/// within max_hamming and below ratio x second-nearest, and the pair is
/// mutually best. Results are ordered by query index. Throws InvalidArgument
/// on empty input.
std::vector<MatchPair> match_descriptors(std::span<const Descriptor512> query,
                                         std::span<const Descriptor512> reference, const MatchConfig& cfg = {});

/// Same on packed buffers.
std::vector<MatchPair> match_packed(std::span<const std::uint64_t> query, std::span<const std::uint64_t> reference,
                                    const MatchConfig& cfg = {});

}  // namespace mlens::feat
