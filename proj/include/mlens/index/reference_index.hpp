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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mlens/common/bytes.hpp"
#include "mlens/feat/features.hpp"
#include "mlens/geom/polygon.hpp"
#include "mlens/img/image.hpp"
#include "mlens/index/bmm.hpp"
#include "mlens/index/lsh.hpp"

namespace mlens::retrieval {

struct DescribeConfig {
  /// References are resampled to a square of this side before description,
  /// the same geometry segmentation gives query patches.
  int canonical_size = 400;
  feat::AgastConfig agast;
  feat::FreakConfig freak;
};

struct ImageDescription {
  std::vector<feat::Descriptor512> descriptors;
  std::size_t keypoints = 0;  ///< detected, before border drops
};

ImageDescription describe_image(const ImageGray8& img, const DescribeConfig& cfg = {});

/// Square resample to cfg.canonical_size.
ImageGray8 canonical_reference(const ImageGray8& img, const DescribeConfig& cfg = {});

struct ReferenceEntry {
  std::uint32_t id = 0;
  std::string name;
  std::uint32_t annotation_id = 0;
  int width = 0;   ///< original image size
  int height = 0;
  Quad corners{};  ///< target outline in canonical coordinates
  std::uint32_t keypoints = 0;
  std::vector<feat::Descriptor512> descriptors;
  std::vector<float> fv;
};

struct NamedImage {
  std::string name;
  ImageGray8 image;
  std::uint32_t annotation_id = 0;
};

struct IndexBuildConfig {
  DescribeConfig describe;
  std::size_t components = 8;
  EmConfig em;
  LshConfig lsh;
};

struct BuildReport {
  std::size_t images = 0;
  std::size_t skipped = 0;
  std::size_t descriptors = 0;
  std::size_t components = 0;  ///< K actually trained
  int em_iterations = 0;
  double describe_ms = 0, train_ms = 0, encode_ms = 0, lsh_ms = 0;
  std::vector<std::string> warnings;
};

/// Immutable after construction; safe to share across threads.
class ReferenceIndex {
 public:
  ReferenceIndex() = default;

  /// Ids are assigned in input order. Images that yield no descriptors are
  /// skipped with a warning. K is reduced to |descriptors| / 10 when the
  /// corpus is too small for the requested count. Throws BuildFailed when
  /// nothing usable remains.
  static ReferenceIndex build(const std::vector<NamedImage>& images, const IndexBuildConfig& cfg = {},
                              BuildReport* report = nullptr);

  Bytes serialize() const;
  /// Throws IoError on a bad magic, checksum or truncated input.
  static ReferenceIndex deserialize(std::span<const std::uint8_t> data);
  void save(const std::filesystem::path& path) const;
  static ReferenceIndex load(const std::filesystem::path& path);

  std::size_t size() const { return entries_.size(); }
  const ReferenceEntry& entry(std::uint32_t id) const;
  const std::vector<ReferenceEntry>& entries() const { return entries_; }
  /// Descriptor bits of a reference in the layout the matcher scans.
  std::span<const std::uint64_t> packed(std::uint32_t id) const;

  const BmmParams& bmm() const { return bmm_; }
  const LshIndex& lsh() const { return lsh_; }
  const DescribeConfig& describe_config() const { return describe_; }

  std::vector<float> encode(std::span<const feat::Descriptor512> descriptors) const { return encode_fv(descriptors, bmm_); }
  std::vector<Neighbor> query_knn(std::span<const float> fv, std::size_t k = 5) const { return lsh_.query(fv, k); }

 private:
  void finalize(const LshConfig& lsh);

  DescribeConfig describe_;
  BmmParams bmm_;
  std::vector<ReferenceEntry> entries_;
  std::vector<std::vector<std::uint64_t>> packed_;
  LshIndex lsh_;
};

}  // namespace mlens::retrieval
