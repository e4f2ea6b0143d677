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

#include "mlens/index/reference_index.hpp"

#include <zlib.h>

#include <chrono>
#include <fstream>
#include <iterator>

#include "mlens/img/ops.hpp"
#include "mlens/simd/kernels.hpp"

namespace mlens::retrieval {
namespace {

constexpr std::string_view kMagic = "MLNS1";

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

Quad canonical_corners(int size) {
  const double hi = size - 0.5;
  return {Point2{-0.5, -0.5}, Point2{hi, -0.5}, Point2{hi, hi}, Point2{-0.5, hi}};
}

}  // namespace

ImageGray8 canonical_reference(const ImageGray8& img, const DescribeConfig& cfg) {
  require(cfg.canonical_size >= 48, ErrorCode::InvalidArgument, "canonical size below the descriptor support");
  if (img.width() == cfg.canonical_size && img.height() == cfg.canonical_size) return img;
  return resize(img, cfg.canonical_size, cfg.canonical_size);
}

ImageDescription describe_image(const ImageGray8& img, const DescribeConfig& cfg) {
  ImageDescription out;
  const auto kps = feat::detect_agast(img, cfg.agast);
  out.keypoints = kps.size();
  out.descriptors = feat::extract_freak(img, kps, cfg.freak).descriptors;
  return out;
}

ReferenceIndex ReferenceIndex::build(const std::vector<NamedImage>& images, const IndexBuildConfig& cfg,
                                     BuildReport* report) {
  BuildReport local;
  BuildReport& rep = report ? *report : local;
  rep = BuildReport{};
  rep.images = images.size();

  ReferenceIndex idx;
  idx.describe_ = cfg.describe;
  auto t0 = std::chrono::steady_clock::now();
  for (const auto& named : images) {
    ReferenceEntry e;
    e.name = named.name;
    e.annotation_id = named.annotation_id;
    e.width = named.image.width();
    e.height = named.image.height();
    if (e.width < 1 || e.height < 1) {
      rep.warnings.push_back(named.name + ": empty image, skipped");
      ++rep.skipped;
      continue;
    }
    auto desc = describe_image(canonical_reference(named.image, cfg.describe), cfg.describe);
    if (desc.descriptors.empty()) {
      rep.warnings.push_back(named.name + ": no descriptors, skipped");
      ++rep.skipped;
      continue;
    }
    e.id = static_cast<std::uint32_t>(idx.entries_.size());
    e.corners = canonical_corners(cfg.describe.canonical_size);
    e.keypoints = static_cast<std::uint32_t>(desc.keypoints);
    e.descriptors = std::move(desc.descriptors);
    rep.descriptors += e.descriptors.size();
    idx.entries_.push_back(std::move(e));
  }
  rep.describe_ms = ms_since(t0);
  if (idx.entries_.empty()) fail(ErrorCode::BuildFailed, "no usable reference images");
  if (rep.descriptors < 10) fail(ErrorCode::BuildFailed, "too few descriptors to train the mixture");

  t0 = std::chrono::steady_clock::now();
  std::vector<std::uint64_t> all;
  all.reserve(rep.descriptors * simd::kDescriptorWords);
  for (const auto& e : idx.entries_)
    for (const auto& d : e.descriptors) all.insert(all.end(), d.bits.begin(), d.bits.end());
  rep.components = std::min(cfg.components, rep.descriptors / 10);
  const BmmFit fit = train_bmm(all, rep.components, cfg.em);
  idx.bmm_ = fit.params;
  rep.em_iterations = fit.iterations;
  rep.train_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  for (auto& e : idx.entries_) e.fv = encode_fv(e.descriptors, idx.bmm_);
  rep.encode_ms = ms_since(t0);

  t0 = std::chrono::steady_clock::now();
  idx.finalize(cfg.lsh);
  rep.lsh_ms = ms_since(t0);
  return idx;
}

void ReferenceIndex::finalize(const LshConfig& lsh) {
  packed_.clear();
  std::vector<std::vector<float>> fvs;
  std::vector<std::uint32_t> ids;
  for (const auto& e : entries_) {
    packed_.push_back(feat::pack_bits(e.descriptors));
    fvs.push_back(e.fv);
    ids.push_back(e.id);
  }
  lsh_ = LshIndex(std::move(fvs), std::move(ids), lsh);
}

const ReferenceEntry& ReferenceIndex::entry(std::uint32_t id) const {
  require(id < entries_.size(), ErrorCode::InvalidArgument, "unknown reference id");
  return entries_[id];
}

std::span<const std::uint64_t> ReferenceIndex::packed(std::uint32_t id) const {
  require(id < packed_.size(), ErrorCode::InvalidArgument, "unknown reference id");
  return packed_[id];
}

Bytes ReferenceIndex::serialize() const {
  Bytes out;
  ByteWriter w(out);
  w.put_tag(kMagic);
  w.put(static_cast<std::int32_t>(describe_.canonical_size));
  w.put(static_cast<std::int32_t>(describe_.agast.threshold));
  w.put(static_cast<std::int32_t>(describe_.agast.octaves));
  w.put(static_cast<std::int32_t>(describe_.agast.max_keypoints));
  w.put(describe_.freak.pattern_scale);
  w.put(static_cast<std::uint8_t>(describe_.freak.orientation_normalized));

  w.put(static_cast<std::uint32_t>(bmm_.K));
  w.put(static_cast<std::uint32_t>(bmm_.D));
  for (double v : bmm_.weights) w.put(v);
  for (double v : bmm_.means) w.put(v);

  const LshConfig& lc = lsh_.config();
  w.put(static_cast<std::int32_t>(lc.tables));
  w.put(static_cast<std::int32_t>(lc.bits));
  w.put(lc.seed);

  w.put(static_cast<std::uint32_t>(fv_dimension(bmm_)));
  w.put(static_cast<std::uint32_t>(entries_.size()));
  for (const auto& e : entries_) {
    w.put(e.id);
    w.put_string(e.name);
    w.put(e.annotation_id);
    w.put(static_cast<std::int32_t>(e.width));
    w.put(static_cast<std::int32_t>(e.height));
    for (const auto& p : e.corners) {
      w.put(p.x);
      w.put(p.y);
    }
    w.put(e.keypoints);
    w.put(static_cast<std::uint32_t>(e.descriptors.size()));
    for (const auto& d : e.descriptors) {
      for (std::uint64_t word : d.bits) w.put(word);
      w.put(d.keypoint.x);
      w.put(d.keypoint.y);
      w.put(static_cast<std::int32_t>(d.octave));
      w.put(d.orientation);
    }
    for (float v : e.fv) w.put(v);
  }
  const auto crc = static_cast<std::uint32_t>(crc32(0L, out.data(), static_cast<uInt>(out.size())));
  w.put(crc);
  return out;
}

ReferenceIndex ReferenceIndex::deserialize(std::span<const std::uint8_t> data) {
  require(data.size() >= kMagic.size() + 4, ErrorCode::IoError, "index file too short");
  ByteReader r(data, ErrorCode::IoError);
  require(r.expect_tag(kMagic), ErrorCode::IoError, "not an index file (bad magic)");
  ByteReader tail(data.subspan(data.size() - 4), ErrorCode::IoError);
  const auto stored_crc = tail.get<std::uint32_t>();
  const auto crc = static_cast<std::uint32_t>(crc32(0L, data.data(), static_cast<uInt>(data.size() - 4)));
  require(crc == stored_crc, ErrorCode::IoError, "index file checksum mismatch");

  ReferenceIndex idx;
  idx.describe_.canonical_size = r.get<std::int32_t>();
  idx.describe_.agast.threshold = r.get<std::int32_t>();
  idx.describe_.agast.octaves = r.get<std::int32_t>();
  idx.describe_.agast.max_keypoints = r.get<std::int32_t>();
  idx.describe_.freak.pattern_scale = r.get<double>();
  idx.describe_.freak.orientation_normalized = r.get<std::uint8_t>() != 0;

  idx.bmm_.K = r.get<std::uint32_t>();
  idx.bmm_.D = r.get<std::uint32_t>();
  require(idx.bmm_.D == kBits && idx.bmm_.K >= 1 && idx.bmm_.K <= 4096, ErrorCode::IoError, "bad mixture header");
  idx.bmm_.weights.resize(idx.bmm_.K);
  for (double& v : idx.bmm_.weights) v = r.get<double>();
  idx.bmm_.means.resize(idx.bmm_.K * idx.bmm_.D);
  for (double& v : idx.bmm_.means) v = r.get<double>();

  LshConfig lc;
  lc.tables = r.get<std::int32_t>();
  lc.bits = r.get<std::int32_t>();
  lc.seed = r.get<std::uint64_t>();

  const auto dim = r.get<std::uint32_t>();
  require(dim == fv_dimension(idx.bmm_), ErrorCode::IoError, "vector dimension does not match the mixture");
  const auto n = r.get<std::uint32_t>();
  require(n >= 1, ErrorCode::IoError, "index has no references");
  idx.entries_.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    ReferenceEntry& e = idx.entries_[i];
    e.id = r.get<std::uint32_t>();
    require(e.id == i, ErrorCode::IoError, "reference ids out of order");
    e.name = r.get_string();
    e.annotation_id = r.get<std::uint32_t>();
    e.width = r.get<std::int32_t>();
    e.height = r.get<std::int32_t>();
    for (auto& p : e.corners) {
      p.x = r.get<double>();
      p.y = r.get<double>();
    }
    e.keypoints = r.get<std::uint32_t>();
    const auto nd = r.get<std::uint32_t>();
    require(nd <= r.remaining() / 88, ErrorCode::IoError, "descriptor count exceeds file size");
    e.descriptors.resize(nd);
    for (auto& d : e.descriptors) {
      for (auto& word : d.bits) word = r.get<std::uint64_t>();
      d.keypoint.x = r.get<double>();
      d.keypoint.y = r.get<double>();
      d.octave = r.get<std::int32_t>();
      d.orientation = r.get<float>();
    }
    require(dim <= r.remaining() / 4, ErrorCode::IoError, "vector exceeds file size");
    e.fv.resize(dim);
    for (float& v : e.fv) v = r.get<float>();
  }
  require(r.remaining() == 4, ErrorCode::IoError, "trailing bytes in index file");
  idx.finalize(lc);
  return idx;
}

void ReferenceIndex::save(const std::filesystem::path& path) const {
  const Bytes data = serialize();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!f) fail(ErrorCode::IoError, "write failed: " + path.string());
}

ReferenceIndex ReferenceIndex::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot open " + path.string());
  const Bytes data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize(data);
}

}  // namespace mlens::retrieval
