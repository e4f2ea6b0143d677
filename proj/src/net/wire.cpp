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

#include "mlens/net/wire.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <csetjmp>
#include <cstring>

#include <jpeglib.h>
#include <zlib.h>

#include "mlens/img/ops.hpp"

namespace mlens::net {
namespace {

constexpr std::string_view kMagicView{kMagic, 4};

void check_header(ByteReader& r, MessageType expected) {
  if (!r.expect_tag(kMagicView)) fail(ErrorCode::MalformedMessage, "bad magic");
  const auto version = r.get<std::uint8_t>();
  if (version != kVersion) fail(ErrorCode::MalformedMessage, "unsupported version " + std::to_string(version));
  const auto type = r.get<std::uint8_t>();
  if (type != static_cast<std::uint8_t>(expected)) fail(ErrorCode::MalformedMessage, "unexpected message type");
}

bool known_codec(std::uint8_t c) { return c <= static_cast<std::uint8_t>(Codec::Jpeg); }

// ---- deflate --------------------------------------------------------------

Bytes deflate_bytes(std::span<const std::uint8_t> raw, int level) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  Bytes out(bound);
  if (compress2(out.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), level) != Z_OK)
    fail(ErrorCode::InvalidArgument, "deflate failed");
  out.resize(bound);
  return out;
}

std::vector<std::uint8_t> inflate_bytes(std::span<const std::uint8_t> packed, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  uLongf len = static_cast<uLongf>(expected);
  if (uncompress(out.data(), &len, packed.data(), static_cast<uLong>(packed.size())) != Z_OK || len != expected)
    fail(ErrorCode::MalformedMessage, "deflate payload does not decode to the frame size");
  return out;
}

// ---- JPEG -----------------------------------------------------------------

struct JpegErrorMgr {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
  int warnings;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Corrupt-data warnings (level -1) make libjpeg substitute gray blocks; a
// request frame with invented content is worse than a dropped request.
void jpeg_count_warning(j_common_ptr cinfo, int level) {
  if (level < 0) ++reinterpret_cast<JpegErrorMgr*>(cinfo->err)->warnings;
}

Bytes jpeg_encode(const ImageGray8& img, int quality) {
  jpeg_compress_struct cinfo{};
  JpegErrorMgr err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  unsigned char* buf = nullptr;
  unsigned long len = 0;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buf);
    fail(ErrorCode::InvalidArgument, std::string("jpeg encode: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buf, &len);
  cinfo.image_width = static_cast<JDIMENSION>(img.width());
  cinfo.image_height = static_cast<JDIMENSION>(img.height());
  cinfo.input_components = 1;
  cinfo.in_color_space = JCS_GRAYSCALE;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  cinfo.optimize_coding = TRUE;
  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(img.row(static_cast<int>(cinfo.next_scanline)));
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  Bytes out(buf, buf + len);
  std::free(buf);
  return out;
}

ImageGray8 jpeg_decode(std::span<const std::uint8_t> data, int width, int height) {
  jpeg_decompress_struct cinfo{};
  JpegErrorMgr err{};
  ImageGray8 out;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.base.emit_message = jpeg_count_warning;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    fail(ErrorCode::MalformedMessage, std::string("jpeg decode: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, data.data(), static_cast<unsigned long>(data.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_GRAYSCALE;
  jpeg_start_decompress(&cinfo);
  if (static_cast<int>(cinfo.output_width) != width || static_cast<int>(cinfo.output_height) != height ||
      cinfo.output_components != 1) {
    jpeg_destroy_decompress(&cinfo);
    fail(ErrorCode::MalformedMessage, "jpeg dimensions disagree with the request header");
  }
  out = ImageGray8(width, height);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = out.row(static_cast<int>(cinfo.output_scanline));
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  if (err.warnings > 0) fail(ErrorCode::MalformedMessage, "jpeg payload is corrupt");
  return out;
}

}  // namespace

Bytes encode_request(const RecognitionRequest& req) {
  if (kRequestHeaderSize + req.payload.size() > kMaxDatagram)
    fail(ErrorCode::PayloadTooLarge, "request of " + std::to_string(kRequestHeaderSize + req.payload.size()) +
                                         " bytes does not fit one datagram");
  Bytes out;
  out.reserve(kRequestHeaderSize + req.payload.size());
  ByteWriter w(out);
  w.put_tag(kMagicView);
  w.put(kVersion);
  w.put(static_cast<std::uint8_t>(MessageType::Request));
  w.put(static_cast<std::uint8_t>(req.codec));
  w.put(std::uint8_t{0});
  w.put(req.client_nonce);
  w.put(req.cycle_id);
  w.put(req.frame_width);
  w.put(req.frame_height);
  w.put(static_cast<std::uint32_t>(req.payload.size()));
  w.put_bytes(req.payload);
  return out;
}

RecognitionRequest decode_request(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  check_header(r, MessageType::Request);
  RecognitionRequest req;
  const auto codec = r.get<std::uint8_t>();
  if (!known_codec(codec)) fail(ErrorCode::MalformedMessage, "unknown payload codec");
  req.codec = static_cast<Codec>(codec);
  r.get<std::uint8_t>();
  req.client_nonce = r.get<std::uint32_t>();
  req.cycle_id = r.get<std::uint32_t>();
  req.frame_width = r.get<std::uint16_t>();
  req.frame_height = r.get<std::uint16_t>();
  const auto len = r.get<std::uint32_t>();
  if (r.remaining() != len) fail(ErrorCode::MalformedMessage, "payload length mismatch");
  auto payload = r.get_bytes(len);
  req.payload.assign(payload.begin(), payload.end());
  return req;
}

Bytes encode_result(const ResultMessage& res) {
  if (res.objects.size() > kResultCapacity)
    fail(ErrorCode::CapacityExceeded, std::to_string(res.objects.size()) + " objects exceed the result capacity");
  Bytes out;
  out.reserve(kResultSize);
  ByteWriter w(out);
  w.put_tag(kMagicView);
  w.put(kVersion);
  w.put(static_cast<std::uint8_t>(MessageType::Result));
  w.put(static_cast<std::uint8_t>(res.objects.size()));
  w.put(std::uint8_t{0});
  w.put(res.client_nonce);
  w.put(res.cycle_id);
  for (const auto& o : res.objects) {
    w.put(o.object_id);
    w.put(o.ref_id);
    for (float c : o.corners) w.put(c);
  }
  w.pad_to(kResultSize);
  return out;
}

ResultMessage decode_result(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kResultSize) fail(ErrorCode::MalformedMessage, "result datagram must be 400 bytes");
  ByteReader r(bytes);
  check_header(r, MessageType::Result);
  const auto count = r.get<std::uint8_t>();
  if (count > kResultCapacity) fail(ErrorCode::MalformedMessage, "object count exceeds capacity");
  r.get<std::uint8_t>();
  ResultMessage res;
  res.client_nonce = r.get<std::uint32_t>();
  res.cycle_id = r.get<std::uint32_t>();
  res.objects.resize(count);
  for (auto& o : res.objects) {
    o.object_id = r.get<std::uint16_t>();
    o.ref_id = r.get<std::uint32_t>();
    for (float& c : o.corners) c = r.get<float>();
  }
  return res;
}

std::optional<MessageType> peek_type(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 4) != 0 || bytes[4] != kVersion) return std::nullopt;
  if (bytes[5] == static_cast<std::uint8_t>(MessageType::Request)) return MessageType::Request;
  if (bytes[5] == static_cast<std::uint8_t>(MessageType::Result)) return MessageType::Result;
  return std::nullopt;
}

RecognitionRequest make_request(const ImageGray8& frame, std::uint32_t cycle_id, std::uint32_t client_nonce,
                                const FrameCodecConfig& cfg) {
  require(cfg.max_width >= 1, ErrorCode::InvalidArgument, "max_width must be positive");
  int factor = 1;
  while (frame.width() / factor > cfg.max_width) ++factor;
  const ImageGray8 sent = factor == 1 ? frame : downsample(frame, factor);
  require(sent.width() <= 0xffff && sent.height() <= 0xffff, ErrorCode::PayloadTooLarge, "frame too large");

  RecognitionRequest req;
  req.client_nonce = client_nonce;
  req.cycle_id = cycle_id;
  req.frame_width = static_cast<std::uint16_t>(sent.width());
  req.frame_height = static_cast<std::uint16_t>(sent.height());
  req.codec = cfg.codec;
  switch (cfg.codec) {
    case Codec::Raw:
      req.payload.assign(sent.data().begin(), sent.data().end());
      break;
    case Codec::Deflate:
      req.payload = deflate_bytes(sent.pixels(), cfg.deflate_level);
      break;
    case Codec::Jpeg: {
      int q = std::clamp(cfg.jpeg_quality, 1, 100);
      const int q_min = std::clamp(cfg.jpeg_min_quality, 1, q);
      req.payload = jpeg_encode(sent, q);
      while (kRequestHeaderSize + req.payload.size() > cfg.target_bytes && q > q_min) {
        q = std::max(q_min, q - 5);
        req.payload = jpeg_encode(sent, q);
      }
      break;
    }
  }
  if (kRequestHeaderSize + req.payload.size() > kMaxDatagram)
    fail(ErrorCode::PayloadTooLarge, "compressed frame does not fit one datagram; downscale further");
  return req;
}

ImageGray8 decode_frame(const RecognitionRequest& req) {
  const int w = req.frame_width;
  const int h = req.frame_height;
  if (w < 1 || h < 1) fail(ErrorCode::MalformedMessage, "empty frame dimensions");
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  switch (req.codec) {
    case Codec::Raw:
      if (req.payload.size() != n) fail(ErrorCode::MalformedMessage, "raw payload size mismatch");
      return ImageGray8(w, h, std::vector<std::uint8_t>(req.payload.begin(), req.payload.end()));
    case Codec::Deflate:
      return ImageGray8(w, h, inflate_bytes(req.payload, n));
    case Codec::Jpeg:
      return jpeg_decode(req.payload, w, h);
  }
  fail(ErrorCode::MalformedMessage, "unknown payload codec");
}

}  // namespace mlens::net
