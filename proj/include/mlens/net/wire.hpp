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
#include <optional>
#include <span>
#include <vector>

#include "mlens/common/bytes.hpp"
#include "mlens/img/image.hpp"

namespace mlens::net {

inline constexpr char kMagic[4] = {'M', 'L', 'N', '1'};
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kMaxDatagram = 65507;
inline constexpr std::size_t kResultSize = 400;
inline constexpr std::size_t kResultHeaderSize = 16;
inline constexpr std::size_t kResultRecordSize = 38;
inline constexpr std::size_t kResultCapacity = (kResultSize - kResultHeaderSize) / kResultRecordSize;
static_assert(kResultCapacity == 10);
inline constexpr std::size_t kRequestHeaderSize = 24;

enum class MessageType : std::uint8_t { Request = 1, Result = 2 };

enum class Codec : std::uint8_t { Raw = 0, Deflate = 1, Jpeg = 2 };

struct RecognitionRequest {
  std::uint32_t client_nonce = 0;
  std::uint32_t cycle_id = 0;
  std::uint16_t frame_width = 0;
  std::uint16_t frame_height = 0;
  Codec codec = Codec::Raw;
  Bytes payload;

  friend bool operator==(const RecognitionRequest&, const RecognitionRequest&) = default;
};

/// Corners are TL, TR, BR, BL as interleaved x, y in request-frame pixels.
struct RecognizedObject {
  std::uint16_t object_id = 0;
  std::uint32_t ref_id = 0;
  std::array<float, 8> corners{};

  friend bool operator==(const RecognizedObject&, const RecognizedObject&) = default;
};

struct ResultMessage {
  std::uint32_t client_nonce = 0;
  std::uint32_t cycle_id = 0;
  std::vector<RecognizedObject> objects;

  friend bool operator==(const ResultMessage&, const ResultMessage&) = default;
};

/// Request layout (little-endian):
///   0  "MLN1"   4  version u8   5  type u8 (1)   6  codec u8   7  reserved u8
///   8  nonce u32   12 cycle_id u32   16 width u16   18 height u16
///   20 payload length u32   24 payload
/// Throws PayloadTooLarge when the datagram would exceed 65507 bytes.
Bytes encode_request(const RecognitionRequest& req);

/// Throws MalformedMessage on bad magic, unknown version/type/codec or
/// truncation.
RecognitionRequest decode_request(std::span<const std::uint8_t> bytes);

/// Result layout, always exactly 400 bytes:
///   0  "MLN1"   4  version u8   5  type u8 (2)   6  count u8   7  reserved u8
///   8  nonce u32   12 cycle_id u32
///   16 + 38*i: object_id u16, ref_id u32, 8 x f32 corners
///   zero padding up to 400.
/// Throws CapacityExceeded for more than 10 objects.
Bytes encode_result(const ResultMessage& res);

/// Throws MalformedMessage when the length is not 400 or the header is bad.
ResultMessage decode_result(std::span<const std::uint8_t> bytes);

/// Peeks at the message type without a full decode.
std::optional<MessageType> peek_type(std::span<const std::uint8_t> bytes);

struct FrameCodecConfig {
  Codec codec = Codec::Jpeg;
  int max_width = 640;
  int jpeg_quality = 75;
  int jpeg_min_quality = 20;
  /// Whole datagram, header included.
  std::size_t target_bytes = 16 * 1024;
  int deflate_level = 6;
};

/// Compresses a frame into a request payload. Frames wider than max_width
/// are block-mean downscaled by the smallest integer factor that fits; the
/// request records the transmitted dimensions. JPEG steps its quality down
/// until the request fits target_bytes (or min quality is reached).
RecognitionRequest make_request(const ImageGray8& frame, std::uint32_t cycle_id, std::uint32_t client_nonce,
                                const FrameCodecConfig& cfg = {});

/// Restores the transmitted frame. Throws MalformedMessage for undecodable
/// payloads.
ImageGray8 decode_frame(const RecognitionRequest& req);

}  // namespace mlens::net
