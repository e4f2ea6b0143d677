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

#include <chrono>
#include <cstring>
#include <thread>

#include "doctest.h"
#include "mlens/net/transport.hpp"
#include "mlens/net/wire.hpp"
#include "support.hpp"

using namespace mlens;
using namespace mlens::net;

namespace {

Bytes hex(std::string_view s) {
  Bytes out;
  int hi = -1;
  for (char c : s) {
    int v;
    if (c >= '0' && c <= '9')
      v = c - '0';
    else if (c >= 'a' && c <= 'f')
      v = c - 'a' + 10;
    else
      continue;
    if (hi < 0) {
      hi = v;
    } else {
      out.push_back(static_cast<std::uint8_t>(hi * 16 + v));
      hi = -1;
    }
  }
  return out;
}

ResultMessage sample_result(std::size_t n) {
  ResultMessage res{0x12345678u, 99u, {}};
  for (std::size_t i = 0; i < n; ++i) {
    RecognizedObject o;
    o.object_id = static_cast<std::uint16_t>(i + 1);
    o.ref_id = static_cast<std::uint32_t>(1000 + i);
    for (int c = 0; c < 8; ++c) o.corners[c] = static_cast<float>(i) * 10.125f + static_cast<float>(c) / 3.0f;
    res.objects.push_back(o);
  }
  return res;
}

}  // namespace

TEST_CASE("request golden bytes") {
  RecognitionRequest req;
  req.client_nonce = 0x01020304;
  req.cycle_id = 7;
  req.frame_width = 4;
  req.frame_height = 2;
  req.codec = Codec::Raw;
  req.payload = {1, 2, 3, 4, 5, 6, 7, 8};
  const Bytes golden = hex(
      "4d4c4e31 01 01 00 00 04030201 07000000 0400 0200 08000000"
      "0102030405060708");
  CHECK(encode_request(req) == golden);
  CHECK(decode_request(golden) == req);
}

TEST_CASE("result golden bytes") {
  ResultMessage res;
  res.client_nonce = 0xaabbccdd;
  res.cycle_id = 0x100;
  RecognizedObject o;
  o.object_id = 3;
  o.ref_id = 42;
  o.corners = {1.5f, -2.0f, 0, 0, 0, 0, 0, 0.25f};
  res.objects.push_back(o);
  Bytes golden = hex(
      "4d4c4e31 01 02 01 00 ddccbbaa 00010000"
      "0300 2a000000 0000c03f 000000c0 00000000 00000000 00000000 00000000 00000000 0000803e");
  golden.resize(400, 0);
  const Bytes enc = encode_result(res);
  CHECK(enc == golden);
  CHECK(decode_result(golden) == res);
}

TEST_CASE("result message is always 400 bytes") {
  for (std::size_t n = 0; n <= kResultCapacity; ++n) {
    const auto res = sample_result(n);
    const Bytes enc = encode_result(res);
    REQUIRE(enc.size() == 400);
    CHECK(enc[6] == n);
    const std::size_t used = kResultHeaderSize + n * kResultRecordSize;
    for (std::size_t i = used; i < enc.size(); ++i) CHECK(enc[i] == 0);
    const auto back = decode_result(enc);
    CHECK(back == res);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(std::memcmp(back.objects[i].corners.data(), res.objects[i].corners.data(), 32) == 0);
  }
  CHECK(kResultCapacity == 10);
}

TEST_CASE("result errors") {
  try {
    encode_result(sample_result(11));
    FAIL("expected CapacityExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CapacityExceeded);
  }
  Bytes enc = encode_result(sample_result(2));
  auto code_of = [](const Bytes& b) {
    try {
      decode_result(b);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  Bytes shorter(enc.begin(), enc.end() - 1);
  CHECK(code_of(shorter) == ErrorCode::MalformedMessage);
  Bytes bad_magic = enc;
  bad_magic[0] = 'X';
  CHECK(code_of(bad_magic) == ErrorCode::MalformedMessage);
  Bytes bad_version = enc;
  bad_version[4] = 2;
  CHECK(code_of(bad_version) == ErrorCode::MalformedMessage);
  Bytes bad_count = enc;
  bad_count[6] = 11;
  CHECK(code_of(bad_count) == ErrorCode::MalformedMessage);
}

TEST_CASE("request round trip and errors") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    RecognitionRequest req;
    req.client_nonce = static_cast<std::uint32_t>(rng.next());
    req.cycle_id = static_cast<std::uint32_t>(rng.next());
    req.frame_width = static_cast<std::uint16_t>(rng.below(2000));
    req.frame_height = static_cast<std::uint16_t>(rng.below(2000));
    req.codec = static_cast<Codec>(rng.below(3));
    req.payload.resize(rng.below(5000));
    for (auto& b : req.payload) b = static_cast<std::uint8_t>(rng.below(256));
    const Bytes enc = encode_request(req);
    CHECK(enc.size() == kRequestHeaderSize + req.payload.size());
    CHECK(decode_request(enc) == req);
    // Any truncation is malformed.
    const std::size_t cut = rng.below(enc.size());
    try {
      decode_request(std::span(enc).first(cut));
      FAIL("truncated request decoded");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedMessage);
    }
  }
  RecognitionRequest big;
  big.payload.resize(kMaxDatagram - kRequestHeaderSize + 1);
  CHECK_THROWS_AS(encode_request(big), Error);
  big.payload.resize(kMaxDatagram - kRequestHeaderSize);
  CHECK(encode_request(big).size() == kMaxDatagram);

  Bytes enc = encode_request(RecognitionRequest{});
  enc[4] = 9;
  CHECK_THROWS_AS(decode_request(enc), Error);
  enc[4] = kVersion;
  enc[6] = 7;
  CHECK_THROWS_AS(decode_request(enc), Error);
}

TEST_CASE("peek_type") {
  CHECK(peek_type(encode_result(sample_result(0))) == MessageType::Result);
  CHECK(peek_type(encode_request(RecognitionRequest{})) == MessageType::Request);
  CHECK(!peek_type(Bytes{1, 2, 3}).has_value());
}

TEST_CASE("frame codecs") {
  const ImageGray8 frame = testing::textured_image(320, 180, 11, 3.0);
  SUBCASE("raw and deflate are lossless") {
    for (Codec c : {Codec::Raw, Codec::Deflate}) {
      FrameCodecConfig cfg;
      cfg.codec = c;
      const auto req = make_request(frame, 3, 5, cfg);
      CHECK(req.frame_width == 320);
      CHECK(decode_frame(decode_request(encode_request(req))) == frame);
    }
  }
  SUBCASE("jpeg respects the byte target and stays close") {
    FrameCodecConfig cfg;
    cfg.target_bytes = 6000;
    const auto req = make_request(frame, 3, 5, cfg);
    CHECK(req.payload.size() <= 6000);
    const ImageGray8 back = decode_frame(req);
    REQUIRE(back.width() == frame.width());
    double err = 0;
    for (std::size_t i = 0; i < frame.size(); ++i) err += std::abs(int(back.pixels()[i]) - int(frame.pixels()[i]));
    CHECK(err / static_cast<double>(frame.size()) < 6.0);
  }
  SUBCASE("wide frames are downscaled") {
    FrameCodecConfig cfg;
    cfg.max_width = 100;
    const auto req = make_request(frame, 0, 0, cfg);
    CHECK(req.frame_width == 80);
    CHECK(req.frame_height == 45);
  }
  SUBCASE("corrupt payloads are malformed") {
    auto req = make_request(frame, 0, 0);
    req.payload.resize(req.payload.size() / 3);
    CHECK_THROWS_AS(decode_frame(req), Error);
    FrameCodecConfig cfg;
    cfg.codec = Codec::Deflate;
    auto d = make_request(frame, 0, 0, cfg);
    d.payload[d.payload.size() / 2] ^= 0xff;
    d.payload.resize(d.payload.size() - 10);
    CHECK_THROWS_AS(decode_frame(d), Error);
  }
}

TEST_CASE("endpoint and link model parsing") {
  const auto ep = parse_endpoint("127.0.0.1:9000");
  CHECK(ep.address == 0x7f000001u);
  CHECK(ep.port == 9000);
  CHECK(to_string(ep) == "127.0.0.1:9000");
  CHECK_THROWS_AS(parse_endpoint("127.0.0.1"), Error);
  CHECK_THROWS_AS(parse_endpoint("1.2.3:80"), Error);
  const auto m = parse_link_model("sim:0.2,150,20");
  CHECK(m.drop == doctest::Approx(0.2));
  CHECK(m.delay_ms == 150);
  CHECK(m.jitter_ms == 20);
  CHECK_THROWS_AS(parse_link_model("sim:0.2,150"), Error);
  CHECK_THROWS_AS(parse_link_model("udp:0,0,0"), Error);
  CHECK_THROWS_AS(parse_link_model("sim:1.5,0,0"), Error);
}

TEST_CASE("simulated network delay and loss") {
  auto net = std::make_shared<SimNetwork>(LinkModel{0.0, 100.0, 0.0, 1});
  auto a = net->open({1, 1});
  auto b = net->open({2, 2});
  a->send({2, 2}, Bytes{1, 2, 3});
  CHECK(!b->receive(std::chrono::milliseconds(0)));
  net->advance_to(99.9);
  CHECK(!b->receive(std::chrono::milliseconds(0)));
  net->advance_to(100.0);
  auto d = b->receive(std::chrono::milliseconds(0));
  REQUIRE(d);
  CHECK(d->data == Bytes{1, 2, 3});
  CHECK(d->from == Endpoint{1, 1});
  CHECK(d->arrival_ms == 100.0);

  auto lossy = std::make_shared<SimNetwork>(LinkModel{0.2, 5.0, 2.0, 7});
  auto c = lossy->open({1, 1});
  auto e = lossy->open({2, 2});
  for (int i = 0; i < 5000; ++i) c->send({2, 2}, Bytes{0});
  lossy->advance_to(1000);
  int got = 0;
  while (e->receive(std::chrono::milliseconds(0))) ++got;
  CHECK(got > 3800);
  CHECK(got < 4200);
  CHECK(lossy->link_counters().dropped == static_cast<std::uint64_t>(5000 - got));
}

TEST_CASE("udp loopback") {
  UdpTransport server(parse_endpoint("127.0.0.1:0"));
  UdpTransport client(parse_endpoint("127.0.0.1:0"));
  const Bytes msg = encode_result(sample_result(4));
  client.send(server.local_endpoint(), msg);
  auto d = server.receive(std::chrono::milliseconds(2000));
  REQUIRE(d);
  CHECK(d->data == msg);
  CHECK(d->from == client.local_endpoint());
  CHECK(!server.receive(std::chrono::milliseconds(10)));
  CHECK_THROWS_AS(UdpTransport(server.local_endpoint()), Error);
}

TEST_CASE("impaired transport delays both directions") {
  auto inner = std::make_unique<UdpTransport>(parse_endpoint("127.0.0.1:0"));
  ImpairedTransport client(std::move(inner), LinkModel{0.0, 40.0, 0.0, 3});
  UdpTransport server(parse_endpoint("127.0.0.1:0"));
  const auto t0 = std::chrono::steady_clock::now();
  client.send(server.local_endpoint(), Bytes{9});
  auto d = server.receive(std::chrono::milliseconds(2000));
  REQUIRE(d);
  server.send(d->from, Bytes{8});
  auto back = client.receive(std::chrono::milliseconds(2000));
  REQUIRE(back);
  CHECK(back->data == Bytes{8});
  CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(80));
}
