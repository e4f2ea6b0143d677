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

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <queue>
#include <string>
#include <thread>
#include <vector>

#include "mlens/common/bytes.hpp"
#include "mlens/common/random.hpp"

namespace mlens::net {

/// IPv4 address and port, host byte order.
struct Endpoint {
  std::uint32_t address = 0;
  std::uint16_t port = 0;

  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

std::string to_string(const Endpoint& ep);

/// Milliseconds on the steady clock; the arrival stamp of real datagrams.
double steady_now_ms();

/// Parses "a.b.c.d:port" (or "localhost:port"). Throws InvalidArgument.
Endpoint parse_endpoint(const std::string& text);

struct Datagram {
  Endpoint from;
  Bytes data;
  double arrival_ms = 0.0;  // simulated clock, or steady_now_ms() on real links
};

/// Fire-and-forget datagram transport. send() never blocks on the network;
/// receive() waits at most `timeout` for the next datagram.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const Endpoint& to, Bytes data) = 0;
  virtual std::optional<Datagram> receive(std::chrono::milliseconds timeout) = 0;
  virtual Endpoint local_endpoint() const = 0;

  struct Counters {
    std::uint64_t sent = 0;
    std::uint64_t received = 0;
    std::uint64_t dropped = 0;
  };
  virtual Counters counters() const = 0;
};

/// Blocking-free UDP socket; a dedicated thread drains the socket into a
/// queue so the caller never waits on the kernel.
class UdpTransport final : public Transport {
 public:
  /// Binds to `bind` (port 0 picks an ephemeral port). Throws StartupError.
  explicit UdpTransport(const Endpoint& bind, std::size_t queue_limit = 256);
  ~UdpTransport() override;

  UdpTransport(const UdpTransport&) = delete;
  UdpTransport& operator=(const UdpTransport&) = delete;

  void send(const Endpoint& to, Bytes data) override;
  std::optional<Datagram> receive(std::chrono::milliseconds timeout) override;
  Endpoint local_endpoint() const override { return local_; }
  Counters counters() const override;

 private:
  void receive_loop();

  int fd_ = -1;
  Endpoint local_;
  std::size_t queue_limit_;
  std::atomic<bool> stop_{false};
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Datagram> queue_;
  Counters counters_;
  std::thread worker_;
};

/// Loss and delay applied independently to every datagram.
struct LinkModel {
  double drop = 0.0;
  double delay_ms = 0.0;
  double jitter_ms = 0.0;  // uniform in [-jitter, +jitter], total delay clamped at 0
  std::uint64_t seed = 1;
};

/// Parses "sim:<drop>,<delay_ms>,<jitter_ms>". Throws InvalidArgument.
LinkModel parse_link_model(const std::string& text);

/// In-process medium with a manually advanced clock. Every endpoint created
/// from it shares the clock and the link model, so runs are deterministic.
class SimNetwork : public std::enable_shared_from_this<SimNetwork> {
 public:
  explicit SimNetwork(LinkModel model);

  double now_ms() const;
  /// Time never moves backwards.
  void advance_to(double t_ms);

  std::unique_ptr<Transport> open(const Endpoint& ep);

  /// Schedules a datagram leaving `from` at time `t_ms` (>= now is not
  /// required, callers use it to model server compute time).
  void send_at(const Endpoint& from, const Endpoint& to, Bytes data, double t_ms);

  std::optional<Datagram> take_due(const Endpoint& at);
  std::optional<double> next_arrival(const Endpoint& at) const;

  Transport::Counters link_counters() const;

 private:
  struct Pending {
    double arrival_ms;
    std::uint64_t seq;
    Datagram datagram;
    bool operator>(const Pending& o) const {
      return arrival_ms != o.arrival_ms ? arrival_ms > o.arrival_ms : seq > o.seq;
    }
  };
  using Inbox = std::priority_queue<Pending, std::vector<Pending>, std::greater<>>;

  LinkModel model_;
  mutable std::mutex mu_;
  Rng rng_;
  double now_ = 0.0;
  std::uint64_t seq_ = 0;
  std::map<Endpoint, Inbox> inboxes_;
  Transport::Counters counters_;
};

/// Wraps a real transport with the same loss/delay model on a wall clock,
/// in both directions. Delayed datagrams are released by a timer thread.
class ImpairedTransport final : public Transport {
 public:
  ImpairedTransport(std::unique_ptr<Transport> inner, LinkModel model);
  ~ImpairedTransport() override;

  void send(const Endpoint& to, Bytes data) override;
  std::optional<Datagram> receive(std::chrono::milliseconds timeout) override;
  Endpoint local_endpoint() const override { return inner_->local_endpoint(); }
  Counters counters() const override;

 private:
  using Clock = std::chrono::steady_clock;
  struct Delayed {
    Clock::time_point due;
    std::uint64_t seq;
    bool outgoing;
    Endpoint peer;
    Bytes data;
    bool operator>(const Delayed& o) const { return due != o.due ? due > o.due : seq > o.seq; }
  };

  void pump_inner();
  void timer_loop();
  Clock::duration sample_delay();

  std::unique_ptr<Transport> inner_;
  LinkModel model_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  Rng rng_;
  std::uint64_t seq_ = 0;
  std::priority_queue<Delayed, std::vector<Delayed>, std::greater<>> delayed_;
  std::deque<Datagram> ready_;
  Counters counters_;
  std::atomic<bool> stop_{false};
  std::thread timer_;
  std::thread pump_;
};

}  // namespace mlens::net
