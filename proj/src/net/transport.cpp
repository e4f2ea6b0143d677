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

#include "mlens/net/transport.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <charconv>
#include <sstream>

#include "mlens/common/error.hpp"

namespace mlens::net {
namespace {

sockaddr_in to_sockaddr(const Endpoint& ep) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_addr.s_addr = htonl(ep.address);
  sa.sin_port = htons(ep.port);
  return sa;
}

Endpoint from_sockaddr(const sockaddr_in& sa) { return {ntohl(sa.sin_addr.s_addr), ntohs(sa.sin_port)}; }

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::InvalidArgument, std::string("cannot parse ") + what + " from '" + s + "'");
}

}  // namespace

double steady_now_ms() {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::string to_string(const Endpoint& ep) {
  std::ostringstream os;
  os << ((ep.address >> 24) & 0xff) << '.' << ((ep.address >> 16) & 0xff) << '.' << ((ep.address >> 8) & 0xff) << '.'
     << (ep.address & 0xff) << ':' << ep.port;
  return os.str();
}

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) fail(ErrorCode::InvalidArgument, "endpoint needs host:port: '" + text + "'");
  std::string host = text.substr(0, colon);
  const std::string port_s = text.substr(colon + 1);
  unsigned port = 0;
  auto [ptr, ec] = std::from_chars(port_s.data(), port_s.data() + port_s.size(), port);
  if (ec != std::errc{} || ptr != port_s.data() + port_s.size() || port > 65535)
    fail(ErrorCode::InvalidArgument, "bad port in '" + text + "'");
  if (host.empty() || host == "*") host = "0.0.0.0";
  if (host == "localhost") host = "127.0.0.1";
  in_addr addr{};
  if (inet_pton(AF_INET, host.c_str(), &addr) != 1) fail(ErrorCode::InvalidArgument, "bad IPv4 address '" + host + "'");
  return {ntohl(addr.s_addr), static_cast<std::uint16_t>(port)};
}

// ---- UDP -----------------------------------------------------------------

UdpTransport::UdpTransport(const Endpoint& bind_ep, std::size_t queue_limit) : queue_limit_(queue_limit) {
  fd_ = ::socket(AF_INET, SOCK_DGRAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
  if (fd_ < 0) fail(ErrorCode::StartupError, std::string("socket: ") + std::strerror(errno));
  int buf = 4 << 20;
  ::setsockopt(fd_, SOL_SOCKET, SO_RCVBUF, &buf, sizeof(buf));
  ::setsockopt(fd_, SOL_SOCKET, SO_SNDBUF, &buf, sizeof(buf));
  auto sa = to_sockaddr(bind_ep);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
    const std::string msg = std::strerror(errno);
    ::close(fd_);
    fail(ErrorCode::StartupError, "bind " + to_string(bind_ep) + ": " + msg);
  }
  socklen_t len = sizeof(sa);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&sa), &len);
  local_ = from_sockaddr(sa);
  if (local_.address == 0) local_.address = 0x7f000001;
  worker_ = std::thread([this] { receive_loop(); });
}

UdpTransport::~UdpTransport() {
  stop_ = true;
  if (worker_.joinable()) worker_.join();
  ::close(fd_);
}

void UdpTransport::send(const Endpoint& to, Bytes data) {
  auto sa = to_sockaddr(to);
  const auto n = ::sendto(fd_, data.data(), data.size(), MSG_DONTWAIT, reinterpret_cast<sockaddr*>(&sa), sizeof(sa));
  std::lock_guard lock(mu_);
  if (n == static_cast<ssize_t>(data.size()))
    ++counters_.sent;
  else
    ++counters_.dropped;
}

void UdpTransport::receive_loop() {
  std::vector<std::uint8_t> buf(65536);
  while (!stop_) {
    pollfd pfd{fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 20) <= 0) continue;
    for (;;) {
      sockaddr_in sa{};
      socklen_t len = sizeof(sa);
      const auto n = ::recvfrom(fd_, buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&sa), &len);
      if (n < 0) break;
      Datagram d{from_sockaddr(sa), Bytes(buf.begin(), buf.begin() + n), steady_now_ms()};
      {
        std::lock_guard lock(mu_);
        if (queue_.size() >= queue_limit_) {
          queue_.pop_front();
          ++counters_.dropped;
        }
        queue_.push_back(std::move(d));
        ++counters_.received;
      }
      cv_.notify_one();
    }
  }
}

std::optional<Datagram> UdpTransport::receive(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout, [&] { return !queue_.empty(); })) return std::nullopt;
  Datagram d = std::move(queue_.front());
  queue_.pop_front();
  return d;
}

Transport::Counters UdpTransport::counters() const {
  std::lock_guard lock(mu_);
  return counters_;
}

// ---- link model ----------------------------------------------------------

LinkModel parse_link_model(const std::string& text) {
  const std::string prefix = "sim:";
  if (text.rfind(prefix, 0) != 0) fail(ErrorCode::InvalidArgument, "network model must start with 'sim:'");
  std::vector<std::string> parts;
  std::stringstream ss(text.substr(prefix.size()));
  for (std::string item; std::getline(ss, item, ',');) parts.push_back(item);
  if (parts.size() != 3) fail(ErrorCode::InvalidArgument, "expected sim:<drop>,<delay_ms>,<jitter_ms>");
  LinkModel m;
  m.drop = parse_double(parts[0], "drop probability");
  m.delay_ms = parse_double(parts[1], "delay");
  m.jitter_ms = parse_double(parts[2], "jitter");
  if (m.drop < 0 || m.drop > 1 || m.delay_ms < 0 || m.jitter_ms < 0)
    fail(ErrorCode::InvalidArgument, "network model values out of range");
  return m;
}

// ---- simulated medium ----------------------------------------------------

namespace {

class SimTransport final : public Transport {
 public:
  SimTransport(std::shared_ptr<SimNetwork> net, Endpoint ep) : net_(std::move(net)), ep_(ep) {}

  void send(const Endpoint& to, Bytes data) override {
    net_->send_at(ep_, to, std::move(data), net_->now_ms());
    ++counters_.sent;
  }

  std::optional<Datagram> receive(std::chrono::milliseconds) override {
    auto d = net_->take_due(ep_);
    if (d) ++counters_.received;
    return d;
  }

  Endpoint local_endpoint() const override { return ep_; }
  Counters counters() const override { return counters_; }

 private:
  std::shared_ptr<SimNetwork> net_;
  Endpoint ep_;
  Counters counters_;
};

}  // namespace

SimNetwork::SimNetwork(LinkModel model) : model_(model), rng_(model.seed) {}

double SimNetwork::now_ms() const {
  std::lock_guard lock(mu_);
  return now_;
}

void SimNetwork::advance_to(double t_ms) {
  std::lock_guard lock(mu_);
  now_ = std::max(now_, t_ms);
}

std::unique_ptr<Transport> SimNetwork::open(const Endpoint& ep) {
  {
    std::lock_guard lock(mu_);
    if (inboxes_.count(ep)) fail(ErrorCode::StartupError, "simulated endpoint already bound: " + to_string(ep));
    inboxes_[ep];
  }
  return std::make_unique<SimTransport>(shared_from_this(), ep);
}

void SimNetwork::send_at(const Endpoint& from, const Endpoint& to, Bytes data, double t_ms) {
  std::lock_guard lock(mu_);
  ++counters_.sent;
  // Both draws happen for every datagram so the random stream does not
  // depend on which datagrams were dropped.
  const bool drop = rng_.bernoulli(model_.drop);
  const double jitter = model_.jitter_ms > 0 ? rng_.uniform(-model_.jitter_ms, model_.jitter_ms) : 0.0;
  auto it = inboxes_.find(to);
  if (drop || it == inboxes_.end()) {
    ++counters_.dropped;
    return;
  }
  const double arrival = t_ms + std::max(0.0, model_.delay_ms + jitter);
  it->second.push(Pending{arrival, seq_++, Datagram{from, std::move(data), arrival}});
}

std::optional<Datagram> SimNetwork::take_due(const Endpoint& at) {
  std::lock_guard lock(mu_);
  auto it = inboxes_.find(at);
  if (it == inboxes_.end() || it->second.empty() || it->second.top().arrival_ms > now_) return std::nullopt;
  Datagram d = it->second.top().datagram;
  it->second.pop();
  ++counters_.received;
  return d;
}

std::optional<double> SimNetwork::next_arrival(const Endpoint& at) const {
  std::lock_guard lock(mu_);
  auto it = inboxes_.find(at);
  if (it == inboxes_.end() || it->second.empty()) return std::nullopt;
  return it->second.top().arrival_ms;
}

Transport::Counters SimNetwork::link_counters() const {
  std::lock_guard lock(mu_);
  return counters_;
}

// ---- impaired real transport ---------------------------------------------

ImpairedTransport::ImpairedTransport(std::unique_ptr<Transport> inner, LinkModel model)
    : inner_(std::move(inner)), model_(model), rng_(model.seed) {
  timer_ = std::thread([this] { timer_loop(); });
  pump_ = std::thread([this] { pump_inner(); });
}

ImpairedTransport::~ImpairedTransport() {
  stop_ = true;
  cv_.notify_all();
  if (pump_.joinable()) pump_.join();
  if (timer_.joinable()) timer_.join();
}

ImpairedTransport::Clock::duration ImpairedTransport::sample_delay() {
  const double jitter = model_.jitter_ms > 0 ? rng_.uniform(-model_.jitter_ms, model_.jitter_ms) : 0.0;
  const double ms = std::max(0.0, model_.delay_ms + jitter);
  return std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double, std::milli>(ms));
}

void ImpairedTransport::send(const Endpoint& to, Bytes data) {
  {
    std::lock_guard lock(mu_);
    ++counters_.sent;
    const bool drop = rng_.bernoulli(model_.drop);
    const auto delay = sample_delay();
    if (drop) {
      ++counters_.dropped;
      return;
    }
    delayed_.push(Delayed{Clock::now() + delay, seq_++, true, to, std::move(data)});
  }
  cv_.notify_all();
}

void ImpairedTransport::pump_inner() {
  while (!stop_) {
    auto d = inner_->receive(std::chrono::milliseconds(20));
    if (!d) continue;
    {
      std::lock_guard lock(mu_);
      const bool drop = rng_.bernoulli(model_.drop);
      const auto delay = sample_delay();
      if (drop) {
        ++counters_.dropped;
        continue;
      }
      delayed_.push(Delayed{Clock::now() + delay, seq_++, false, d->from, std::move(d->data)});
    }
    cv_.notify_all();
  }
}

void ImpairedTransport::timer_loop() {
  std::unique_lock lock(mu_);
  while (!stop_) {
    if (delayed_.empty()) {
      cv_.wait_for(lock, std::chrono::milliseconds(50));
      continue;
    }
    const auto due = delayed_.top().due;
    if (Clock::now() < due) {
      cv_.wait_until(lock, due);
      continue;
    }
    Delayed item = delayed_.top();
    delayed_.pop();
    if (item.outgoing) {
      lock.unlock();
      inner_->send(item.peer, std::move(item.data));
      lock.lock();
    } else {
      ready_.push_back(Datagram{item.peer, std::move(item.data), steady_now_ms()});
      ++counters_.received;
      cv_.notify_all();
    }
  }
}

std::optional<Datagram> ImpairedTransport::receive(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout, [&] { return !ready_.empty() || stop_.load(); }) || ready_.empty())
    return std::nullopt;
  Datagram d = std::move(ready_.front());
  ready_.pop_front();
  return d;
}

Transport::Counters ImpairedTransport::counters() const {
  std::lock_guard lock(mu_);
  return counters_;
}

}  // namespace mlens::net
