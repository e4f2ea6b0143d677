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

#include "mlens/server/server.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <optional>

#include "json.hpp"

#include "mlens/net/wire.hpp"

namespace mlens::server {

using Clock = std::chrono::steady_clock;

/// State shared by the network loop and every session.
struct Server::Shared {
  std::shared_ptr<const retrieval::ReferenceIndex> index;
  net::Transport* transport = nullptr;
  ServerConfig cfg;

  std::atomic<std::uint64_t> datagrams{0}, malformed{0}, requests{0}, preempted{0}, processed{0}, results_sent{0},
      queue_drops{0}, sessions_opened{0}, sessions_expired{0};

  std::mutex pause_mu;
  std::condition_variable pause_cv;
  bool paused = false;

  void log(const nlohmann::json& j) const {
    if (cfg.log) cfg.log(j.dump());
  }
};

namespace {

/// Bounded FIFO; push drops the oldest entry when full.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  /// Returns true when an old entry was dropped.
  bool push(T item) {
    std::lock_guard lock(mu_);
    bool dropped = false;
    if (items_.size() >= capacity_) {
      items_.pop_front();
      dropped = true;
    }
    items_.push_back(std::move(item));
    cv_.notify_one();
    return dropped;
  }

  std::optional<T> pop(const std::atomic<bool>& stop) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return stop.load() || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    return item;
  }

  void wake() {
    std::lock_guard lock(mu_);
    cv_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> items_;
};

}  // namespace

class ClientSession {
 public:
  ClientSession(net::Endpoint client, std::shared_ptr<Server::Shared> shared)
      : client_(client),
        shared_(std::move(shared)),
        inbox_(shared_->cfg.queue_capacity),
        outbox_(shared_->cfg.queue_capacity),
        last_seen_(Clock::now()) {
    receive_ = std::thread([this] { receive_stage(); });
    process_ = std::thread([this] { process_stage(); });
    send_ = std::thread([this] { send_stage(); });
  }

  ~ClientSession() {
    stop_ = true;
    inbox_.wake();
    outbox_.wake();
    {
      std::lock_guard lock(pending_mu_);
      pending_cv_.notify_all();
    }
    {
      std::lock_guard lock(shared_->pause_mu);
      shared_->pause_cv.notify_all();
    }
    receive_.join();
    process_.join();
    send_.join();
  }

  void deliver(Bytes data) {
    {
      std::lock_guard lock(seen_mu_);
      last_seen_ = Clock::now();
    }
    if (inbox_.push(std::move(data))) ++shared_->queue_drops;
  }

  Clock::time_point last_seen() const {
    std::lock_guard lock(seen_mu_);
    return last_seen_;
  }

 private:
  void receive_stage() {
    while (auto data = inbox_.pop(stop_)) {
      net::RecognitionRequest req;
      try {
        req = net::decode_request(*data);
      } catch (const Error&) {
        ++shared_->malformed;
        continue;
      }
      ++shared_->requests;
      std::lock_guard lock(pending_mu_);
      if (pending_) ++shared_->preempted;
      pending_ = std::move(req);
      pending_cv_.notify_one();
    }
  }

  void process_stage() {
    for (;;) {
      {
        std::unique_lock lock(shared_->pause_mu);
        shared_->pause_cv.wait(lock, [&] { return stop_.load() || !shared_->paused; });
      }
      net::RecognitionRequest req;
      {
        std::unique_lock lock(pending_mu_);
        pending_cv_.wait(lock, [&] { return stop_.load() || pending_.has_value(); });
        if (stop_) return;
        req = std::move(*pending_);
        pending_.reset();
      }
      RecognitionOutcome outcome;
      const auto t0 = Clock::now();
      try {
        outcome = recognize_request(*shared_->index, req, shared_->cfg.recognize);
      } catch (const Error&) {
        ++shared_->malformed;
        continue;
      }
      const double wall = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
      ++shared_->processed;

      net::ResultMessage res = make_result(outcome, req.client_nonce, object_ids_);
      if (outbox_.push(std::move(res))) ++shared_->queue_drops;

      const auto& tm = outcome.timings;
      shared_->log({{"event", "request"},
                    {"client", net::to_string(client_)},
                    {"cycle", req.cycle_id},
                    {"parse_ms", tm.parse_ms},
                    {"segment_ms", tm.segment_ms},
                    {"encode_ms", tm.encode_ms},
                    {"knn_ms", tm.knn_ms},
                    {"verify_ms", tm.verify_ms},
                    {"total_ms", wall},
                    {"patches", outcome.patches},
                    {"recognized", outcome.recognized.size()}});
    }
  }

  void send_stage() {
    while (auto res = outbox_.pop(stop_)) {
      shared_->transport->send(client_, net::encode_result(*res));
      ++shared_->results_sent;
    }
  }

  net::Endpoint client_;
  std::shared_ptr<Server::Shared> shared_;
  std::atomic<bool> stop_{false};
  BoundedQueue<Bytes> inbox_;
  BoundedQueue<net::ResultMessage> outbox_;
  std::mutex pending_mu_;
  std::condition_variable pending_cv_;
  std::optional<net::RecognitionRequest> pending_;
  ObjectIds object_ids_;  // process stage only
  mutable std::mutex seen_mu_;
  Clock::time_point last_seen_;
  std::thread receive_, process_, send_;
};

Server::Server(std::shared_ptr<const retrieval::ReferenceIndex> index, std::unique_ptr<net::Transport> transport,
               ServerConfig cfg)
    : shared_(std::make_shared<Shared>()), transport_(std::move(transport)) {
  require(index != nullptr && transport_ != nullptr, ErrorCode::InvalidArgument, "server needs an index and a transport");
  require(cfg.queue_capacity >= 1, ErrorCode::InvalidArgument, "queue capacity must be positive");
  shared_->index = std::move(index);
  shared_->transport = transport_.get();
  shared_->cfg = std::move(cfg);
}

Server::~Server() { stop(); }

void Server::start() {
  if (running_.exchange(true)) return;
  network_ = std::thread([this] { network_loop(); });
}

void Server::stop() {
  if (!running_.exchange(false)) return;
  network_.join();
  std::lock_guard lock(sessions_mu_);
  sessions_.clear();
}

void Server::set_processing_paused(bool paused) {
  std::lock_guard lock(shared_->pause_mu);
  shared_->paused = paused;
  shared_->pause_cv.notify_all();
}

ServerStats Server::stats() const {
  const Shared& s = *shared_;
  return {s.datagrams, s.malformed, s.requests, s.preempted, s.processed, s.results_sent, s.queue_drops,
          s.sessions_opened, s.sessions_expired};
}

std::size_t Server::session_count() const {
  std::lock_guard lock(sessions_mu_);
  return sessions_.size();
}

void Server::network_loop() {
  const auto idle = std::chrono::duration<double>(shared_->cfg.session_idle_s);
  const auto stats_every = std::chrono::duration<double>(shared_->cfg.stats_interval_s);
  auto next_stats = Clock::now() + stats_every;
  auto next_sweep = Clock::now() + std::chrono::milliseconds(200);
  while (running_) {
    if (auto dg = transport_->receive(std::chrono::milliseconds(20))) {
      ++shared_->datagrams;
      const auto type = net::peek_type(dg->data);
      if (!type || *type != net::MessageType::Request) {
        ++shared_->malformed;
      } else {
        std::lock_guard lock(sessions_mu_);
        auto it = sessions_.find(dg->from);
        if (it == sessions_.end()) {
          it = sessions_.emplace(dg->from, std::make_unique<ClientSession>(dg->from, shared_)).first;
          ++shared_->sessions_opened;
          shared_->log({{"event", "session_open"}, {"client", net::to_string(dg->from)}});
        }
        it->second->deliver(std::move(dg->data));
      }
    }
    const auto now = Clock::now();
    if (now >= next_sweep) {
      next_sweep = now + std::chrono::milliseconds(200);
      std::vector<std::unique_ptr<ClientSession>> closing;
      {
        std::lock_guard lock(sessions_mu_);
        for (auto it = sessions_.begin(); it != sessions_.end();) {
          if (now - it->second->last_seen() > idle) {
            shared_->log({{"event", "session_expired"}, {"client", net::to_string(it->first)}});
            closing.push_back(std::move(it->second));
            it = sessions_.erase(it);
            ++shared_->sessions_expired;
          } else {
            ++it;
          }
        }
      }
    }
    if (shared_->cfg.stats_interval_s > 0 && now >= next_stats) {
      next_stats = now + std::chrono::duration_cast<Clock::duration>(stats_every);
      const ServerStats s = stats();
      shared_->log({{"event", "stats"},
                    {"datagrams", s.datagrams},
                    {"malformed", s.malformed},
                    {"requests", s.requests},
                    {"preempted", s.preempted},
                    {"processed", s.processed},
                    {"results_sent", s.results_sent},
                    {"queue_drops", s.queue_drops},
                    {"sessions", session_count()}});
    }
  }
}

void serve(std::shared_ptr<const retrieval::ReferenceIndex> index, const net::Endpoint& bind, ServerConfig cfg,
           const std::atomic<bool>& stop) {
  Server server(std::move(index), std::make_unique<net::UdpTransport>(bind), std::move(cfg));
  server.start();
  while (!stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
}

}  // namespace mlens::server
