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
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "mlens/index/reference_index.hpp"
#include "mlens/net/transport.hpp"
#include "mlens/server/pipeline.hpp"

namespace mlens::server {

struct ServerConfig {
  RecognizeConfig recognize;
  /// Bound of every per-session queue; the oldest entry is dropped.
  std::size_t queue_capacity = 8;
  double session_idle_s = 30.0;
  /// Emit a stats record this often (0 disables).
  double stats_interval_s = 0.0;
  /// Receives one JSON object per line: per-request timings and stats.
  std::function<void(const std::string&)> log;
};

struct ServerStats {
  std::uint64_t datagrams = 0;
  std::uint64_t malformed = 0;
  std::uint64_t requests = 0;   ///< decoded requests
  std::uint64_t preempted = 0;  ///< replaced by a newer request before processing
  std::uint64_t processed = 0;
  std::uint64_t results_sent = 0;
  std::uint64_t queue_drops = 0;
  std::uint64_t sessions_opened = 0;
  std::uint64_t sessions_expired = 0;
};

class ClientSession;

/// Recognition server: one session per client address, each running a
/// receive (decode), process (recognize) and send (encode) stage on its own
/// thread, linked by bounded queues. A newer request replaces one still
/// waiting for the process stage. Sessions idle for session_idle_s are
/// closed. The index is shared read-only.
class Server {
 public:
  Server(std::shared_ptr<const retrieval::ReferenceIndex> index, std::unique_ptr<net::Transport> transport,
         ServerConfig cfg = {});
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  void start();
  void stop();

  net::Endpoint endpoint() const { return transport_->local_endpoint(); }
  ServerStats stats() const;
  std::size_t session_count() const;

  /// Holds every process stage before it takes its next request. Testing
  /// and benchmarking aid.
  void set_processing_paused(bool paused);

  struct Shared;

 private:
  void network_loop();

  std::shared_ptr<Shared> shared_;
  std::unique_ptr<net::Transport> transport_;
  std::map<net::Endpoint, std::unique_ptr<ClientSession>> sessions_;
  mutable std::mutex sessions_mu_;
  std::atomic<bool> running_{false};
  std::thread network_;
};

/// Binds a UDP server and runs it until `stop` becomes true. Throws
/// StartupError when the endpoint cannot be bound.
void serve(std::shared_ptr<const retrieval::ReferenceIndex> index, const net::Endpoint& bind, ServerConfig cfg,
           const std::atomic<bool>& stop);

}  // namespace mlens::server
