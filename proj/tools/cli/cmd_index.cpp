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

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <thread>

#include "common.hpp"
#include "mlens/common/error.hpp"

namespace mlens::cli {
namespace {

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop = true; }

struct GenReferencesOpts {
  std::string out;
  std::size_t count = 100;
  std::uint64_t seed = 1000;
};

void gen_references(const GenReferencesOpts& o) {
  const auto refs = synthetic_references(o.count, o.seed);
  write_references(o.out, refs);
  std::printf("wrote %zu posters to %s\n", refs.images.size(), o.out.c_str());
}

struct BuildOpts {
  std::string images;
  std::string out;
  retrieval::IndexBuildConfig cfg;
};

void build_index_cmd(const BuildOpts& o) {
  const auto built = harness::build_index_from_directory(o.images, o.cfg);
  built.index.save(o.out);
  const auto& r = built.report;
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << build_report_json(r).dump() << "\n";
  std::printf("describe: %zu images, %zu descriptors (%.1f s), %zu skipped\n", r.images, r.descriptors,
              r.describe_ms / 1000.0, r.skipped);
  std::printf("train:    K=%zu, %d EM iterations (%.1f s)\n", r.components, r.em_iterations, r.train_ms / 1000.0);
  std::printf("encode:   %zu fisher vectors (%.1f s)\n", built.index.size(), r.encode_ms / 1000.0);
  std::printf("lsh:      %.1f s\n", r.lsh_ms / 1000.0);
  std::printf("wrote %s\n", o.out.c_str());
}

struct ServeOpts {
  std::string index;
  std::string bind = "0.0.0.0:7700";
  server::ServerConfig cfg;
};

void serve_cmd(ServeOpts& o) {
  auto index = load_index(o.index);
  std::mutex out_mu;
  o.cfg.log = [&out_mu](const std::string& line) {
    std::lock_guard lock(out_mu);
    std::cout << line << std::endl;
  };
  server::Server srv(index, std::make_unique<net::UdpTransport>(net::parse_endpoint(o.bind)), o.cfg);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  srv.start();
  {
    std::lock_guard lock(out_mu);
    std::cerr << "serving " << index->size() << " references on " << net::to_string(srv.endpoint())
              << " (Ctrl-C to stop)" << std::endl;
  }
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  srv.stop();
  const auto s = srv.stats();
  std::cout << json{{"event", "shutdown"},
                    {"datagrams", s.datagrams},
                    {"malformed", s.malformed},
                    {"requests", s.requests},
                    {"preempted", s.preempted},
                    {"processed", s.processed},
                    {"results_sent", s.results_sent},
                    {"queue_drops", s.queue_drops},
                    {"sessions_opened", s.sessions_opened}}
                   .dump()
            << std::endl;
  std::fprintf(stderr, "stopped: %llu requests, %llu processed, %llu results sent, %llu malformed datagrams\n",
               static_cast<unsigned long long>(s.requests), static_cast<unsigned long long>(s.processed),
               static_cast<unsigned long long>(s.results_sent), static_cast<unsigned long long>(s.malformed));
}

}  // namespace

void add_index_commands(CLI::App& app) {
  {
    auto o = std::make_shared<GenReferencesOpts>();
    auto* cmd = app.add_subcommand("gen-references", "Write procedural posters to use as reference images");
    cmd->add_option("--out", o->out, "Output directory")->required();
    cmd->add_option("--count", o->count, "Number of posters")->capture_default_str();
    cmd->add_option("--seed", o->seed, "Seed of the first poster")->capture_default_str();
    cmd->callback([o] { gen_references(*o); });
  }
  {
    auto o = std::make_shared<BuildOpts>();
    auto* cmd = app.add_subcommand("build-index", "Describe reference images and write an index file");
    cmd->add_option("--images", o->images, "Directory of reference images; filenames become names")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd->add_option("--out", o->out, "Index file to write")->required();
    cmd->add_option("--components", o->cfg.components, "Mixture components K")->capture_default_str();
    cmd->add_option("--em-iterations", o->cfg.em.max_iters)->capture_default_str();
    cmd->add_option("--em-seed", o->cfg.em.seed)->capture_default_str();
    cmd->add_option("--lsh-tables", o->cfg.lsh.tables)->capture_default_str();
    cmd->add_option("--lsh-bits", o->cfg.lsh.bits)->capture_default_str();
    cmd->add_option("--lsh-seed", o->cfg.lsh.seed)->capture_default_str();
    cmd->callback([o] { build_index_cmd(*o); });
  }
  {
    auto o = std::make_shared<ServeOpts>();
    auto* cmd = app.add_subcommand("serve", "Run the recognition server over UDP");
    cmd->add_option("--index", o->index, "Index file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--bind", o->bind, "addr:port to listen on")->capture_default_str();
    add_recognize_options(cmd, o->cfg.recognize);
    cmd->add_option("--stats-interval", o->cfg.stats_interval_s, "Seconds between stats records (0 = off)")
        ->capture_default_str();
    cmd->add_option("--queue", o->cfg.queue_capacity, "Per-session queue bound")->capture_default_str();
    cmd->add_option("--session-idle", o->cfg.session_idle_s, "Seconds before an idle session closes")
        ->capture_default_str();
    cmd->add_option("--seed", o->cfg.recognize.seed, "Verification RANSAC seed")->capture_default_str();
    cmd->callback([o] { serve_cmd(*o); });
  }
}

}  // namespace mlens::cli
