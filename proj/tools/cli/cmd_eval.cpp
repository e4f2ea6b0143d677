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

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>

#include "common.hpp"
#include "mlens/common/error.hpp"
#include "mlens/common/random.hpp"
#include "mlens/harness/scene.hpp"

namespace mlens::cli {
namespace {

/// Index and the reference images it was built from.
struct CorpusOpts {
  std::string index;
  std::string references;
  std::size_t posters = 100;
  std::uint64_t seed = 1000;
};

void add_corpus_options(CLI::App* cmd, CorpusOpts& o) {
  cmd->add_option("--index", o.index, "Index file (default: built from the references)");
  cmd->add_option("--references", o.references, "Reference images the index was built from");
  cmd->add_option("--posters", o.posters, "Procedural posters when --references is absent")->capture_default_str();
  cmd->add_option("--poster-seed", o.seed, "Seed of the first procedural poster")->capture_default_str();
}

struct Corpus {
  References refs;
  std::shared_ptr<const retrieval::ReferenceIndex> index;
  /// Index id of refs.images[i].
  std::vector<std::uint32_t> ids;
};

Corpus load_corpus(const CorpusOpts& o) {
  Corpus c;
  c.refs = o.references.empty() ? synthetic_references(o.posters, o.seed) : load_references(o.references);
  c.index = o.index.empty() ? build_index(c.refs) : load_index(o.index);
  c.ids = ids_for_names(*c.index, c.refs.names);
  return c;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

struct RetrievalOpts {
  CorpusOpts corpus;
  std::string distractors;
  std::size_t distractor_count = 0;
  harness::QuerySetConfig queries;
  std::string resolutions = "100,200,400";
  std::string segmentation = "both";
  harness::RetrievalEvalConfig cfg;
  std::string out;
};

void eval_retrieval_cmd(RetrievalOpts& o) {
  const Corpus c = load_corpus(o.corpus);
  std::vector<ImageGray8> distractors;
  if (!o.distractors.empty()) distractors = load_references(o.distractors).images;
  for (std::size_t i = 0; i < o.distractor_count; ++i) distractors.push_back(harness::make_sized_poster(900000 + i));
  require(o.queries.multi == 0 || o.queries.distractors_per_multi == 0 || !distractors.empty(),
          ErrorCode::InvalidArgument, "multi-target queries need --distractors or --distractor-count");

  auto queries = harness::make_query_set(c.refs.images, distractors, o.queries);
  for (auto& q : queries)
    for (auto& l : q.labels) l = c.ids[l];
  o.cfg.resolutions = parse_int_list(o.resolutions);

  std::vector<bool> modes;
  if (o.segmentation == "on" || o.segmentation == "both") modes.push_back(true);
  if (o.segmentation == "off" || o.segmentation == "both") modes.push_back(false);
  require(!modes.empty(), ErrorCode::InvalidArgument, "--segmentation takes on, off or both");

  Report out(o.out);
  auto& os = out.summary();
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu queries against %zu references\n", queries.size(), c.index->size());
  os << buf << "  res  seg   top1   top2   top3   top4   top5    mAP  ms/query\n";
  for (bool seg : modes) {
    o.cfg.segmentation = seg;
    for (const auto& row : harness::eval_retrieval(*c.index, queries, o.cfg)) {
      out.record({{"record", "retrieval"},
                  {"resolution", row.resolution},
                  {"segmentation", row.segmentation},
                  {"top_k", row.top_k},
                  {"map", row.map},
                  {"k", o.cfg.k},
                  {"queries", row.queries},
                  {"ms_per_query", row.ms_per_query}});
      std::snprintf(buf, sizeof(buf), "%5d  %-3s %6.3f %6.3f %6.3f %6.3f %6.3f %6.3f %9.1f\n", row.resolution,
                    seg ? "on" : "off", row.top_k[0], row.top_k[1], row.top_k[2], row.top_k[3], row.top_k[4],
                    row.map, row.ms_per_query);
      os << buf;
    }
  }
}

struct LatencyOpts {
  CorpusOpts corpus;
  std::string frames;
  std::string sequence;
  int frame_count = 10;
  std::string net = "loopback";
  std::uint64_t link_seed = 1;
  std::string codec = "jpeg";
  double fps = 30;
  harness::LatencyEvalConfig cfg;
  std::string out;
};

/// Frames showing one or two references side by side with mild noise.
std::vector<ImageGray8> render_frames(const References& refs, int count) {
  const harness::SceneRenderer renderer(refs.images);
  Rng rng(4);
  std::vector<ImageGray8> frames;
  for (int i = 0; i < count; ++i) {
    const std::size_t n = 1 + i % 2;
    std::vector<std::size_t> which;
    for (std::size_t k = 0; k < n; ++k) which.push_back(rng.below(refs.images.size()));
    std::vector<Homography> place;
    for (const auto& pl : side_by_side(refs, which, 640, 360, 200)) place.push_back(pl.to_frame);
    harness::RenderOptions ro;
    ro.noise_sigma = 2.0;
    frames.push_back(renderer.render(which, place, ro, static_cast<std::uint64_t>(i)));
  }
  return frames;
}

net::Codec parse_codec(const std::string& name) {
  if (name == "jpeg") return net::Codec::Jpeg;
  if (name == "deflate") return net::Codec::Deflate;
  if (name == "raw") return net::Codec::Raw;
  fail(ErrorCode::InvalidArgument, "--codec takes jpeg, deflate or raw");
}

void eval_latency_cmd(LatencyOpts& o) {
  require(o.fps > 0, ErrorCode::InvalidArgument, "--fps must be positive");
  const auto net = parse_net(o.net, o.link_seed);
  o.cfg.transport = net.kind;
  o.cfg.link = net.link;
  o.cfg.codec.codec = parse_codec(o.codec);
  const Corpus c = load_corpus(o.corpus);
  std::vector<ImageGray8> frames;
  if (!o.frames.empty())
    frames = load_references(o.frames).images;
  else if (!o.sequence.empty())
    frames = harness::read_sequence(o.sequence).frames;
  else
    frames = render_frames(c.refs, o.frame_count);

  o.cfg.frame_period_ms = 1000.0 / o.fps;
  const auto rep = harness::eval_latency(c.index, frames, o.cfg);

  Report out(o.out);
  for (std::size_t i = 0; i < rep.latency_ms.size(); ++i) {
    const bool lost = std::isnan(rep.latency_ms[i]);
    json rec{{"record", "task"}, {"task", i}, {"lost", lost}, {"request_bytes", rep.request_bytes[i]}};
    if (!lost) {
      rec["latency_ms"] = rep.latency_ms[i];
      rec["frames_passed"] = rep.frames_passed[i];
    }
    out.record(rec);
  }
  std::map<int, std::size_t> histogram;
  for (std::size_t i = 0; i < rep.latency_ms.size(); ++i)
    if (!std::isnan(rep.latency_ms[i])) ++histogram[rep.frames_passed[i]];
  json hist = json::object();
  for (const auto& [f, n] : histogram) hist[std::to_string(f)] = n;
  const double cycle_ms = o.cfg.frame_period_ms * 30;
  json summary{{"record", "summary"},
              {"tasks", rep.latency_ms.size()},
              {"completed", rep.completed},
              {"lost", rep.lost},
              {"median_ms", number_or_null(rep.percentile(0.5))},
              {"p97_ms", number_or_null(rep.percentile(0.97))},
              {"max_ms", number_or_null(rep.percentile(1.0))},
              {"within_500ms", rep.fraction_within(500.0)},
              {"within_cycle", rep.fraction_within(cycle_ms)},
              {"frames_passed", hist}};
  if (o.cfg.transport == harness::TransportKind::Loopback)
    summary["server_ms"] = {{"parse", rep.parse_ms},     {"segment", rep.segment_ms}, {"encode", rep.encode_ms},
                            {"knn", rep.knn_ms},         {"verify", rep.verify_ms},   {"total", rep.server_total_ms}};
  out.record(summary);

  auto& os = out.summary();
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu tasks: %zu completed, %zu lost\n", rep.latency_ms.size(), rep.completed,
                rep.lost);
  os << buf;
  std::snprintf(buf, sizeof(buf), "  latency: median %.1f ms, p97 %.1f ms, max %.1f ms\n", rep.percentile(0.5),
                rep.percentile(0.97), rep.percentile(1.0));
  os << buf;
  std::snprintf(buf, sizeof(buf), "  within 500 ms: %.1f%%, within one cycle: %.1f%%\n",
                100 * rep.fraction_within(500.0), 100 * rep.fraction_within(cycle_ms));
  os << buf;
  os << "  frames passed:";
  for (const auto& [f, n] : histogram) os << " " << f << ":" << n;
  os << "\n";
  if (o.cfg.transport == harness::TransportKind::Loopback) {
    std::snprintf(buf, sizeof(buf),
                  "  server stages: parse %.1f, segment %.1f, encode %.1f, knn %.2f, verify %.1f, total %.1f ms\n",
                  rep.parse_ms, rep.segment_ms, rep.encode_ms, rep.knn_ms, rep.verify_ms, rep.server_total_ms);
    os << buf;
  }
}

}  // namespace

void add_eval_commands(CLI::App& app) {
  {
    auto o = std::make_shared<RetrievalOpts>();
    auto* cmd = app.add_subcommand("eval-retrieval", "Top-k accuracy and mAP of warped queries");
    add_corpus_options(cmd, o->corpus);
    cmd->add_option("--distractors", o->distractors, "Directory of images that are not indexed");
    cmd->add_option("--distractor-count", o->distractor_count, "Procedural distractor posters")
        ->capture_default_str();
    cmd->add_option("--single", o->queries.single, "Frames with one indexed reference")->capture_default_str();
    cmd->add_option("--multi", o->queries.multi, "Frames with several references")->capture_default_str();
    cmd->add_option("--targets", o->queries.targets_per_multi, "Indexed references per multi frame")
        ->capture_default_str();
    cmd->add_option("--distractors-per-frame", o->queries.distractors_per_multi)->capture_default_str();
    cmd->add_option("--max-angle", o->queries.max_angle_deg, "Largest tilt and roll (degrees)")
        ->capture_default_str();
    cmd->add_option("--query-noise", o->queries.noise_sigma)->capture_default_str();
    cmd->add_option("--query-seed", o->queries.seed)->capture_default_str();
    cmd->add_option("--resolutions", o->resolutions, "Patch sides, comma separated")->capture_default_str();
    cmd->add_option("--segmentation", o->segmentation, "on, off or both")->capture_default_str();
    add_seg_options(cmd, o->cfg.seg);
    cmd->add_option("--k", o->cfg.k, "Ranking depth for mAP")->capture_default_str();
    cmd->add_option("--out", o->out, "JSON lines file (default: stdout)");
    cmd->callback([o] { eval_retrieval_cmd(*o); });
  }
  {
    auto o = std::make_shared<LatencyOpts>();
    o->corpus.seed = 7000;
    auto* cmd = app.add_subcommand("eval-latency", "Offloading latency of sequential recognition tasks");
    add_corpus_options(cmd, o->corpus);
    auto* frames = cmd->add_option("--frames", o->frames, "Directory of frames to send");
    auto* seq = cmd->add_option("--sequence", o->sequence, "Send the frames of a sequence");
    frames->excludes(seq);
    cmd->add_option("--frame-count", o->frame_count, "Rendered frames when neither is given")->capture_default_str();
    cmd->add_option("--tasks", o->cfg.tasks)->capture_default_str();
    cmd->add_option("--net", o->net, "loopback, loopback:<drop>,<delay>,<jitter> or sim:<drop>,<delay_ms>,<jitter_ms>")
        ->capture_default_str();
    cmd->add_option("--link-seed", o->link_seed)->capture_default_str();
    cmd->add_option("--timeout", o->cfg.timeout_ms, "A task unanswered after this many ms is lost")
        ->capture_default_str();
    cmd->add_option("--server-ms", o->cfg.server_ms, "Simulated recognition time (sim only)")->capture_default_str();
    cmd->add_option("--codec", o->codec, "jpeg, deflate or raw")->capture_default_str();
    cmd->add_option("--jpeg-quality", o->cfg.codec.jpeg_quality)->capture_default_str();
    cmd->add_option("--target-bytes", o->cfg.codec.target_bytes, "Request size JPEG steps down to")
        ->capture_default_str();
    cmd->add_option("--fps", o->fps)->capture_default_str();
    add_recognize_options(cmd, o->cfg.server.recognize);
    cmd->add_option("--out", o->out, "JSON lines file (default: stdout)");
    cmd->callback([o] { eval_latency_cmd(*o); });
  }
}

}  // namespace mlens::cli
