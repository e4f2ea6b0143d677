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

#include "mlens/harness/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "mlens/common/error.hpp"
#include "mlens/common/random.hpp"
#include "mlens/img/io.hpp"
#include "mlens/img/ops.hpp"

namespace mlens::harness {
namespace {

using nlohmann::json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr net::Endpoint kSimClient{0x7f000001, 50001};
constexpr net::Endpoint kSimServer{0x7f000001, 50002};

bool impaired(const net::LinkModel& m) { return m.drop > 0 || m.delay_ms > 0 || m.jitter_ms > 0; }

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

/// Camera view of a plane rotated by `tilt` about the vertical and `roll`
/// in-plane, both about (cx, cy).
Homography perspective_about(double cx, double cy, double tilt, double roll, double f = 500.0) {
  const Homography k{{f, 0, cx, 0, f, cy, 0, 0, 1}};
  const double c = std::cos(tilt), s = std::sin(tilt);
  const Homography rt{{c, 0, 0, 0, 1, 0, -s, 0, 1}};
  const double cr = std::cos(roll), sr = std::sin(roll);
  const Homography rr{{cr, -sr, 0, sr, cr, 0, 0, 0, 1}};
  return k * rt * k.inverse() * Homography::translation(cx, cy) * rr * Homography::translation(-cx, -cy);
}

/// Reference scaled by `s` with its centre at (cx, cy).
Homography centred(const ImageGray8& ref, double s, double cx, double cy) {
  return Homography::translation(cx, cy) * Homography::scaling(s, s) *
         Homography::translation(-(ref.width() - 1) / 2.0, -(ref.height() - 1) / 2.0);
}

bool inside(const Homography& h, const ImageGray8& ref, int w, int hgt) {
  for (const auto& p : reference_corners(ref.width(), ref.height())) {
    const Point2 q = apply_homography(h, p);
    if (q.x < 0 || q.y < 0 || q.x > w - 1 || q.y > hgt - 1) return false;
  }
  return true;
}

double placement_error(const std::vector<client::TrackedObject>& objects, std::uint32_t ref_id, const Quad& truth) {
  for (const auto& o : objects) {
    if (o.reference_id != ref_id) continue;
    try {
      return client::pixel_error(o.corners, truth);
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return kNaN;
}

struct TrackingRun {
  const Sequence& seq;
  const TrackingEvalConfig& cfg;
  std::vector<std::uint32_t> ref_ids;
  EvalReport report;
  std::map<std::uint32_t, std::size_t> cycle_of;

  TrackingRun(const Sequence& s, const TrackingEvalConfig& c) : seq(s), cfg(c) {
    const std::size_t placements = seq.truth.empty() ? 0 : seq.truth.front().size();
    ref_ids = cfg.truth_ref_ids;
    if (ref_ids.empty())
      for (std::size_t k = 0; k < placements; ++k) ref_ids.push_back(static_cast<std::uint32_t>(k));
    require(ref_ids.size() == placements, ErrorCode::InvalidArgument, "truth_ref_ids does not match the placements");
    require(seq.frames.size() == seq.truth.size(), ErrorCode::InvalidArgument, "sequence without ground truth");
    report.placements = placements;
  }

  CycleRecord* cycle(std::uint32_t id) {
    auto it = cycle_of.find(id);
    return it == cycle_of.end() ? nullptr : &report.cycles[it->second];
  }

  void open_cycle(std::uint32_t id, int frame, std::size_t bytes) {
    CycleRecord rec;
    rec.cycle_id = id;
    rec.key_frame = frame;
    rec.request_bytes = bytes;
    cycle_of[id] = report.cycles.size();
    report.cycles.push_back(rec);
  }

  void record(int t, const client::TrackingUpdate& up, bool result_frame, double network_ms) {
    FrameRecord fr;
    fr.frame = t;
    fr.result_frame = result_frame;
    fr.live_points = up.live_points;
    fr.timings = up.timings;
    fr.network_ms = network_ms;
    for (std::size_t k = 0; k < ref_ids.size(); ++k)
      fr.errors.push_back(placement_error(up.objects, ref_ids[k], seq.truth[t][k]));
    for (const auto& o : up.objects)
      if (std::find(ref_ids.begin(), ref_ids.end(), o.reference_id) == ref_ids.end()) ++fr.false_objects;
    report.frames.push_back(std::move(fr));
    report.fps.push_back(up.timings.total_ms > 0 ? 1000.0 / up.timings.total_ms : 0.0);
  }
};

EvalReport run_simulated(const retrieval::ReferenceIndex& index, const Sequence& seq, const TrackingEvalConfig& cfg) {
  TrackingRun run(seq, cfg);
  auto network = std::make_shared<net::SimNetwork>(cfg.link);
  auto client_port = network->open(kSimClient);
  auto server_port = network->open(kSimServer);
  client::Tracker tracker(cfg.tracker);
  server::ObjectIds ids;
  double server_free = 0.0;
  struct Due {
    int frame;
    net::ResultMessage msg;
  };
  std::vector<Due> pending;
  const double period = cfg.frame_period_ms;
  // Arrivals within this of a frame time belong to that frame.
  constexpr double kEps = 1e-6;

  auto serve_one = [&](const net::Datagram& dg) {
    net::RecognitionRequest req;
    try {
      req = net::decode_request(dg.data);
    } catch (const Error&) {
      return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    server::RecognitionOutcome outcome;
    try {
      outcome = server::recognize_request(index, req, cfg.server.recognize);
    } catch (const Error&) {
      return;
    }
    const double compute = cfg.server_ms >= 0 ? cfg.server_ms : elapsed_ms(t0);
    const double start = std::max(dg.arrival_ms, server_free);
    server_free = start + compute;
    const auto res = server::make_result(outcome, req.client_nonce, ids);
    network->send_at(kSimServer, kSimClient, net::encode_result(res), server_free);
  };

  auto take_result = [&](const net::Datagram& dg) {
    net::ResultMessage msg;
    try {
      msg = net::decode_result(dg.data);
    } catch (const Error&) {
      return;
    }
    CycleRecord* rec = run.cycle(msg.cycle_id);
    if (!rec || rec->answered) return;
    rec->answered = true;
    rec->latency_ms = dg.arrival_ms - rec->key_frame * period;
    rec->frames_passed = frames_passed(rec->latency_ms, period);
    rec->objects = msg.objects.size();
    pending.push_back({rec->key_frame + std::max(1, rec->frames_passed), std::move(msg)});
  };

  for (int t = 0; t < static_cast<int>(seq.frames.size()); ++t) {
    const double now = t * period;
    for (;;) {
      const auto as = network->next_arrival(kSimServer);
      const auto ac = network->next_arrival(kSimClient);
      const bool server_first = as && (!ac || *as <= *ac);
      const std::optional<double> next = server_first ? as : ac;
      if (!next || *next > now + kEps) break;
      network->advance_to(*next);
      if (server_first) {
        if (auto dg = network->take_due(kSimServer)) serve_one(*dg);
      } else if (auto dg = network->take_due(kSimClient)) {
        take_result(*dg);
      }
    }
    network->advance_to(now);

    const auto t0 = std::chrono::steady_clock::now();
    bool applied = false;
    std::stable_sort(pending.begin(), pending.end(), [](const Due& a, const Due& b) { return a.frame < b.frame; });
    while (!pending.empty() && pending.front().frame <= t) {
      CycleRecord* rec = run.cycle(pending.front().msg.cycle_id);
      const bool ok = tracker.on_result(pending.front().msg) == client::ResultOutcome::Applied;
      rec->applied = ok;
      rec->result_frame = t;
      applied |= ok;
      pending.erase(pending.begin());
    }
    double network_ms = elapsed_ms(t0);

    const auto up = tracker.process_frame(seq.frames[t]);
    if (up.request_to_send) {
      const auto t1 = std::chrono::steady_clock::now();
      Bytes bytes = net::encode_request(*up.request_to_send);
      run.open_cycle(up.request_to_send->cycle_id, t, bytes.size());
      network->send_at(kSimClient, kSimServer, std::move(bytes), now);
      network_ms += elapsed_ms(t1);
    }
    run.record(t, up, applied, network_ms);
  }
  return std::move(run.report);
}

EvalReport run_live(const net::Endpoint& server_ep, const Sequence& seq, const TrackingEvalConfig& cfg) {
  TrackingRun run(seq, cfg);
  const bool loopback = (server_ep.address >> 24) == 127;
  std::unique_ptr<net::Transport> port = std::make_unique<net::UdpTransport>(net::Endpoint{loopback ? 0x7f000001u : 0u, 0});
  if (impaired(cfg.link)) port = std::make_unique<net::ImpairedTransport>(std::move(port), cfg.link);

  client::Tracker tracker(cfg.tracker);
  std::map<std::uint32_t, double> sent_at;
  const double start = net::steady_now_ms();
  for (int t = 0; t < static_cast<int>(seq.frames.size()); ++t) {
    const double due = start + t * cfg.frame_period_ms;
    const double wait = due - net::steady_now_ms();
    if (wait > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(wait));

    const auto t0 = std::chrono::steady_clock::now();
    bool applied = false;
    while (auto dg = port->receive(std::chrono::milliseconds(0))) {
      net::ResultMessage msg;
      try {
        msg = net::decode_result(dg->data);
      } catch (const Error&) {
        continue;
      }
      CycleRecord* rec = run.cycle(msg.cycle_id);
      if (!rec || rec->answered) continue;
      rec->answered = true;
      rec->latency_ms = dg->arrival_ms - sent_at[msg.cycle_id];
      rec->frames_passed = frames_passed(rec->latency_ms, cfg.frame_period_ms);
      rec->objects = msg.objects.size();
      rec->applied = tracker.on_result(msg) == client::ResultOutcome::Applied;
      rec->result_frame = t;
      applied |= rec->applied;
    }
    double network_ms = elapsed_ms(t0);

    const auto up = tracker.process_frame(seq.frames[t]);
    if (up.request_to_send) {
      const auto t1 = std::chrono::steady_clock::now();
      Bytes bytes = net::encode_request(*up.request_to_send);
      run.open_cycle(up.request_to_send->cycle_id, t, bytes.size());
      sent_at[up.request_to_send->cycle_id] = net::steady_now_ms();
      port->send(server_ep, std::move(bytes));
      network_ms += elapsed_ms(t1);
    }
    run.record(t, up, applied, network_ms);
  }
  return std::move(run.report);
}

EvalReport run_loopback(std::shared_ptr<const retrieval::ReferenceIndex> index, const Sequence& seq,
                        const TrackingEvalConfig& cfg) {
  server::Server srv(std::move(index), std::make_unique<net::UdpTransport>(net::Endpoint{0x7f000001, 0}), cfg.server);
  srv.start();
  EvalReport report = run_live(srv.endpoint(), seq, cfg);
  srv.stop();
  return report;
}

}  // namespace

int frames_passed(double latency_ms, double period_ms) {
  require(period_ms > 0, ErrorCode::InvalidArgument, "frame period must be positive");
  return static_cast<int>(std::ceil(latency_ms / period_ms));
}

DirectoryBuild build_index_from_directory(const std::filesystem::path& dir, const retrieval::IndexBuildConfig& cfg) {
  namespace fs = std::filesystem;
  require(fs::is_directory(dir), ErrorCode::BuildFailed, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

  std::vector<std::string> warnings;
  std::vector<retrieval::NamedImage> images;
  for (const auto& f : files) {
    try {
      images.push_back({f.filename().string(), read_image(f), static_cast<std::uint32_t>(images.size())});
    } catch (const Error& e) {
      warnings.push_back("skipping " + f.filename().string() + ": " + e.what());
    }
  }
  if (images.empty()) fail(ErrorCode::BuildFailed, "no readable images in " + dir.string());

  DirectoryBuild out;
  out.index = retrieval::ReferenceIndex::build(images, cfg, &out.report);
  out.report.skipped += warnings.size();
  out.report.warnings.insert(out.report.warnings.begin(), warnings.begin(), warnings.end());
  return out;
}

TrackingSummary summarize(const EvalReport& report) {
  TrackingSummary s;
  double sum = 0;
  for (const auto& f : report.frames) {
    for (double e : f.errors) {
      if (std::isnan(e)) {
        ++s.untracked_samples;
        continue;
      }
      if (s.first_tracked_frame < 0) s.first_tracked_frame = f.frame;
      ++s.tracked_samples;
      sum += e;
      s.max_error = std::max(s.max_error, e);
      if (f.result_frame) s.max_result_frame_error = std::max(s.max_result_frame_error, e);
    }
    s.false_objects += f.false_objects;
    s.mean_frame_ms += f.timings.total_ms;
    s.max_frame_ms = std::max(s.max_frame_ms, f.timings.total_ms);
  }
  if (s.tracked_samples) s.mean_error = sum / s.tracked_samples;
  if (!report.frames.empty()) s.mean_frame_ms /= report.frames.size();
  s.cycles = report.cycles.size();
  for (const auto& c : report.cycles) {
    s.answered += c.answered;
    s.applied += c.applied;
    s.max_frames_passed = std::max(s.max_frames_passed, c.frames_passed);
  }
  return s;
}

EvalReport eval_tracking(std::shared_ptr<const retrieval::ReferenceIndex> index, const Sequence& sequence,
                         const TrackingEvalConfig& cfg) {
  require(index != nullptr, ErrorCode::InvalidArgument, "eval_tracking needs an index");
  if (cfg.transport == TransportKind::Loopback) return run_loopback(std::move(index), sequence, cfg);
  return run_simulated(*index, sequence, cfg);
}

EvalReport track_remote(const net::Endpoint& server, const Sequence& sequence, const TrackingEvalConfig& cfg) {
  return run_live(server, sequence, cfg);
}

std::string report_jsonl(const EvalReport& report) {
  std::ostringstream out;
  for (const auto& f : report.frames) {
    json errors = json::array();
    for (double e : f.errors) errors.push_back(std::isfinite(e) ? json(e) : json(nullptr));
    out << json{{"record", "frame"},
                {"frame", f.frame},
                {"errors", errors},
                {"result_frame", f.result_frame},
                {"false_objects", f.false_objects},
                {"live_points", f.live_points},
                {"flow_ms", f.timings.flow_ms},
                {"update_ms", f.timings.update_ms},
                {"regenerate_ms", f.timings.regenerate_ms},
                {"request_ms", f.timings.request_ms},
                {"total_ms", f.timings.total_ms},
                {"network_ms", f.network_ms}}
               .dump()
        << '\n';
  }
  for (const auto& c : report.cycles) {
    out << json{{"record", "cycle"},
                {"cycle", c.cycle_id},
                {"key_frame", c.key_frame},
                {"answered", c.answered},
                {"applied", c.applied},
                {"result_frame", c.result_frame},
                {"latency_ms", c.answered ? json(c.latency_ms) : json(nullptr)},
                {"frames_passed", c.frames_passed},
                {"objects", c.objects},
                {"request_bytes", c.request_bytes}}
               .dump()
        << '\n';
  }
  return out.str();
}

std::vector<BudgetRow> eval_frame_budget(const Sequence& sequence, const std::vector<int>& point_counts,
                                         const client::TrackerConfig& base) {
  require(!sequence.frames.empty(), ErrorCode::InvalidArgument, "empty sequence");
  std::vector<BudgetRow> rows;
  for (int n : point_counts) {
    require(n > 0, ErrorCode::InvalidArgument, "point count must be positive");
    client::TrackerConfig c = base;
    c.corners.max_count = n;
    client::Tracker tracker(c);
    std::optional<net::ResultMessage> next;
    BudgetRow row;
    row.points = n;
    for (std::size_t t = 0; t < sequence.frames.size(); ++t) {
      if (next) {
        tracker.on_result(*next);
        next.reset();
      }
      const auto up = tracker.process_frame(sequence.frames[t]);
      if (up.request_to_send) {
        net::ResultMessage msg;
        msg.client_nonce = c.client_nonce;
        msg.cycle_id = up.request_to_send->cycle_id;
        for (std::size_t k = 0; k < sequence.truth[t].size(); ++k) {
          net::RecognizedObject o;
          o.object_id = static_cast<std::uint16_t>(k + 1);
          o.ref_id = static_cast<std::uint32_t>(k);
          for (int i = 0; i < 4; ++i) {
            o.corners[2 * i] = static_cast<float>(sequence.truth[t][k][i].x);
            o.corners[2 * i + 1] = static_cast<float>(sequence.truth[t][k][i].y);
          }
          msg.objects.push_back(o);
        }
        next = msg;
      }
      row.mean_live_points += static_cast<double>(up.live_points);
      row.mean_total_ms += up.timings.total_ms;
      row.mean_flow_ms += up.timings.flow_ms;
      row.mean_update_ms += up.timings.update_ms;
      row.mean_regenerate_ms += up.timings.regenerate_ms;
      row.mean_request_ms += up.timings.request_ms;
    }
    const double frames = static_cast<double>(sequence.frames.size());
    row.mean_live_points /= frames;
    row.mean_total_ms /= frames;
    row.mean_flow_ms /= frames;
    row.mean_update_ms /= frames;
    row.mean_regenerate_ms /= frames;
    row.mean_request_ms /= frames;
    row.fps = row.mean_total_ms > 0 ? 1000.0 / row.mean_total_ms : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::vector<RetrievalQuery> make_query_set(const std::vector<ImageGray8>& references,
                                           const std::vector<ImageGray8>& distractors, const QuerySetConfig& cfg) {
  require(!references.empty(), ErrorCode::InvalidArgument, "no references to query");
  require(cfg.targets_per_multi >= 1 && cfg.distractors_per_multi >= 0, ErrorCode::InvalidArgument,
          "bad multi-target layout");
  std::vector<ImageGray8> all = references;
  all.insert(all.end(), distractors.begin(), distractors.end());
  const SceneRenderer renderer(all);
  Rng rng(cfg.seed);
  const double max_angle = cfg.max_angle_deg * 3.141592653589793 / 180.0;
  const double w = cfg.width, h = cfg.height;
  RenderOptions ro;
  ro.width = cfg.width;
  ro.height = cfg.height;
  ro.noise_sigma = cfg.noise_sigma;

  std::vector<RetrievalQuery> out;
  for (std::size_t q = 0; q < cfg.single; ++q) {
    const std::size_t r = rng.below(references.size());
    const ImageGray8& ref = references[r];
    const double tilt = rng.uniform(-max_angle, max_angle), roll = rng.uniform(-max_angle, max_angle);
    double s = rng.uniform(0.55, 0.85) * h / ref.height();
    Homography hm;
    for (;; s *= 0.9) {
      hm = perspective_about(w / 2 - 0.5, h / 2 - 0.5, tilt, roll) * centred(ref, s, w / 2 - 0.5, h / 2 - 0.5);
      if (inside(hm, ref, cfg.width, cfg.height)) break;
    }
    ro.noise_seed = rng.next();
    out.push_back({renderer.render({r}, {hm}, ro, q), {static_cast<std::uint32_t>(r)}});
  }

  const int slots = cfg.targets_per_multi + (distractors.empty() ? 0 : cfg.distractors_per_multi);
  require(cfg.multi == 0 || static_cast<std::size_t>(cfg.targets_per_multi) <= references.size(),
          ErrorCode::InvalidArgument, "more targets per frame than references");
  for (std::size_t q = 0; q < cfg.multi; ++q) {
    std::vector<std::size_t> which;
    std::vector<std::uint32_t> labels;
    while (static_cast<int>(labels.size()) < cfg.targets_per_multi) {
      const auto r = static_cast<std::uint32_t>(rng.below(references.size()));
      if (std::find(labels.begin(), labels.end(), r) != labels.end()) continue;
      labels.push_back(r);
      which.push_back(r);
    }
    while (static_cast<int>(which.size()) < slots) which.push_back(references.size() + rng.below(distractors.size()));
    for (std::size_t i = which.size(); i > 1; --i) std::swap(which[i - 1], which[rng.below(i)]);

    const double slot_w = w / slots;
    std::vector<Homography> place;
    for (int i = 0; i < slots; ++i) {
      const ImageGray8& ref = all[which[i]];
      const double cx = slot_w * (i + 0.5) - 0.5, cy = h / 2 - 0.5;
      const double tilt = rng.uniform(-max_angle, max_angle) / 2, roll = rng.uniform(-max_angle, max_angle) / 2;
      double s = std::min(0.8 * slot_w / ref.width(), 0.7 * h / ref.height());
      Homography hm;
      for (;; s *= 0.9) {
        hm = perspective_about(cx, cy, tilt, roll) * centred(ref, s, cx, cy);
        bool fits = inside(hm, ref, cfg.width, cfg.height);
        for (const auto& p : reference_corners(ref.width(), ref.height())) {
          const double x = apply_homography(hm, p).x;
          fits = fits && x > slot_w * i + 4 && x < slot_w * (i + 1) - 4;
        }
        if (fits) break;
      }
      place.push_back(hm);
    }
    ro.noise_seed = rng.next();
    std::sort(labels.begin(), labels.end());
    out.push_back({renderer.render(which, place, ro, cfg.single + q), labels});
  }
  return out;
}

std::vector<RetrievalQuery> make_identity_queries(const std::vector<ImageGray8>& references, int width, int height) {
  std::vector<RetrievalQuery> out;
  RenderOptions ro;
  ro.width = width;
  ro.height = height;
  for (std::size_t i = 0; i < references.size(); ++i) {
    const ImageGray8& ref = references[i];
    const double s = std::min(0.8 * height / ref.height(), 0.8 * width / ref.width());
    const SceneRenderer renderer({ref});
    out.push_back({renderer.render({0}, {centred(ref, s, width / 2.0 - 0.5, height / 2.0 - 0.5)}, ro),
                   {static_cast<std::uint32_t>(i)}});
  }
  return out;
}

double average_precision(const std::vector<std::uint32_t>& ranked, const std::vector<std::uint32_t>& relevant,
                         std::size_t k) {
  require(!relevant.empty() && k > 0, ErrorCode::InvalidArgument, "average precision needs labels and k > 0");
  std::set<std::uint32_t> rel(relevant.begin(), relevant.end());
  double hits = 0, sum = 0;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
    if (rel.count(ranked[i])) {
      ++hits;
      sum += hits / static_cast<double>(i + 1);
    }
  return sum / static_cast<double>(std::min(rel.size(), k));
}

std::vector<RetrievalRow> eval_retrieval(const retrieval::ReferenceIndex& index,
                                         const std::vector<RetrievalQuery>& queries, const RetrievalEvalConfig& cfg) {
  for (std::size_t i = 0; i < queries.size(); ++i)
    require(!queries[i].labels.empty(), ErrorCode::InvalidArgument, "query " + std::to_string(i) + " has no label");
  require(cfg.k >= 1 && cfg.k <= 5, ErrorCode::InvalidArgument, "k must be in [1, 5]");
  require(!queries.empty(), ErrorCode::InvalidArgument, "empty query set");

  std::vector<RetrievalRow> rows;
  for (int res : cfg.resolutions) {
    require(res >= 32, ErrorCode::InvalidArgument, "patch resolution too small");
    seg::SegConfig sc = cfg.seg;
    sc.patch_size = res;
    RetrievalRow row;
    row.resolution = res;
    row.segmentation = cfg.segmentation;
    row.queries = queries.size();
    std::size_t pairs = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& q : queries) {
      std::vector<seg::SegmentPatch> patches;
      if (cfg.segmentation) patches = seg::segment(q.image, sc);
      else patches.push_back(seg::whole_frame_patch(q.image, res));

      // Best per-patch rank of every reference, and the merged ranking.
      std::map<std::uint32_t, std::size_t> best_rank;
      std::map<std::uint32_t, double> best_dist;
      const int canonical = index.describe_config().canonical_size;
      for (const auto& p : patches) {
        const ImageGray8 img = res == canonical ? p.image : resize(p.image, canonical, canonical);
        const auto desc = retrieval::describe_image(img, index.describe_config());
        if (desc.descriptors.empty()) continue;
        const auto nn = index.query_knn(index.encode(desc.descriptors), cfg.k);
        for (std::size_t r = 0; r < nn.size(); ++r) {
          auto [it, fresh] = best_rank.try_emplace(nn[r].ref_id, r);
          if (!fresh) it->second = std::min(it->second, r);
          auto [dt, dfresh] = best_dist.try_emplace(nn[r].ref_id, nn[r].distance);
          if (!dfresh) dt->second = std::min(dt->second, nn[r].distance);
        }
      }
      std::vector<std::pair<double, std::uint32_t>> merged;
      for (const auto& [id, d] : best_dist) merged.emplace_back(d, id);
      std::sort(merged.begin(), merged.end());
      std::vector<std::uint32_t> ranked;
      for (const auto& m : merged) ranked.push_back(m.second);
      row.map += average_precision(ranked, q.labels, cfg.k);

      for (auto label : q.labels) {
        ++pairs;
        auto it = best_rank.find(label);
        if (it == best_rank.end()) continue;
        for (std::size_t k = it->second; k < 5; ++k) row.top_k[k] += 1;
      }
    }
    row.ms_per_query = elapsed_ms(t0) / queries.size();
    row.map /= queries.size();
    for (auto& v : row.top_k) v /= pairs;
    rows.push_back(row);
  }
  return rows;
}

double LatencyReport::fraction_within(double ms) const {
  if (latency_ms.empty()) return 0.0;
  std::size_t n = 0;
  for (double v : latency_ms) n += !std::isnan(v) && v <= ms;
  return static_cast<double>(n) / latency_ms.size();
}

double LatencyReport::percentile(double p) const {
  std::vector<double> v;
  for (double x : latency_ms)
    if (!std::isnan(x)) v.push_back(x);
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(std::clamp(p, 0.0, 1.0) * v.size()));
  return v[std::max<std::size_t>(rank, 1) - 1];
}

LatencyReport eval_latency(std::shared_ptr<const retrieval::ReferenceIndex> index,
                           const std::vector<ImageGray8>& frames, const LatencyEvalConfig& cfg) {
  require(index != nullptr && !frames.empty(), ErrorCode::InvalidArgument, "eval_latency needs an index and frames");
  require(cfg.tasks > 0, ErrorCode::InvalidArgument, "task count must be positive");
  LatencyReport rep;
  constexpr std::uint32_t kNonce = 0x4c41;

  auto finish = [&](double latency) {
    rep.latency_ms.push_back(latency);
    if (std::isnan(latency)) {
      ++rep.lost;
      rep.frames_passed.push_back(-1);
    } else {
      ++rep.completed;
      rep.frames_passed.push_back(frames_passed(latency, cfg.frame_period_ms));
    }
  };

  if (cfg.transport == TransportKind::Simulated) {
    auto network = std::make_shared<net::SimNetwork>(cfg.link);
    auto client_port = network->open(kSimClient);
    auto server_port = network->open(kSimServer);
    server::ObjectIds ids;
    // One task per logical cycle.
    const double spacing = 30 * cfg.frame_period_ms;
    for (int i = 0; i < cfg.tasks; ++i) {
      const double t0 = i * spacing;
      network->advance_to(t0);
      const auto cycle = static_cast<std::uint32_t>(i + 1);
      Bytes bytes = net::encode_request(net::make_request(frames[i % frames.size()], cycle, kNonce, cfg.codec));
      rep.request_bytes.push_back(bytes.size());
      network->send_at(kSimClient, kSimServer, std::move(bytes), t0);
      double latency = kNaN;
      if (auto at = network->next_arrival(kSimServer)) {
        network->advance_to(*at);
        const auto dg = network->take_due(kSimServer);
        const auto req = net::decode_request(dg->data);
        const auto outcome = server::recognize_request(*index, req, cfg.server.recognize);
        network->send_at(kSimServer, kSimClient, net::encode_result(server::make_result(outcome, kNonce, ids)),
                         *at + cfg.server_ms);
        if (auto back = network->next_arrival(kSimClient); back && *back - t0 <= cfg.timeout_ms) {
          network->advance_to(*back);
          network->take_due(kSimClient);
          latency = *back - t0;
        }
      }
      // Anything still in flight belongs to a lost task.
      network->advance_to(t0 + spacing - 1e-3);
      while (network->take_due(kSimClient) || network->take_due(kSimServer)) {
      }
      finish(latency);
    }
    return rep;
  }

  std::mutex mu;
  std::size_t logged = 0;
  server::ServerConfig scfg = cfg.server;
  auto user_log = scfg.log;
  scfg.log = [&](const std::string& line) {
    if (user_log) user_log(line);
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || j.value("event", "") != "request") return;
    std::lock_guard lock(mu);
    ++logged;
    rep.parse_ms += j.value("parse_ms", 0.0);
    rep.segment_ms += j.value("segment_ms", 0.0);
    rep.encode_ms += j.value("encode_ms", 0.0);
    rep.knn_ms += j.value("knn_ms", 0.0);
    rep.verify_ms += j.value("verify_ms", 0.0);
    rep.server_total_ms += j.value("total_ms", 0.0);
  };
  const net::Endpoint local{0x7f000001, 0};
  server::Server srv(index, std::make_unique<net::UdpTransport>(local), scfg);
  srv.start();
  std::unique_ptr<net::Transport> port = std::make_unique<net::UdpTransport>(local);
  if (impaired(cfg.link)) port = std::make_unique<net::ImpairedTransport>(std::move(port), cfg.link);

  for (int i = 0; i < cfg.tasks; ++i) {
    const auto cycle = static_cast<std::uint32_t>(i + 1);
    Bytes bytes = net::encode_request(net::make_request(frames[i % frames.size()], cycle, kNonce, cfg.codec));
    rep.request_bytes.push_back(bytes.size());
    const double t0 = net::steady_now_ms();
    port->send(srv.endpoint(), std::move(bytes));
    double latency = kNaN;
    for (;;) {
      const double left = t0 + cfg.timeout_ms - net::steady_now_ms();
      if (left <= 0) break;
      auto dg = port->receive(std::chrono::milliseconds(static_cast<long>(std::ceil(left))));
      if (!dg) continue;
      try {
        if (net::decode_result(dg->data).cycle_id != cycle) continue;
      } catch (const Error&) {
        continue;
      }
      if (dg->arrival_ms - t0 <= cfg.timeout_ms) latency = dg->arrival_ms - t0;
      break;
    }
    finish(latency);
  }
  srv.stop();
  std::lock_guard lock(mu);
  if (logged) {
    for (double* v : {&rep.parse_ms, &rep.segment_ms, &rep.encode_ms, &rep.knn_ms, &rep.verify_ms,
                      &rep.server_total_ms})
      *v /= logged;
  }
  return rep;
}

void write_sequence(const std::filesystem::path& dir, const Sequence& sequence) {
  std::filesystem::create_directories(dir);
  std::ofstream truth(dir / "truth.jsonl");
  require(static_cast<bool>(truth), ErrorCode::IoError, "cannot write " + (dir / "truth.jsonl").string());
  for (std::size_t t = 0; t < sequence.frames.size(); ++t) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.png", t);
    write_png(dir / name, sequence.frames[t]);
    json corners = json::array();
    for (const auto& q : sequence.truth[t]) {
      json quad = json::array();
      for (const auto& p : q) quad.push_back({p.x, p.y});
      corners.push_back(quad);
    }
    truth << json{{"frame", t}, {"corners", corners}}.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
}

Sequence read_sequence(const std::filesystem::path& dir) {
  Sequence seq;
  std::ifstream truth(dir / "truth.jsonl");
  require(static_cast<bool>(truth), ErrorCode::IoError, "cannot read " + (dir / "truth.jsonl").string());
  std::string line;
  while (std::getline(truth, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    require(!j.is_discarded() && j.contains("frame") && j.contains("corners"), ErrorCode::IoError,
            "bad truth record: " + line);
    const auto t = j["frame"].get<std::size_t>();
    require(t == seq.frames.size(), ErrorCode::IoError, "truth records out of order");
    std::vector<Quad> quads;
    for (const auto& quad : j["corners"]) {
      require(quad.size() == 4, ErrorCode::IoError, "truth quad needs four corners");
      Quad q;
      for (std::size_t i = 0; i < 4; ++i) q[i] = {quad[i][0].get<double>(), quad[i][1].get<double>()};
      quads.push_back(q);
    }
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%04zu.png", t);
    seq.frames.push_back(read_image(dir / name));
    seq.truth.push_back(std::move(quads));
  }
  require(!seq.frames.empty(), ErrorCode::IoError, "no frames in " + dir.string());
  return seq;
}

}  // namespace mlens::harness
