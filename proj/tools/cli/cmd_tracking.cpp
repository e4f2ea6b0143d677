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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>

#include "common.hpp"
#include "mlens/common/error.hpp"
#include "mlens/harness/scene.hpp"

namespace mlens::cli {
namespace {

namespace fs = std::filesystem;

/// Where the frames come from when no sequence directory is given.
struct SceneOpts {
  std::string references;
  std::size_t posters = 20;
  std::uint64_t seed = 3000;
  std::vector<std::string> show;
  std::string script = "fastmove";
  int frames = 150;
  int width = 640;
  int height = 360;
  double target_height = 200;
  double noise = 0;
  std::uint64_t noise_seed = 7;
};

void add_scene_options(CLI::App* cmd, SceneOpts& o) {
  cmd->add_option("--references", o.references, "Directory of reference images (default: procedural posters)");
  cmd->add_option("--posters", o.posters, "Procedural posters when --references is absent")->capture_default_str();
  cmd->add_option("--poster-seed", o.seed, "Seed of the first procedural poster")->capture_default_str();
  cmd->add_option("--show", o.show, "Reference name(s) placed in the scene (default: the first)");
  cmd->add_option("--frames", o.frames, "Sequence length")->capture_default_str();
  cmd->add_option("--width", o.width)->capture_default_str();
  cmd->add_option("--height", o.height)->capture_default_str();
  cmd->add_option("--target-height", o.target_height, "Height of each placed reference at frame 0 (px)")
      ->capture_default_str();
  cmd->add_option("--noise", o.noise, "Gaussian pixel noise sigma")->capture_default_str();
  cmd->add_option("--noise-seed", o.noise_seed)->capture_default_str();
}

References scene_references(const SceneOpts& o) {
  return o.references.empty() ? synthetic_references(o.posters, o.seed) : load_references(o.references);
}

struct Scene {
  harness::Sequence sequence;
  std::vector<std::string> shown;
};

Scene render_scene(const References& refs, const SceneOpts& o) {
  std::vector<std::size_t> which;
  for (const auto& name : o.show) {
    auto it = std::find(refs.names.begin(), refs.names.end(), name);
    require(it != refs.names.end(), ErrorCode::InvalidArgument, "no reference named '" + name + "'");
    which.push_back(static_cast<std::size_t>(it - refs.names.begin()));
  }
  if (which.empty()) which.push_back(0);

  harness::ScriptParams sp;
  sp.width = o.width;
  sp.height = o.height;
  sp.duration = o.frames;
  harness::RenderOptions ro;
  ro.width = o.width;
  ro.height = o.height;
  ro.noise_sigma = o.noise;
  ro.noise_seed = o.noise_seed;
  const auto placements = side_by_side(refs, which, o.width, o.height, o.target_height);
  Scene scene;
  scene.sequence = harness::generate_sequence(
      refs.images, harness::make_script(harness::parse_script_kind(o.script), placements, sp), ro);
  for (std::size_t r : which) scene.shown.push_back(refs.names[r]);
  return scene;
}

double finite_or_zero(double v) { return std::isfinite(v) ? v : 0.0; }

void summarize_tracking(Report& out, const harness::EvalReport& report, const std::string& label) {
  const auto s = harness::summarize(report);
  double mean_fps = 0;
  for (double f : report.fps) mean_fps += f;
  if (!report.fps.empty()) mean_fps /= report.fps.size();
  out.record({{"record", "summary"},
              {"label", label},
              {"frames", report.frames.size()},
              {"mean_error", s.mean_error},
              {"max_error", s.max_error},
              {"max_result_frame_error", s.max_result_frame_error},
              {"tracked_samples", s.tracked_samples},
              {"untracked_samples", s.untracked_samples},
              {"false_objects", s.false_objects},
              {"cycles", s.cycles},
              {"answered", s.answered},
              {"applied", s.applied},
              {"max_frames_passed", s.max_frames_passed},
              {"first_tracked_frame", s.first_tracked_frame},
              {"mean_frame_ms", s.mean_frame_ms},
              {"max_frame_ms", s.max_frame_ms},
              {"mean_fps", finite_or_zero(mean_fps)}});
  char buf[512];
  auto& os = out.summary();
  std::snprintf(buf, sizeof(buf), "%s: %zu frames, tracked from frame %d, %zu/%zu samples tracked\n", label.c_str(),
                report.frames.size(), s.first_tracked_frame, s.tracked_samples,
                s.tracked_samples + s.untracked_samples);
  os << buf;
  std::snprintf(buf, sizeof(buf), "  pixel error: mean %.2f, max %.2f, max at result frames %.2f; false objects %zu\n",
                s.mean_error, s.max_error, s.max_result_frame_error, s.false_objects);
  os << buf;
  std::snprintf(buf, sizeof(buf), "  cycles: %zu sent, %zu answered, %zu applied; at most %d frames passed\n",
                s.cycles, s.answered, s.applied, s.max_frames_passed);
  os << buf;
  std::snprintf(buf, sizeof(buf), "  tracker: mean %.2f ms, max %.2f ms per frame (%.0f fps)\n", s.mean_frame_ms,
                s.max_frame_ms, mean_fps);
  os << buf;
}

struct GenSequenceOpts {
  std::string out;
  SceneOpts scene;
};

void gen_sequence(const GenSequenceOpts& o) {
  const auto refs = scene_references(o.scene);
  const auto scene = render_scene(refs, o.scene);
  harness::write_sequence(o.out, scene.sequence);
  if (o.scene.references.empty()) write_references(fs::path(o.out) / "references", refs);
  write_sequence_info(o.out, {o.scene.script, o.scene.width, o.scene.height, scene.shown});
  std::printf("wrote %zu frames of '%s' showing", scene.sequence.frames.size(), o.scene.script.c_str());
  for (const auto& n : scene.shown) std::printf(" %s", n.c_str());
  std::printf(" to %s\n", o.out.c_str());
}

struct TrackingOpts {
  std::string sequence;
  std::string index;
  bool script_given = false;
  SceneOpts scene;
  std::string net = "sim:0,0,0";
  std::uint64_t link_seed = 1;
  double fps = 30;
  std::string out;
  harness::TrackingEvalConfig cfg;
};

void add_tracker_options(CLI::App* cmd, TrackingOpts& o) {
  cmd->add_option("--fps", o.fps, "Frame rate of the sequence")->capture_default_str();
  cmd->add_option("--points", o.cfg.tracker.corners.max_count, "Feature points tracked")->capture_default_str();
  cmd->add_option("--cycle", o.cfg.tracker.cycle_length, "Frames per offloading cycle")->capture_default_str();
  cmd->add_option("--link-seed", o.link_seed, "Seed of the loss/delay model")->capture_default_str();
  cmd->add_option("--out", o.out, "JSON lines file (default: stdout)");
}

void eval_tracking_cmd(TrackingOpts& o) {
  require(!o.sequence.empty() || o.script_given, ErrorCode::InvalidArgument, "give --sequence or --script");
  require(o.fps > 0, ErrorCode::InvalidArgument, "--fps must be positive");
  const auto net = parse_net(o.net, o.link_seed);
  o.cfg.transport = net.kind;
  o.cfg.link = net.link;
  harness::Sequence seq;
  std::vector<std::string> shown;
  std::shared_ptr<const retrieval::ReferenceIndex> index;
  if (!o.sequence.empty()) {
    seq = harness::read_sequence(o.sequence);
    const auto info = read_sequence_info(o.sequence);
    require(info.has_value(), ErrorCode::InvalidArgument, "sequence.json missing in " + o.sequence);
    shown = info->references;
    if (!o.index.empty()) {
      index = load_index(o.index);
    } else {
      const fs::path ref_dir =
          o.scene.references.empty() ? fs::path(o.sequence) / "references" : fs::path(o.scene.references);
      index = build_index(load_references(ref_dir));
    }
  } else {
    const auto refs = scene_references(o.scene);
    auto scene = render_scene(refs, o.scene);
    seq = std::move(scene.sequence);
    shown = scene.shown;
    index = o.index.empty() ? build_index(refs) : load_index(o.index);
  }
  o.cfg.frame_period_ms = 1000.0 / o.fps;
  o.cfg.truth_ref_ids = ids_for_names(*index, shown);

  Report out(o.out);
  const auto report = harness::eval_tracking(index, seq, o.cfg);
  out.raw(harness::report_jsonl(report));
  summarize_tracking(out, report, o.sequence.empty() ? o.scene.script : o.sequence);
}

struct TrackOpts {
  std::string server;
  std::vector<std::uint32_t> ref_ids;
  TrackingOpts base;
};

void track_cmd(TrackOpts& o) {
  auto& b = o.base;
  require(b.fps > 0, ErrorCode::InvalidArgument, "--fps must be positive");
  const auto seq = harness::read_sequence(b.sequence);
  if (o.ref_ids.empty()) {
    require(!b.index.empty(), ErrorCode::InvalidArgument,
            "track needs --index or --ref-ids to score against the ground truth");
    const auto info = read_sequence_info(b.sequence);
    require(info.has_value(), ErrorCode::InvalidArgument, "sequence.json missing in " + b.sequence);
    o.ref_ids = ids_for_names(*load_index(b.index), info->references);
  }
  b.cfg.truth_ref_ids = o.ref_ids;
  b.cfg.frame_period_ms = 1000.0 / b.fps;
  if (!b.net.empty()) {
    b.cfg.link = net::parse_link_model(b.net);
    b.cfg.link.seed = b.link_seed;
  }
  Report out(b.out);
  const auto report = harness::track_remote(net::parse_endpoint(o.server), seq, b.cfg);
  out.raw(harness::report_jsonl(report));
  summarize_tracking(out, report, b.sequence);
}

}  // namespace

void add_tracking_commands(CLI::App& app) {
  {
    auto o = std::make_shared<GenSequenceOpts>();
    auto* cmd = app.add_subcommand("gen-sequence", "Render a scripted camera motion with ground truth");
    cmd->add_option("--out", o->out, "Output directory")->required();
    cmd->add_option("--script", o->scene.script, "static, fastmove, rotate, scale, tilt or composite")
        ->capture_default_str();
    add_scene_options(cmd, o->scene);
    cmd->callback([o] { gen_sequence(*o); });
  }
  {
    auto o = std::make_shared<TrackingOpts>();
    auto* cmd = app.add_subcommand("eval-tracking", "Track a sequence against the recognition pipeline");
    auto* seq = cmd->add_option("--sequence", o->sequence, "Directory written by gen-sequence");
    auto* script = cmd->add_option("--script", o->scene.script, "Render this script instead of reading a sequence");
    seq->excludes(script);
    cmd->add_option("--index", o->index, "Index file (default: built from the references)");
    add_scene_options(cmd, o->scene);
    cmd->add_option("--net", o->net, "sim:<drop>,<delay_ms>,<jitter_ms>, loopback or loopback:<drop>,<delay>,<jitter>")
        ->capture_default_str();
    cmd->add_option("--server-ms", o->cfg.server_ms, "Simulated recognition time; negative measures it")
        ->capture_default_str();
    add_recognize_options(cmd, o->cfg.server.recognize);
    add_tracker_options(cmd, *o);
    cmd->callback([o, script] {
      o->script_given = script->count() > 0;
      eval_tracking_cmd(*o);
    });
  }
  {
    auto o = std::make_shared<TrackOpts>();
    o->base.net.clear();
    auto* cmd = app.add_subcommand("track", "Live client: track a sequence against a running server");
    cmd->add_option("--server", o->server, "Server addr:port")->required();
    cmd->add_option("--sequence", o->base.sequence, "Directory written by gen-sequence")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd->add_option("--index", o->base.index, "Index the server runs; maps the sequence's references to ids");
    cmd->add_option("--ref-ids", o->ref_ids, "Index id of each placement, instead of --index");
    cmd->add_option("--net", o->base.net, "Impair the client link: sim:<drop>,<delay_ms>,<jitter_ms>");
    add_tracker_options(cmd, o->base);
    cmd->callback([o] { track_cmd(*o); });
  }
}

}  // namespace mlens::cli
