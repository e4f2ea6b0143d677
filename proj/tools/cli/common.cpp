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

#include "common.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "mlens/common/error.hpp"
#include "mlens/harness/scene.hpp"
#include "mlens/img/io.hpp"

namespace mlens::cli {

namespace fs = std::filesystem;

References load_references(const fs::path& dir) {
  require(fs::is_directory(dir), ErrorCode::InvalidArgument, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  References refs;
  for (const auto& f : files) {
    try {
      refs.images.push_back(read_image(f));
      refs.names.push_back(f.filename().string());
    } catch (const Error& e) {
      std::cerr << "warning: skipping " << f.filename().string() << ": " << e.what() << "\n";
    }
  }
  require(!refs.images.empty(), ErrorCode::InvalidArgument, "no readable images in " + dir.string());
  return refs;
}

References synthetic_references(std::size_t count, std::uint64_t first_seed) {
  References refs;
  char name[32];
  for (std::size_t i = 0; i < count; ++i) {
    std::snprintf(name, sizeof(name), "poster_%04zu.png", i);
    refs.names.emplace_back(name);
    refs.images.push_back(harness::make_sized_poster(first_seed + i));
  }
  return refs;
}

void write_references(const fs::path& dir, const References& refs) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < refs.images.size(); ++i) write_png(dir / refs.names[i], refs.images[i]);
}

json build_report_json(const retrieval::BuildReport& r) {
  return {{"record", "build"},
          {"images", r.images},
          {"skipped", r.skipped},
          {"descriptors", r.descriptors},
          {"components", r.components},
          {"em_iterations", r.em_iterations},
          {"describe_ms", r.describe_ms},
          {"train_ms", r.train_ms},
          {"encode_ms", r.encode_ms},
          {"lsh_ms", r.lsh_ms},
          {"warnings", r.warnings}};
}

std::shared_ptr<const retrieval::ReferenceIndex> build_index(const References& refs,
                                                            const retrieval::IndexBuildConfig& cfg) {
  std::vector<retrieval::NamedImage> named;
  for (std::size_t i = 0; i < refs.images.size(); ++i)
    named.push_back({refs.names[i], refs.images[i], static_cast<std::uint32_t>(i)});
  retrieval::BuildReport report;
  auto index = std::make_shared<const retrieval::ReferenceIndex>(retrieval::ReferenceIndex::build(named, cfg, &report));
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
  std::fprintf(stderr, "index: %zu references, %zu descriptors, K=%zu after %d EM iterations (%.1f s)\n",
               report.images, report.descriptors, report.components, report.em_iterations,
               (report.describe_ms + report.train_ms + report.encode_ms + report.lsh_ms) / 1000.0);
  return index;
}

std::shared_ptr<const retrieval::ReferenceIndex> load_index(const fs::path& path) {
  return std::make_shared<const retrieval::ReferenceIndex>(retrieval::ReferenceIndex::load(path));
}

std::vector<std::uint32_t> ids_for_names(const retrieval::ReferenceIndex& index, const std::vector<std::string>& names) {
  std::vector<std::uint32_t> ids;
  for (const auto& n : names) {
    const auto& entries = index.entries();
    auto it = std::find_if(entries.begin(), entries.end(), [&](const retrieval::ReferenceEntry& e) { return e.name == n; });
    require(it != entries.end(), ErrorCode::InvalidArgument, "reference '" + n + "' is not in the index");
    ids.push_back(it->id);
  }
  return ids;
}

NetChoice parse_net(const std::string& text, std::uint64_t seed) {
  NetChoice c;
  const std::string loopback = "loopback";
  if (text.rfind(loopback, 0) == 0) {
    c.kind = harness::TransportKind::Loopback;
    const std::string rest = text.substr(loopback.size());
    if (!rest.empty()) {
      require(rest[0] == ':', ErrorCode::InvalidArgument, "expected loopback or loopback:<drop>,<delay_ms>,<jitter_ms>");
      c.link = net::parse_link_model("sim" + rest);
    }
  } else {
    c.link = net::parse_link_model(text);
  }
  c.link.seed = seed;
  return c;
}

void add_seg_options(CLI::App* cmd, seg::SegConfig& s) {
  cmd->add_option("--seg-sigma", s.sigma, "Gaussian blur before the variance map")->capture_default_str();
  cmd->add_option("--seg-window", s.window, "Variance window (px)")->capture_default_str();
  cmd->add_option("--seg-stride", s.stride, "Variance window stride (px)")->capture_default_str();
  cmd->add_option("--seg-var-threshold", s.var_threshold, "Texture threshold (intensity^2)")->capture_default_str();
  cmd->add_option("--seg-morph-radius", s.morph_radius, "Opening/closing radius (cells)")->capture_default_str();
  cmd->add_option("--seg-min-area", s.min_area_px, "Smallest component kept (px^2)")->capture_default_str();
  cmd->add_option("--seg-patch-size", s.patch_size, "Patch side handed to description")->capture_default_str();
  cmd->add_option("--seg-merge-iou", s.merge_iou, "Merge overlapping components above this IoU")->capture_default_str();
}

void add_recognize_options(CLI::App* cmd, server::RecognizeConfig& r) {
  cmd->add_flag("--no-segmentation{false}", r.segmentation, "Describe the whole frame as one patch");
  add_seg_options(cmd, r.seg);
  cmd->add_option("--ransac-threshold", r.ransac.threshold_px, "Inlier reprojection threshold (px)")
      ->capture_default_str();
  cmd->add_option("--ransac-iterations", r.ransac.max_iterations)->capture_default_str();
  cmd->add_option("--ransac-confidence", r.ransac.confidence)->capture_default_str();
  cmd->add_option("--ransac-min-inliers", r.ransac.min_inliers)->capture_default_str();
  cmd->add_option("--neighbors", r.neighbors, "Candidates verified per patch")->capture_default_str();
  cmd->add_option("--min-matches", r.min_matches, "Matches needed before verification")->capture_default_str();
}

Report::Report(const std::string& out_path) {
  if (out_path.empty() || out_path == "-") return;
  file_.open(out_path);
  require(file_.good(), ErrorCode::IoError, "cannot write " + out_path);
  to_file_ = true;
}

void Report::record(const json& j) { raw(j.dump() + "\n"); }

void Report::raw(const std::string& jsonl) {
  if (to_file_)
    file_ << jsonl;
  else
    std::cout << jsonl;
}

std::ostream& Report::summary() { return to_file_ ? std::cout : std::cerr; }

void write_sequence_info(const fs::path& dir, const SequenceInfo& info) {
  std::ofstream out(dir / "sequence.json");
  require(out.good(), ErrorCode::IoError, "cannot write " + (dir / "sequence.json").string());
  out << json{{"script", info.script}, {"width", info.width}, {"height", info.height}, {"references", info.references}}
             .dump(2)
      << "\n";
}

std::optional<SequenceInfo> read_sequence_info(const fs::path& dir) {
  std::ifstream in(dir / "sequence.json");
  if (!in) return std::nullopt;
  try {
    const json j = json::parse(in);
    SequenceInfo info;
    info.script = j.value("script", "");
    info.width = j.value("width", 0);
    info.height = j.value("height", 0);
    info.references = j.at("references").get<std::vector<std::string>>();
    return info;
  } catch (const json::exception& e) {
    fail(ErrorCode::IoError, "bad sequence.json: " + std::string(e.what()));
  }
}

std::vector<harness::Placement> side_by_side(const References& refs, const std::vector<std::size_t>& shown, int width,
                                             int height, double target_height) {
  std::vector<harness::Placement> out;
  const int n = static_cast<int>(shown.size());
  for (int k = 0; k < n; ++k) {
    const std::size_t r = shown[k];
    require(r < refs.images.size(), ErrorCode::InvalidArgument, "reference index out of range");
    auto pl = harness::centered_placement(r, refs.images[r].width(), refs.images[r].height(), width / n, height,
                                          target_height);
    pl.to_frame = Homography::translation(static_cast<double>(k) * width / n, 0) * pl.to_frame;
    out.push_back(pl);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      require(used == item.size(), ErrorCode::InvalidArgument, "bad number '" + item + "'");
    } catch (const std::logic_error&) {
      fail(ErrorCode::InvalidArgument, "bad number '" + item + "'");
    }
  }
  require(!out.empty(), ErrorCode::InvalidArgument, "empty list");
  return out;
}

}  // namespace mlens::cli
