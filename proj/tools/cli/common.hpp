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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mlens/harness/eval.hpp"
#include "mlens/index/reference_index.hpp"
#include "mlens/server/server.hpp"

namespace mlens::cli {

using nlohmann::json;

void add_index_commands(CLI::App& app);
void add_tracking_commands(CLI::App& app);
void add_eval_commands(CLI::App& app);

/// Reference images with the names an index built from them would carry.
struct References {
  std::vector<std::string> names;
  std::vector<ImageGray8> images;
};

/// Readable images of `dir` in filename order; unreadable files are warned
/// about on stderr and skipped.
References load_references(const std::filesystem::path& dir);
/// make_sized_poster(first_seed + i), named poster_NNNN.png.
References synthetic_references(std::size_t count, std::uint64_t first_seed);
void write_references(const std::filesystem::path& dir, const References& refs);

/// Builds in memory, printing the stage report to stderr.
std::shared_ptr<const retrieval::ReferenceIndex> build_index(const References& refs,
                                                            const retrieval::IndexBuildConfig& cfg = {});
std::shared_ptr<const retrieval::ReferenceIndex> load_index(const std::filesystem::path& path);
/// Index id of each name. Throws InvalidArgument for a name not in the index.
std::vector<std::uint32_t> ids_for_names(const retrieval::ReferenceIndex& index, const std::vector<std::string>& names);

json build_report_json(const retrieval::BuildReport& report);

/// "sim:<drop>,<delay>,<jitter>" selects the simulated transport, "loopback"
/// a UDP server on 127.0.0.1, optionally impaired as
/// "loopback:<drop>,<delay>,<jitter>".
struct NetChoice {
  harness::TransportKind kind = harness::TransportKind::Simulated;
  net::LinkModel link;
};
NetChoice parse_net(const std::string& text, std::uint64_t seed);

/// --seg-* and --ransac-* overrides plus the recognition switches.
void add_recognize_options(CLI::App* cmd, server::RecognizeConfig& cfg);
void add_seg_options(CLI::App* cmd, seg::SegConfig& cfg);

/// Records go to --out when given, otherwise to stdout; the summary then
/// moves to stderr so stdout stays one record per line.
class Report {
 public:
  explicit Report(const std::string& out_path);
  void record(const json& j);
  void raw(const std::string& jsonl);
  std::ostream& summary();

 private:
  std::ofstream file_;
  bool to_file_ = false;
};

/// sequence.json next to the frames: script, frame size and the name of the
/// reference shown by each placement.
struct SequenceInfo {
  std::string script;
  int width = 0;
  int height = 0;
  std::vector<std::string> references;
};
void write_sequence_info(const std::filesystem::path& dir, const SequenceInfo& info);
std::optional<SequenceInfo> read_sequence_info(const std::filesystem::path& dir);

/// Places `shown` side by side, each centred in its slot of the frame with
/// the given height.
std::vector<harness::Placement> side_by_side(const References& refs, const std::vector<std::size_t>& shown, int width,
                                             int height, double target_height);

std::vector<int> parse_int_list(const std::string& text);

}  // namespace mlens::cli
