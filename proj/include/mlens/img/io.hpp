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

#include <filesystem>

#include "mlens/img/image.hpp"

namespace mlens {

/// Loads PGM (P2/P5) or PNG (any colour type, converted to luma). Throws
/// Error(IoError) on unreadable or unsupported files.
ImageGray8 read_image(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const ImageGray8& img);
void write_png(const std::filesystem::path& path, const ImageGray8& img);

}  // namespace mlens
