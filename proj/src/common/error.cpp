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

#include "mlens/common/error.hpp"

namespace mlens {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::InsufficientCorrespondences: return "InsufficientCorrespondences";
    case ErrorCode::DegenerateHomography: return "DegenerateHomography";
    case ErrorCode::DegenerateQuad: return "DegenerateQuad";
    case ErrorCode::SessionError: return "SessionError";
    case ErrorCode::EmptyPatch: return "EmptyPatch";
    case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorCode::MalformedMessage: return "MalformedMessage";
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::StartupError: return "StartupError";
    case ErrorCode::InvalidScript: return "InvalidScript";
    case ErrorCode::BuildFailed: return "BuildFailed";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace mlens
