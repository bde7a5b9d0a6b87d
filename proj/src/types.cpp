// Copyright 2026 The Bimodal Stream Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bimodal/types.hpp"

namespace bimodal {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidParameters: return "invalid-parameters";
    case ErrorCode::kUnknownResource: return "unknown-resource";
    case ErrorCode::kDegenerateShrinkage: return "degenerate-shrinkage";
    case ErrorCode::kInstanceTooLarge: return "instance-too-large";
    case ErrorCode::kNoFeasibleMap: return "no-feasible-map";
    case ErrorCode::kInsufficientSamples: return "insufficient-samples";
    case ErrorCode::kMalformedLog: return "malformed-log";
    case ErrorCode::kConfigParse: return "config-parse-error";
    case ErrorCode::kUnknownKey: return "unknown-key";
    case ErrorCode::kTypeError: return "type-error";
    case ErrorCode::kRangeError: return "range-error";
    case ErrorCode::kConfigInvalid: return "config-invalid";
  }
  return "unknown-error";
}

std::string_view to_string(PlatformMode mode) {
  switch (mode) {
    case PlatformMode::kDedicatedOnly: return "dedicated-only";
    case PlatformMode::kPublicOnly: return "public-only";
    case PlatformMode::kBimodal: return "bimodal";
  }
  return "bimodal";
}

PlatformMode parse_platform_mode(std::string_view text) {
  if (text == "dedicated-only") return PlatformMode::kDedicatedOnly;
  if (text == "public-only") return PlatformMode::kPublicOnly;
  if (text == "bimodal") return PlatformMode::kBimodal;
  throw Error(ErrorCode::kTypeError,
              "unknown platform mode '" + std::string(text) + "'");
}

std::string_view to_string(LinkKind kind) {
  switch (kind) {
    case LinkKind::kLocal: return "local";
    case LinkKind::kDirectDedicated: return "direct";
    case LinkKind::kForwardingDedicated: return "forwarding";
    case LinkKind::kPublic: return "public";
  }
  return "local";
}

std::string to_string(const ResourceRef& ref) {
  switch (ref.kind) {
    case ResourceRef::Kind::kCpu: return "cpu:" + std::to_string(ref.id);
    case ResourceRef::Kind::kLink: return "link:" + std::to_string(ref.id);
    case ResourceRef::Kind::kUplink: return "uplink:" + std::to_string(ref.id);
  }
  return "?";
}

}  // namespace bimodal
