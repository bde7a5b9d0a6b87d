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

#ifndef BIMODAL_TYPES_HPP_
#define BIMODAL_TYPES_HPP_

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bimodal {

using NodeId = std::int32_t;
using LinkId = std::int32_t;
using ServiceId = std::int32_t;
using TaskId = std::int32_t;

inline constexpr NodeId kNoNode = -1;
inline constexpr LinkId kPublicLink = -1;

// Bytes per second carried by a 1 Mbps stream.
inline constexpr double kBytesPerMbps = 125000.0;
inline constexpr double kBytesPerMB = 1.0e6;

// Slack used when comparing a demand against a residual.
inline constexpr double kCapacityEps = 1e-9;

enum class ErrorCode {
  kInvalidParameters,
  kUnknownResource,
  kDegenerateShrinkage,
  kInstanceTooLarge,
  kNoFeasibleMap,
  kInsufficientSamples,
  kMalformedLog,
  kConfigParse,
  kUnknownKey,
  kTypeError,
  kRangeError,
  kConfigInvalid,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

enum class PlatformMode { kDedicatedOnly, kPublicOnly, kBimodal };

std::string_view to_string(PlatformMode mode);
PlatformMode parse_platform_mode(std::string_view text);

inline bool allows_dedicated(PlatformMode m) {
  return m != PlatformMode::kPublicOnly;
}
inline bool allows_public(PlatformMode m) {
  return m != PlatformMode::kDedicatedOnly;
}

// How a segment between two consecutive processing positions is carried.
enum class LinkKind : std::uint8_t {
  kLocal,                // both endpoints on the same server, no network
  kDirectDedicated,      // exactly one dedicated link
  kForwardingDedicated,  // two or more dedicated links through relays
  kPublic,               // overlay hop over the sender's uplink
};

std::string_view to_string(LinkKind kind);

// A capacity-bearing resource of the platform.
struct ResourceRef {
  enum class Kind : std::uint8_t { kCpu, kLink, kUplink };
  Kind kind = Kind::kCpu;
  std::int32_t id = 0;

  static ResourceRef cpu(NodeId n) { return {Kind::kCpu, n}; }
  static ResourceRef link(LinkId l) { return {Kind::kLink, l}; }
  static ResourceRef uplink(NodeId n) { return {Kind::kUplink, n}; }

  auto operator<=>(const ResourceRef&) const = default;
};

std::string to_string(const ResourceRef& ref);

}  // namespace bimodal

#endif  // BIMODAL_TYPES_HPP_
