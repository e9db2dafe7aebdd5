// Copyright 2026 The iotlbsim Authors.
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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>

namespace iotlbsim {

/// One 4 KiB I/O-virtual page. The 12 offset bits are never translated, so
/// only the page number is tracked.
struct PageAddress {
  static constexpr std::uint64_t kLimit = std::uint64_t{1} << 52;

  std::uint64_t number = 0;

  friend constexpr auto operator<=>(const PageAddress&, const PageAddress&) = default;
};

struct DeviceId {
  std::uint32_t value = 0;
  friend constexpr auto operator<=>(const DeviceId&, const DeviceId&) = default;
};

struct DomainId {
  // Domains occupy the upper 12 bits of a packed 64-bit entry key; the
  // all-ones key is reserved.
  static constexpr std::uint32_t kLimit = (1u << 12) - 1;

  std::uint32_t value = 0;
  friend constexpr auto operator<=>(const DomainId&, const DomainId&) = default;
};

enum class AccessOutcome { Hit, Miss };

constexpr std::string_view to_string(AccessOutcome outcome) {
  return outcome == AccessOutcome::Hit ? "hit" : "miss";
}

/// Latency in monitor clock cycles (200 MHz).
using Cycles = std::uint32_t;

}  // namespace iotlbsim

template <>
struct std::hash<iotlbsim::PageAddress> {
  std::size_t operator()(const iotlbsim::PageAddress& p) const noexcept {
    return std::hash<std::uint64_t>{}(p.number);
  }
};

template <>
struct std::hash<iotlbsim::DeviceId> {
  std::size_t operator()(const iotlbsim::DeviceId& d) const noexcept {
    return std::hash<std::uint32_t>{}(d.value);
  }
};
