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

#include <algorithm>
#include <chrono>
#include <cstdint>

#include "iotlbsim/types.hpp"

namespace iotlbsim {

using Nanos = std::chrono::nanoseconds;

/// The monitor device is clocked at 200 MHz.
inline constexpr Nanos kMonitorCycle{5};

constexpr Nanos cycles_to_time(std::uint64_t cycles) {
  return kMonitorCycle * static_cast<Nanos::rep>(cycles);
}

constexpr double to_seconds(Nanos t) {
  return std::chrono::duration<double>(t).count();
}

/// Simulated wall clock shared by all agents on one platform.
class SimClock {
 public:
  Nanos now() const { return now_; }

  void advance(Nanos dt) {
    if (dt.count() > 0) now_ += dt;
  }

  void advance_cycles(std::uint64_t cycles) { advance(cycles_to_time(cycles)); }

  // Never moves backwards.
  void advance_to(Nanos t) { now_ = std::max(now_, t); }

 private:
  Nanos now_{0};
};

}  // namespace iotlbsim
