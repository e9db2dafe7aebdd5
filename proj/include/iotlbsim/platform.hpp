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

#include <utility>

#include "iotlbsim/clock.hpp"
#include "iotlbsim/error.hpp"
#include "iotlbsim/iotlb.hpp"
#include "iotlbsim/timing.hpp"

namespace iotlbsim {

/// One IOMMU with its IOTLB, the latency behavior observed by DMA devices
/// and the simulated clock. `flush_available` models whether the CPU side
/// can issue global IOTLB invalidations (needs kernel privileges).
class Platform {
 public:
  Platform(TlbConfig tlb_config, LatencyModel latency, bool flush_available = true)
      : tlb(std::move(tlb_config)), timing(std::move(latency)), flush_available_(flush_available) {}

  bool flush_available() const { return flush_available_; }

  void flush_all() {
    if (!flush_available_)
      throw Error(Errc::FlushUnavailable, "IOTLB flushes are not available on this platform");
    tlb.flush_all();
  }

  Tlb tlb;
  LatencySampler timing;
  SimClock clock;

 private:
  bool flush_available_;
};

}  // namespace iotlbsim
