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
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "iotlbsim/error.hpp"
#include "iotlbsim/rng.hpp"
#include "iotlbsim/types.hpp"

namespace iotlbsim {

struct LatencyPeak {
  double mean_cycles = 0;
  double weight = 1;

  friend bool operator==(const LatencyPeak&, const LatencyPeak&) = default;
};

/// Bimodal latency mixture per access outcome. Defaults are the memory read
/// latencies of a DMA device at 200 MHz: hits around 160/185 cycles, misses
/// around 225/270 cycles.
struct LatencyModel {
  std::vector<LatencyPeak> hit_peaks{{160, 0.5}, {185, 0.5}};
  std::vector<LatencyPeak> miss_peaks{{225, 0.5}, {270, 0.5}};
  double jitter_stddev = 3.0;
  std::uint64_t rng_seed = 0;

  void validate() const {
    auto check = [](const std::vector<LatencyPeak>& peaks, const char* name) {
      if (peaks.empty()) throw Error(Errc::InvalidConfig, std::string(name) + " is empty");
      double sum = 0;
      for (const LatencyPeak& p : peaks) {
        if (!(p.mean_cycles > 0) || !(p.weight >= 0))
          throw Error(Errc::InvalidConfig, std::string(name) + " has a non-positive mean or negative weight");
        sum += p.weight;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw Error(Errc::InvalidConfig, std::string(name) + " weights must sum to 1");
    };
    check(hit_peaks, "hit_peaks");
    check(miss_peaks, "miss_peaks");
    if (!(jitter_stddev >= 0)) throw Error(Errc::InvalidConfig, "jitter_stddev must be >= 0");
  }

  double max_hit_mean() const {
    double m = 0;
    for (const auto& p : hit_peaks) m = std::max(m, p.mean_cycles);
    return m;
  }

  double min_miss_mean() const {
    double m = INFINITY;
    for (const auto& p : miss_peaks) m = std::min(m, p.mean_cycles);
    return m;
  }

  /// Hit and miss distributions are at least three jitter deviations clear
  /// of each other.
  bool separable() const {
    return max_hit_mean() + 3 * jitter_stddev < min_miss_mean() - 3 * jitter_stddev;
  }

  friend bool operator==(const LatencyModel&, const LatencyModel&) = default;
};

struct Threshold {
  Cycles cycles = 0;
  friend constexpr auto operator<=>(const Threshold&, const Threshold&) = default;
};

/// Midpoint of the latency gap, rounded down.
inline Threshold calibrate(const LatencyModel& model) {
  model.validate();
  if (!model.separable())
    throw Error(Errc::CalibrationError,
                "hit and miss latency distributions overlap within 3 standard deviations");
  const double mid = (model.max_hit_mean() + model.min_miss_mean()) / 2.0;
  return Threshold{static_cast<Cycles>(std::floor(mid))};
}

/// Slow accesses are misses. Equality counts as fast.
constexpr AccessOutcome classify(Cycles cycles, Threshold threshold) {
  return cycles > threshold.cycles ? AccessOutcome::Miss : AccessOutcome::Hit;
}

/// Draws latency samples from a LatencyModel. Owns its PRNG; not thread safe.
///
/// Samples are whole cycles: each peak is a normal distribution rounded to
/// the nearest cycle and truncated at eight standard deviations. The
/// cumulative distribution is tabulated once so a sample costs one uniform
/// draw.
class LatencySampler {
 public:
  explicit LatencySampler(LatencyModel model)
      : model_(std::move(model)), rng_(derive_seed(model_.rng_seed, "latency")) {
    model_.validate();
    hit_ = Table::build(model_.hit_peaks, model_.jitter_stddev);
    miss_ = Table::build(model_.miss_peaks, model_.jitter_stddev);
  }

  const LatencyModel& model() const { return model_; }

  Cycles sample(AccessOutcome outcome) {
    return (outcome == AccessOutcome::Hit ? hit_ : miss_).draw(uniform_unit(rng_));
  }

  /// Probability that a sample of `outcome` equals `cycles`.
  double probability(AccessOutcome outcome, Cycles cycles) const {
    return (outcome == AccessOutcome::Hit ? hit_ : miss_).probability(cycles);
  }

 private:
  struct Table {
    static constexpr std::size_t kGuide = 1024;

    Cycles first = 1;
    std::vector<double> cdf;
    std::vector<std::uint32_t> guide;

    static Table build(const std::vector<LatencyPeak>& peaks, double sigma) {
      double lo = INFINITY;
      double hi = 0;
      for (const LatencyPeak& p : peaks) {
        lo = std::min(lo, p.mean_cycles - 8 * sigma);
        hi = std::max(hi, p.mean_cycles + 8 * sigma);
      }
      Table t;
      t.first = static_cast<Cycles>(std::max(1.0, std::round(lo)));
      const Cycles last = static_cast<Cycles>(std::max(1.0, std::round(hi)));
      std::vector<double> mass(last - t.first + 1, 0.0);
      for (const LatencyPeak& p : peaks) {
        if (p.weight == 0) continue;
        const double m = p.mean_cycles;
        auto phi = [&](double x) { return 0.5 * std::erfc(-(x - m) / (sigma * M_SQRT2)); };
        for (Cycles c = t.first; c <= last; ++c) {
          double share;
          if (sigma == 0) {
            share = std::max(1.0, std::round(m)) == c ? 1.0 : 0.0;
          } else {
            // Everything below the table folds into the first bucket, the
            // tail above the top into the last one.
            const double below = c == t.first ? 0.0 : phi(c - 0.5);
            const double upto = c == last ? 1.0 : phi(c + 0.5);
            share = upto - below;
          }
          mass[c - t.first] += p.weight * share;
        }
      }
      double total = 0;
      for (double m : mass) total += m;
      t.cdf.resize(mass.size());
      double acc = 0;
      for (std::size_t i = 0; i < mass.size(); ++i) {
        acc += mass[i] / total;
        t.cdf[i] = acc;
      }
      t.cdf.back() = 1.0;
      // guide[k] is the first bucket whose cdf exceeds k / kGuide.
      t.guide.resize(kGuide);
      std::size_t i = 0;
      for (std::size_t k = 0; k < kGuide; ++k) {
        const double u = static_cast<double>(k) / kGuide;
        while (i + 1 < t.cdf.size() && t.cdf[i] <= u) ++i;
        t.guide[k] = static_cast<std::uint32_t>(i);
      }
      return t;
    }

    Cycles draw(double u) const {
      std::size_t i = guide[static_cast<std::size_t>(u * kGuide)];
      while (i + 1 < cdf.size() && cdf[i] <= u) ++i;
      return first + static_cast<Cycles>(i);
    }

    double probability(Cycles c) const {
      if (c < first || c - first >= cdf.size()) return 0.0;
      const std::size_t i = c - first;
      return cdf[i] - (i == 0 ? 0.0 : cdf[i - 1]);
    }
  };

  LatencyModel model_;
  Rng rng_;
  Table hit_;
  Table miss_;
};

}  // namespace iotlbsim
