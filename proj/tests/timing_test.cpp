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


#include <gtest/gtest.h>

#include <cmath>

#include "iotlbsim/timing.hpp"

namespace iotlbsim {
namespace {

TEST(Calibrate, DefaultModelGivesMidpointOfGap) {
  // Highest hit peak 185, lowest miss peak 225.
  EXPECT_EQ(calibrate(LatencyModel{}).cycles, 205u);
}

TEST(Calibrate, RoundsDown) {
  LatencyModel m;
  m.hit_peaks = {{100, 1.0}};
  m.miss_peaks = {{151, 1.0}};
  m.jitter_stddev = 1;
  EXPECT_EQ(calibrate(m).cycles, 125u);
}

TEST(Calibrate, OverlappingPeaksAreRejected) {
  LatencyModel m;
  m.miss_peaks = {{200, 1.0}};
  m.jitter_stddev = 3;  // 185 + 9 >= 200 - 9
  try {
    calibrate(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CalibrationError);
  }
}

TEST(Classify, ThresholdItselfIsAHit) {
  EXPECT_EQ(classify(205, Threshold{205}), AccessOutcome::Hit);
  EXPECT_EQ(classify(206, Threshold{205}), AccessOutcome::Miss);
  EXPECT_EQ(classify(0, Threshold{205}), AccessOutcome::Hit);
}

TEST(LatencyModel, WeightsMustSumToOne) {
  LatencyModel m;
  m.hit_peaks = {{160, 0.5}, {185, 0.4}};
  EXPECT_THROW(m.validate(), Error);
  m.hit_peaks = {};
  EXPECT_THROW(m.validate(), Error);
}

double normal_mass(double mean, double sigma, double lo, double hi) {
  // Simpson's rule on the density.
  const int n = 200;
  const double h = (hi - lo) / n;
  auto pdf = [&](double x) { return std::exp(-0.5 * std::pow((x - mean) / sigma, 2)) / (sigma * std::sqrt(2 * M_PI)); };
  double sum = pdf(lo) + pdf(hi);
  for (int i = 1; i < n; ++i) sum += pdf(lo + i * h) * (i % 2 ? 4 : 2);
  return sum * h / 3;
}

TEST(LatencySampler, CycleProbabilitiesMatchIntegratedDensity) {
  LatencySampler s(LatencyModel{});
  for (Cycles c = 150; c < 200; ++c) {
    const double expected = 0.5 * normal_mass(160, 3, c - 0.5, c + 0.5) + 0.5 * normal_mass(185, 3, c - 0.5, c + 0.5);
    EXPECT_NEAR(s.probability(AccessOutcome::Hit, c), expected, 1e-9) << c;
  }
  double total = 0;
  for (Cycles c = 0; c < 400; ++c) total += s.probability(AccessOutcome::Miss, c);
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(LatencySampler, EmpiricalMeansMatchMixture) {
  LatencySampler s(LatencyModel{});
  const int n = 100000;
  double hit = 0;
  double miss = 0;
  for (int i = 0; i < n; ++i) {
    hit += s.sample(AccessOutcome::Hit);
    miss += s.sample(AccessOutcome::Miss);
  }
  EXPECT_NEAR(hit / n, 172.5, 0.3);
  EXPECT_NEAR(miss / n, 247.5, 0.3);
}

TEST(LatencySampler, ZeroJitterOnlyProducesPeakValues) {
  LatencyModel m;
  m.jitter_stddev = 0;
  LatencySampler s(m);
  for (int i = 0; i < 1000; ++i) {
    const Cycles h = s.sample(AccessOutcome::Hit);
    const Cycles x = s.sample(AccessOutcome::Miss);
    EXPECT_TRUE(h == 160 || h == 185) << h;
    EXPECT_TRUE(x == 225 || x == 270) << x;
  }
}

TEST(LatencySampler, SameSeedSameSequence) {
  LatencyModel m;
  m.rng_seed = 42;
  LatencySampler a(m);
  LatencySampler b(m);
  m.rng_seed = 43;
  LatencySampler c(m);
  int same = 0;
  for (int i = 0; i < 1000; ++i) {
    const Cycles x = a.sample(AccessOutcome::Miss);
    EXPECT_EQ(x, b.sample(AccessOutcome::Miss));
    same += x == c.sample(AccessOutcome::Miss) ? 1 : 0;
  }
  EXPECT_LT(same, 1000);
}

TEST(LatencySampler, DefaultModelClassifiesAlmostPerfectly) {
  LatencySampler s(LatencyModel{});
  const Threshold t = calibrate(LatencyModel{});
  int wrong = 0;
  for (int i = 0; i < 100000; ++i) {
    wrong += classify(s.sample(AccessOutcome::Hit), t) != AccessOutcome::Hit;
    wrong += classify(s.sample(AccessOutcome::Miss), t) != AccessOutcome::Miss;
  }
  EXPECT_EQ(wrong, 0);
}

}  // namespace
}  // namespace iotlbsim
