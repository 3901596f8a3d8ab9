// Copyright 2026 The agglab Authors
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

#include "agglab/rng.hpp"

#include <gtest/gtest.h>

#include <set>
#include <vector>

#include "test_support.hpp"

namespace agglab {
namespace {

TEST(SplitRng, DeterministicGivenSeed) {
  SplitRng a(42), b(42);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(a.next_u64(), b.next_u64());
  }
  SplitRng c(43);
  EXPECT_NE(SplitRng(42).next_u64(), c.next_u64());
}

TEST(SplitRng, ChildStreamsAreStableAndDistinct) {
  SplitRng parent(7);
  const std::uint64_t before = parent.child(3).next_u64();
  parent.next_u64();  // advancing the parent must not move the children
  parent.next_u64();
  EXPECT_EQ(before, parent.child(3).next_u64());
  EXPECT_NE(parent.child(3).next_u64(), parent.child(4).next_u64());
  EXPECT_NE(parent.child(3).next_u64(), parent.child(3).child(0).next_u64());
}

TEST(SplitRng, UnitIntervalIsOpen) {
  SplitRng rng(1);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.next_unit();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    mean += u;
  }
  mean /= 100000.0;
  EXPECT_NEAR(mean, 0.5, 0.005);
}

TEST(SplitRng, GaussianPassesKolmogorovSmirnov) {
  SplitRng rng(2024);
  std::vector<double> sample(100000);
  for (auto& v : sample) v = rng.next_gaussian();
  const double d = agglab_test::ks_statistic_standard_normal(sample);
  EXPECT_LT(d, agglab_test::ks_cutoff_1pct(sample.size()));
}

TEST(SplitRng, NextBelowIsInRangeAndRoughlyUniform) {
  SplitRng rng(5);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const std::uint64_t v = rng.next_below(7);
    ASSERT_LT(v, 7u);
    ++counts[static_cast<int>(v)];
  }
  for (const int c : counts) {
    EXPECT_NEAR(c, 10000, 400);
  }
  EXPECT_THROW(rng.next_below(0), std::invalid_argument);
}

TEST(Sampling, WithoutReplacementIsAPermutationPrefix) {
  SplitRng rng(9);
  const std::vector<Index> sample = sample_without_replacement(100, 40, rng);
  std::set<Index> unique(sample.begin(), sample.end());
  EXPECT_EQ(unique.size(), 40u);
  for (const Index i : sample) {
    EXPECT_GE(i, 0);
    EXPECT_LT(i, 100);
  }
  EXPECT_THROW(sample_without_replacement(10, 11, rng), std::invalid_argument);
}

TEST(Sampling, FloydSubsetMatchesInclusionProbability) {
  // Every index should appear with probability k/n.
  const Index n = 20, k = 5;
  std::vector<int> counts(static_cast<std::size_t>(n), 0);
  SplitRng root(11);
  const int runs = 50000;
  for (int t = 0; t < runs; ++t) {
    SplitRng rng = root.child(static_cast<std::uint64_t>(t));
    for (const Index i : sample_subset_floyd(n, k, rng)) {
      ++counts[static_cast<std::size_t>(i)];
    }
  }
  for (const int c : counts) {
    EXPECT_NEAR(static_cast<double>(c) / runs, 0.25, 0.01);
  }
}

}  // namespace
}  // namespace agglab
