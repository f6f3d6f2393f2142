#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "promim/masking.hpp"
#include "test_support.hpp"

namespace promim {
namespace {

using testing::error_kind;

constexpr double kTableRatios[] = {0.25, 0.5, 0.75, 0.95, 0.99};

void expect_partition(const MaskResult& m, std::size_t n) {
  EXPECT_EQ(m.n_patches, n);
  EXPECT_TRUE(std::is_sorted(m.visible.begin(), m.visible.end()));
  EXPECT_TRUE(std::is_sorted(m.masked.begin(), m.masked.end()));
  std::vector<std::size_t> all = m.visible;
  all.insert(all.end(), m.masked.begin(), m.masked.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(n);
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(all, expected);
}

PatchGrid numbered_grid(std::size_t side, std::size_t patch_dim) {
  PatchGrid g{side, side, patch_dim, {}};
  for (std::size_t i = 0; i < side * side * patch_dim; ++i) g.values.push_back(static_cast<double>(i));
  return g;
}

TEST(MaskedCount, FloorOfRatio) {
  EXPECT_EQ(masked_count(16, 0.0), 0u);
  EXPECT_EQ(masked_count(16, 0.25), 4u);
  EXPECT_EQ(masked_count(16, 0.5), 8u);
  EXPECT_EQ(masked_count(16, 0.75), 12u);
  EXPECT_EQ(masked_count(16, 0.95), 15u);
  EXPECT_EQ(masked_count(16, 0.99), 15u);
  EXPECT_EQ(masked_count(10, 0.33), 3u);
}

TEST(RandomMask, RatioZeroKeepsEverything) {
  Rng rng(1);
  const MaskResult m = sample_random_mask(16, 0.0, rng);
  EXPECT_EQ(m.visible.size(), 16u);
  EXPECT_TRUE(m.masked.empty());
}

TEST(RandomMask, ThreeQuartersLeavesFourVisible) {
  Rng rng(2);
  EXPECT_EQ(sample_random_mask(16, 0.75, rng).visible.size(), 4u);
}

TEST(RandomMask, CountLawAndPartitionOnTableGrid) {
  Rng rng(3);
  for (double ratio : kTableRatios) {
    for (int i = 0; i < 100; ++i) {
      const MaskResult m = sample_random_mask(16, ratio, rng);
      EXPECT_EQ(m.masked.size(), static_cast<std::size_t>(std::floor(ratio * 16)));
      expect_partition(m, 16);
    }
  }
}

TEST(RandomMask, MarginalFrequencyIsUniform) {
  Rng rng(4);
  std::vector<int> hits(16, 0);
  constexpr int kDraws = 10000;
  for (int i = 0; i < kDraws; ++i) {
    for (std::size_t k : sample_random_mask(16, 0.5, rng).masked) ++hits[k];
  }
  for (int h : hits) EXPECT_NEAR(static_cast<double>(h) / kDraws, 0.5, 0.02);
}

TEST(RandomMask, DeterministicGivenRngState) {
  Rng a(99), b(99);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_random_mask(16, 0.5, a), sample_random_mask(16, 0.5, b));
}

TEST(RandomMask, RatioOutsideRangeIsInputError) {
  Rng rng(5);
  for (double bad : {-0.1, 1.0, 1.5, std::nan("")}) {
    EXPECT_EQ(error_kind([&] { sample_random_mask(16, bad, rng); }), ErrorKind::kInput) << bad;
  }
  EXPECT_EQ(error_kind([&] { sample_block_mask(4, 4, 1.0, rng); }), ErrorKind::kInput);
}

TEST(BlockMask, RatioZeroMasksNothing) {
  Rng rng(6);
  const MaskResult m = sample_block_mask(4, 4, 0.0, rng);
  EXPECT_TRUE(m.masked.empty());
  EXPECT_EQ(m.visible.size(), 16u);
}

TEST(BlockMask, CountLawAndPartitionOnTableGrid) {
  Rng rng(7);
  for (double ratio : kTableRatios) {
    for (int i = 0; i < 100; ++i) {
      const MaskResult m = sample_block_mask(4, 4, ratio, rng);
      EXPECT_EQ(m.masked.size(), static_cast<std::size_t>(std::floor(ratio * 16)));
      expect_partition(m, 16);
    }
  }
}

// With minimum rectangle area 4, half of a 4x4 grid is covered by at most a
// few rectangles; at least one 2x2 block of masked cells must survive the trim.
TEST(BlockMask, HalfMaskContainsARectangle) {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const MaskResult m = sample_block_mask(4, 4, 0.5, rng);
    ASSERT_EQ(m.masked.size(), 8u);
    const std::set<std::size_t> masked(m.masked.begin(), m.masked.end());
    bool found = false;
    for (std::size_t y = 0; y + 1 < 4 && !found; ++y) {
      for (std::size_t x = 0; x + 1 < 4 && !found; ++x) {
        found = masked.count(y * 4 + x) && masked.count(y * 4 + x + 1) &&
                masked.count((y + 1) * 4 + x) && masked.count((y + 1) * 4 + x + 1);
      }
    }
    EXPECT_TRUE(found) << "draw " << i;
  }
}

TEST(BlockMask, MoreAdjacentThanRandom) {
  for (double ratio : {0.25, 0.5, 0.75}) {
    double block = 0.0, random = 0.0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
      Rng rb(derive_seed(seed, {1})), rr(derive_seed(seed, {2}));
      block += static_cast<double>(masked_adjacency(sample_block_mask(4, 4, ratio, rb), 4, 4));
      random += static_cast<double>(masked_adjacency(sample_random_mask(16, ratio, rr), 4, 4));
    }
    EXPECT_GT(block, random) << ratio;
  }
}

TEST(BlockMask, Deterministic) {
  Rng a(123), b(123);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sample_block_mask(4, 4, 0.75, a), sample_block_mask(4, 4, 0.75, b));
}

TEST(MaskAdjacency, HandCounted) {
  // Cells 0, 1 and 5 on a 4x4 grid: 0-1 and 1-5 are neighbours, all three count.
  MaskResult m{{2, 3, 4, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15}, {0, 1, 5}, 16};
  EXPECT_EQ(masked_adjacency(m, 4, 4), 3u);
  MaskResult isolated{{1, 2, 3, 4, 6, 7, 8, 9, 11, 12, 13, 14}, {0, 5, 10, 15}, 16};
  EXPECT_EQ(masked_adjacency(isolated, 4, 4), 0u);
}

TEST(ApplyMask, FullVisibilityIsIdentity) {
  const PatchGrid g = numbered_grid(4, 3);
  Rng rng(9);
  const VisiblePatches v = apply_mask(g, sample_random_mask(16, 0.0, rng));
  EXPECT_EQ(v.values, g.values);
  EXPECT_EQ(v.indices.size(), 16u);
}

TEST(ApplyMask, SelectsVisibleWithIndices) {
  const PatchGrid g = numbered_grid(4, 3);
  std::vector<std::size_t> masked;
  for (std::size_t i = 0; i < 16; ++i) {
    if (i != 0 && i != 5) masked.push_back(i);
  }
  const VisiblePatches v = apply_mask(g, MaskResult{{0, 5}, masked, 16});
  EXPECT_EQ(v.indices, (std::vector<std::size_t>{0, 5}));
  EXPECT_EQ(v.values, (std::vector<double>{0, 1, 2, 15, 16, 17}));
  EXPECT_EQ(v.patch_dim, 3u);
}

TEST(ApplyMask, VisiblePlusMaskedReassemblesGrid) {
  const PatchGrid g = numbered_grid(4, 2);
  Rng rng(10);
  const MaskResult m = sample_block_mask(4, 4, 0.5, rng);
  const VisiblePatches vis = apply_mask(g, m);
  const VisiblePatches hid = apply_mask(g, MaskResult{m.masked, m.visible, 16});
  std::vector<double> rebuilt(g.values.size());
  const auto scatter = [&](const VisiblePatches& p) {
    for (std::size_t k = 0; k < p.indices.size(); ++k) {
      std::copy_n(p.values.begin() + static_cast<std::ptrdiff_t>(k * 2), 2,
                  rebuilt.begin() + static_cast<std::ptrdiff_t>(p.indices[k] * 2));
    }
  };
  scatter(vis);
  scatter(hid);
  EXPECT_EQ(rebuilt, g.values);
}

TEST(ApplyMask, SizeMismatchIsDimensionError) {
  const PatchGrid g = numbered_grid(4, 1);
  Rng rng(11);
  const MaskResult m = sample_random_mask(9, 0.5, rng);
  EXPECT_EQ(error_kind([&] { apply_mask(g, m); }), ErrorKind::kDimension);
}

TEST(EvalMaskSeed, DistinctPerCoordinateAndStable) {
  const std::uint64_t s = eval_mask_seed(0, 0, 0);
  EXPECT_EQ(s, eval_mask_seed(0, 0, 0));
  EXPECT_NE(s, eval_mask_seed(1, 0, 0));
  EXPECT_NE(s, eval_mask_seed(0, 1, 0));
  EXPECT_NE(s, eval_mask_seed(0, 0, 1));
}

TEST(MaskSpec, StrategyNamesRoundTrip) {
  for (MaskStrategy s : {MaskStrategy::kRandom, MaskStrategy::kBlock}) {
    EXPECT_EQ(parse_mask_strategy(to_string(s)), s);
  }
  EXPECT_EQ(error_kind([] { parse_mask_strategy("checkerboard"); }), ErrorKind::kInput);
  MaskSpec bad{MaskStrategy::kBlock, 1.0, 0};
  EXPECT_EQ(error_kind([&] { bad.validate(); }), ErrorKind::kInput);
}

}  // namespace
}  // namespace promim
