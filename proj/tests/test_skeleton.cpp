#include "rootseg/skeleton.hpp"

#include <gtest/gtest.h>

#include <deque>
#include <map>
#include <random>

using namespace rootseg;

namespace {

// Flood-fill reference, independent of the union-find implementation.
std::vector<int> bfs_labels(const BinaryMask& mask) {
  std::vector<int> labels(mask.size(), 0);
  int next = 0;
  for (int start = 0; start < mask.size(); ++start) {
    if (!mask.data[start] || labels[start]) continue;
    ++next;
    std::deque<int> queue{start};
    labels[start] = next;
    while (!queue.empty()) {
      const int idx = queue.front();
      queue.pop_front();
      const int r = idx / mask.width, c = idx % mask.width;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= mask.height || cc < 0 || cc >= mask.width) continue;
          const int j = rr * mask.width + cc;
          if (mask.data[j] && !labels[j]) {
            labels[j] = next;
            queue.push_back(j);
          }
        }
    }
  }
  return labels;
}

int bfs_component_count(const BinaryMask& mask) {
  const auto labels = bfs_labels(mask);
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

BinaryMask random_blob_mask(std::mt19937& rng, int w = 32, int h = 32) {
  BinaryMask mask(w, h);
  const int n_shapes = 1 + rng() % 5;
  for (int s = 0; s < n_shapes; ++s) {
    if (rng() % 2) {
      const int r0 = rng() % h, c0 = rng() % w;
      const int rh = 1 + rng() % 8, rw = 1 + rng() % 8;
      for (int r = r0; r < std::min(h, r0 + rh); ++r)
        for (int c = c0; c < std::min(w, c0 + rw); ++c) mask.at(r, c) = 1;
    } else {
      const int cr = rng() % h, cc = rng() % w, rad = 1 + rng() % 6;
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
          if ((r - cr) * (r - cr) + (c - cc) * (c - cc) <= rad * rad) mask.at(r, c) = 1;
    }
  }
  return mask;
}

bool has_2x2_block(const BinaryMask& m) {
  for (int r = 0; r + 1 < m.height; ++r)
    for (int c = 0; c + 1 < m.width; ++c)
      if (m.at(r, c) && m.at(r, c + 1) && m.at(r + 1, c) && m.at(r + 1, c + 1)) return true;
  return false;
}

TEST(FillGaps, EmptyMaskStaysEmpty) {
  const BinaryMask mask(6, 6, false);
  EXPECT_EQ(fill_gaps(mask).count_foreground(), 0);
}

TEST(FillGaps, OnePixelGapInRowCloses) {
  BinaryMask mask(5, 5, false);
  mask.at(2, 1) = 1;
  mask.at(2, 3) = 1;
  const BinaryMask out = fill_gaps(mask);
  EXPECT_TRUE(out.at(2, 2));
  for (int i = 0; i < mask.size(); ++i)
    if (mask.data[i]) {
      ASSERT_TRUE(out.data[i]);
    }
}

TEST(FillGaps, SolidBlockUnchanged) {
  BinaryMask mask(8, 8, false);
  for (int r = 2; r < 6; ++r)
    for (int c = 2; c < 6; ++c) mask.at(r, c) = 1;
  EXPECT_EQ(fill_gaps(mask).data, mask.data);
}

TEST(FillGaps, MatchesGrayscaleClosingRoute) {
  std::mt19937 rng(71);
  for (int t = 0; t < 25; ++t) {
    const BinaryMask mask = random_blob_mask(rng, 20, 20);
    GrayImage gray(mask.width, mask.height);
    for (int i = 0; i < mask.size(); ++i) gray.data[i] = mask.data[i] ? 1.0 : 0.0;
    const GrayImage closed = close(gray, 3);
    const BinaryMask binary = fill_gaps(mask);
    for (int i = 0; i < mask.size(); ++i)
      ASSERT_EQ(binary.data[i] != 0, closed.data[i] > 0.5);
  }
}

TEST(Skeletonize, EmptyAndThinInputsUnchanged) {
  const BinaryMask empty(7, 7, false);
  EXPECT_EQ(skeletonize(empty).count_foreground(), 0);

  BinaryMask line(9, 5, false);
  for (int c = 1; c < 8; ++c) line.at(2, c) = 1;
  EXPECT_EQ(skeletonize(line).data, line.data);

  BinaryMask diag(9, 9, false);
  for (int i = 1; i < 8; ++i) diag.at(i, i) = 1;
  EXPECT_EQ(skeletonize(diag).data, diag.data);
}

TEST(Skeletonize, SolidBarThinsToSingleCurve) {
  BinaryMask bar(24, 9, false);
  for (int r = 2; r < 7; ++r)
    for (int c = 2; c < 22; ++c) bar.at(r, c) = 1;
  const BinaryMask skel = skeletonize(bar);

  for (int i = 0; i < bar.size(); ++i)
    if (skel.data[i]) {
      ASSERT_TRUE(bar.data[i]);  // subset
    }

  EXPECT_EQ(bfs_component_count(skel), 1);
  EXPECT_FALSE(has_2x2_block(skel));

  int min_c = 1000, max_c = -1;
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 24; ++c)
      if (skel.at(r, c)) {
        min_c = std::min(min_c, c);
        max_c = std::max(max_c, c);
      }
  EXPECT_GE(max_c - min_c + 1, 12);  // spans roughly the bar's length
}

TEST(Skeletonize, PreservesComponentCountOnRandomBlobs) {
  std::mt19937 rng(1337);
  for (int t = 0; t < 60; ++t) {
    const BinaryMask mask = random_blob_mask(rng);
    const BinaryMask skel = skeletonize(mask);
    for (int i = 0; i < mask.size(); ++i)
      if (skel.data[i]) {
        ASSERT_TRUE(mask.data[i]);
      }
    ASSERT_EQ(bfs_component_count(skel), bfs_component_count(mask));
  }
}

TEST(Skeletonize, TwoByTwoBlockKeepsItsComponent) {
  // the fully parallel rule would delete all four pixels at once
  BinaryMask mask(6, 6, false);
  mask.at(2, 2) = mask.at(2, 3) = mask.at(3, 2) = mask.at(3, 3) = 1;
  const BinaryMask skel = skeletonize(mask);
  EXPECT_EQ(bfs_component_count(skel), 1);
  EXPECT_GE(skel.count_foreground(), 1);
  EXPECT_LE(skel.count_foreground(), 2);
}

TEST(LabelComponents, BasicCases) {
  const BinaryMask empty(5, 5, false);
  EXPECT_EQ(label_components(empty).count(), 0);

  BinaryMask diag(5, 5, false);
  diag.at(1, 1) = 1;
  diag.at(2, 2) = 1;
  EXPECT_EQ(label_components(diag, 8).count(), 1);
  EXPECT_EQ(label_components(diag, 4).count(), 2);

  BinaryMask gap(5, 5, false);
  gap.at(2, 0) = 1;
  gap.at(2, 2) = 1;
  const ComponentMap cm = label_components(gap);
  EXPECT_EQ(cm.count(), 2);
  EXPECT_EQ(cm.areas[1], 1);
  EXPECT_EQ(cm.areas[2], 1);
  EXPECT_THROW(label_components(gap, 6), InvalidParams);
}

TEST(LabelComponents, AgreesWithFloodFill) {
  std::mt19937 rng(404);
  for (int t = 0; t < 40; ++t) {
    const BinaryMask mask = random_blob_mask(rng, 24, 24);
    const ComponentMap cm = label_components(mask);
    const std::vector<int> ref = bfs_labels(mask);
    ASSERT_EQ(cm.count(), bfs_component_count(mask));

    // identical partitions and per-label areas
    std::map<int, int> to_ref;
    std::vector<int> areas(cm.count() + 1, 0);
    for (int i = 0; i < mask.size(); ++i) {
      ASSERT_EQ(cm.labels[i] != 0, mask.data[i] != 0);
      if (!mask.data[i]) continue;
      ++areas[cm.labels[i]];
      auto [it, fresh] = to_ref.emplace(cm.labels[i], ref[i]);
      ASSERT_EQ(it->second, ref[i]);
    }
    ASSERT_EQ(areas, cm.areas);
  }
}

TEST(LabelComponents, IdsFollowScanOrder) {
  BinaryMask mask(5, 3, false);
  mask.at(0, 4) = 1;  // first in scan order
  mask.at(2, 0) = 1;
  const ComponentMap cm = label_components(mask);
  EXPECT_EQ(cm.labels[4], 1);
  EXPECT_EQ(cm.labels[10], 2);
}

TEST(FilterSmall, ThresholdIsStrict) {
  // 19-pixel component: a 10-wide row plus 9 below
  BinaryMask mask(20, 3, false);
  for (int c = 0; c < 10; ++c) mask.at(0, c) = 1;
  for (int c = 0; c < 9; ++c) mask.at(1, c) = 1;
  ASSERT_EQ(label_components(mask).areas[1], 19);
  EXPECT_EQ(filter_small(mask, 20).count_foreground(), 0);
  EXPECT_EQ(filter_small(mask, 19).count_foreground(), 19);
  EXPECT_EQ(filter_small(mask, 0).data, mask.data);
}

TEST(FilterSmall, KeepsOnlyComponentsAtOrAboveAlpha) {
  // components of sizes 5, 20, 100 -> only 20 and 100 survive alpha = 20
  BinaryMask mask(50, 20, false);
  for (int c = 0; c < 5; ++c) mask.at(0, c) = 1;                       // size 5
  for (int c = 10; c < 30; ++c) mask.at(5, c) = 1;                     // size 20
  for (int r = 10; r < 20; ++r)
    for (int c = 40; c < 50; ++c) mask.at(r, c) = 1;                   // size 100
  const BinaryMask out = filter_small(mask, 20);
  EXPECT_EQ(out.count_foreground(), 120);
  const ComponentMap cm = label_components(out);
  ASSERT_EQ(cm.count(), 2);
  for (int k = 1; k <= cm.count(); ++k) EXPECT_GE(cm.areas[k], 20);
}

TEST(Postprocessing, FullChainContainmentAndDeterminism) {
  std::mt19937 rng(31415);
  for (int t = 0; t < 20; ++t) {
    const BinaryMask mask = random_blob_mask(rng);
    const BinaryMask closed = fill_gaps(mask);
    const BinaryMask skel = skeletonize(closed);
    const BinaryMask final_mask = filter_small(skel, 8);
    for (int i = 0; i < mask.size(); ++i) {
      if (mask.data[i]) {
        ASSERT_TRUE(closed.data[i]);
      }
      if (skel.data[i]) {
        ASSERT_TRUE(closed.data[i]);
      }
      if (final_mask.data[i]) {
        ASSERT_TRUE(skel.data[i]);
      }
    }
    const ComponentMap cm = label_components(final_mask);
    for (int k = 1; k <= cm.count(); ++k) ASSERT_GE(cm.areas[k], 8);

    EXPECT_EQ(skeletonize(closed).data, skel.data);  // deterministic
  }
}

}  // namespace
