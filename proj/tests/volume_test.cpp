// Copyright 2026 The vinp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vinp/volume.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace vinp {
namespace {

TEST(VolumeTest, RejectsEmptyDims) {
  EXPECT_THROW(VideoVolume(Dims{0, 4, 4}), std::invalid_argument);
  EXPECT_THROW(Mask(Dims{4, 4, 0}), std::invalid_argument);
}

TEST(VolumeTest, ScanOrderIsXThenYThenT) {
  const Dims d{4, 3, 2};
  EXPECT_EQ(d.index(1, 0, 0), 1u);
  EXPECT_EQ(d.index(0, 1, 0), 4u);
  EXPECT_EQ(d.index(0, 0, 1), 12u);
  for (std::size_t i = 0; i < d.voxels(); ++i) EXPECT_EQ(d.index(d.voxel(i)), i);
}

TEST(PatchShapeTest, RequiresOddExtents) {
  EXPECT_THROW(PatchShape(4, 5, 5), std::invalid_argument);
  EXPECT_THROW(PatchShape(5, 5, 0), std::invalid_argument);
  EXPECT_EQ(PatchShape(5, 3, 1).voxels(), 15);
}

TEST(ValidSourceMaskTest, EmptyMaskLeavesInnerCore) {
  const Dims d{10, 10, 10};
  const Mask s = valid_source_mask(OcclusionMask(d), PatchShape(5, 5, 5));
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    const Voxel p = d.voxel(i);
    const bool core = p.x >= 2 && p.x <= 7 && p.y >= 2 && p.y <= 7 && p.t >= 2 && p.t <= 7;
    EXPECT_EQ(s[i] != 0, core);
  }
  EXPECT_EQ(count(s), 216u);
}

TEST(ValidSourceMaskTest, FullyOccludedIsEmpty) {
  const Dims d{6, 6, 6};
  OcclusionMask m(d);
  std::fill(m.occluded.data().begin(), m.occluded.data().end(), 1);
  EXPECT_FALSE(any(valid_source_mask(m, PatchShape(3, 3, 3))));
}

TEST(ValidSourceMaskTest, SingleOccludedVoxel) {
  const Dims d{9, 9, 9};
  OcclusionMask m(d);
  m.occluded.at(4, 4, 4) = 1;
  const Mask s = valid_source_mask(m, PatchShape(3, 3, 3));
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    const Voxel p = d.voxel(i);
    const bool shell = p.x == 0 || p.y == 0 || p.t == 0 || p.x == 8 || p.y == 8 || p.t == 8;
    const bool near = std::abs(p.x - 4) <= 1 && std::abs(p.y - 4) <= 1 && std::abs(p.t - 4) <= 1;
    EXPECT_EQ(s[i] != 0, !shell && !near) << p.x << "," << p.y << "," << p.t;
  }
}

TEST(ValidSourceMaskTest, InvalidVoxelsAlsoExcluded) {
  const Dims d{9, 9, 3};
  OcclusionMask m(d);
  m.invalid.at(4, 4, 1) = 1;
  const Mask s = valid_source_mask(m, PatchShape(3, 3, 3));
  EXPECT_FALSE(s.at(4, 4, 1));
  EXPECT_FALSE(s.at(5, 5, 1));
  EXPECT_TRUE(s.at(6, 4, 1));
}

TEST(DilateMaskTest, Examples) {
  const Dims d{9, 9, 9};
  EXPECT_FALSE(any(dilate_mask(OcclusionMask(d), PatchShape(3, 3, 3))));
  OcclusionMask centre(d);
  centre.occluded.at(4, 4, 4) = 1;
  EXPECT_EQ(count(dilate_mask(centre, PatchShape(3, 3, 3))), 27u);
  OcclusionMask corner(d);
  corner.occluded.at(0, 0, 0) = 1;
  EXPECT_EQ(count(dilate_mask(corner, PatchShape(3, 3, 3))), 8u);
}

TEST(DilateMaskTest, MatchesDirectDefinition) {
  const Dims d{11, 7, 5};
  OcclusionMask m(d);
  for (std::size_t i = 0; i < d.voxels(); ++i) m.occluded[i] = rng::below(rng::key(3, i), 17) == 0;
  const PatchShape shape(5, 3, 3);
  const Mask got = dilate_mask(m, shape);
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    const Voxel q = d.voxel(i);
    bool hit = false;
    for (std::size_t j = 0; j < d.voxels(); ++j) {
      if (!m.occluded[j]) continue;
      const Voxel p = d.voxel(j);
      hit |= std::abs(p.x - q.x) <= 2 && std::abs(p.y - q.y) <= 1 && std::abs(p.t - q.t) <= 1;
    }
    EXPECT_EQ(got[i] != 0, hit);
  }
}

TEST(ValidSourceMaskTest, DisjointFromOcclusion) {
  const Dims d{16, 12, 6};
  OcclusionMask m(d);
  for (std::size_t i = 0; i < d.voxels(); ++i) m.occluded[i] = rng::below(rng::key(5, i), 40) == 0;
  const Mask s = valid_source_mask(m, PatchShape(3, 3, 3));
  const Mask h = dilate_mask(m, PatchShape(3, 3, 3));
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    EXPECT_FALSE(s[i] && m.occluded[i]);
    EXPECT_FALSE(s[i] && h[i]);
  }
}

TEST(ShiftMapTest, SourceAndStaleCosts) {
  ShiftMap phi(Dims{5, 5, 5});
  const std::size_t i = phi.dims().index(1, 2, 3);
  phi.set(i, Shift{2, 1, -1}, 4.0);
  EXPECT_EQ(phi.source(i), (Voxel{3, 3, 2}));
  EXPECT_TRUE(phi.cost_fresh(i));
  phi.invalidate_costs();
  EXPECT_FALSE(phi.cost_fresh(i));
  EXPECT_TRUE(phi.defined(i));
}

}  // namespace
}  // namespace vinp
