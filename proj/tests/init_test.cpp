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

#include "vinp/init.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "vinp/features.hpp"

namespace vinp {
namespace {

Mask block(Dims d, Voxel lo, Voxel size) {
  Mask m(d);
  for (int t = lo.t; t < lo.t + size.t; ++t)
    for (int y = lo.y; y < lo.y + size.y; ++y)
      for (int x = lo.x; x < lo.x + size.x; ++x) m.at(x, y, t) = 1;
  return m;
}

TEST(ErodeTest, Examples) {
  const Dims d{12, 12, 12};
  EXPECT_FALSE(any(erode(Mask(d))));
  const Mask e3 = erode(block(d, {4, 4, 4}, {3, 3, 3}));
  EXPECT_EQ(count(e3), 1u);
  EXPECT_TRUE(e3.at(5, 5, 5));
  EXPECT_EQ(erode(block(d, {3, 3, 3}, {5, 5, 5})), block(d, {4, 4, 4}, {3, 3, 3}));
}

TEST(ErodeTest, StrictlyShrinksAndLayerIsShell) {
  const Dims d{10, 8, 4};
  Mask m(d);
  for (std::size_t i = 0; i < d.voxels(); ++i) m[i] = rng::below(rng::key(1, i), 4) != 0;
  while (any(m)) {
    const Mask e = erode(m);
    const Mask layer = onion_layer(m);
    EXPECT_LT(count(e), count(m));
    EXPECT_EQ(count(e) + count(layer), count(m));
    for (std::size_t i = 0; i < d.voxels(); ++i) EXPECT_FALSE(e[i] && !m[i]);
    m = e;
  }
}

DistanceParams params(PatchShape s) { return DistanceParams{50.0, s}; }

InitResult run_init(const VideoVolume& u, const OcclusionMask& mask, const PatchShape& shape,
                    std::uint64_t seed) {
  const Mask sources = valid_source_mask(mask, shape);
  const Mask targets = mask_or(dilate_mask(mask, shape), mask.occluded);
  VideoVolume start = u;
  for (std::size_t i = 0; i < u.voxels(); ++i)
    if (mask.occluded[i]) std::fill_n(start.voxel(i), 3, -1.0);
  const TextureVolume T = compute_texture_features(start, 1, mask_not(mask.occluded));
  SearchParams sp;
  sp.seed = seed;
  return onion_peel_init(start, T, random_init(targets, sources, seed), mask, params(shape), sp);
}

TEST(OnionPeelTest, EmptyOcclusionIsNoOp) {
  const Dims d{10, 10, 4};
  const VideoVolume u = testing::random_video(d, 2);
  const TextureVolume T(d);
  const InitResult r = onion_peel_init(u, T, ShiftMap(d), OcclusionMask(d), params(PatchShape(3, 3, 3)), SearchParams{});
  EXPECT_EQ(r.colors, u);
  EXPECT_EQ(r.features, T);
  EXPECT_EQ(r.layers, 0);
}

TEST(OnionPeelTest, SingleVoxelInConstantVolume) {
  const Dims d{12, 12, 6};
  const VideoVolume u = testing::constant_video(d, 70, 80, 90);
  OcclusionMask mask(d);
  mask.occluded.at(6, 5, 3) = 1;
  const PatchShape shape(3, 3, 3);
  const InitResult r = run_init(u, mask, shape, 1);
  EXPECT_EQ(r.layers, 1);
  EXPECT_EQ(r.colors, u);
  const std::size_t i = d.index(6, 5, 3);
  ASSERT_TRUE(r.phi.defined(i));
  EXPECT_TRUE(valid_source_mask(mask, shape)[d.index(r.phi.source(i))]);
}

// Periodic texture, 9x9 hole in every frame: five onion layers, and
// the fill is close to the withheld content.
TEST(OnionPeelTest, PeriodicTextureNineByNine) {
  const Dims d{40, 40, 8};
  VideoVolume truth(d);
  const double w = 2.0 * M_PI / 8.0;
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    const Voxel p = d.voxel(i);
    truth.voxel(i)[0] = 128 + 60 * std::sin(w * p.x) + 40 * std::cos(w * p.y);
    truth.voxel(i)[1] = 128 + 50 * std::cos(w * (p.x + p.y));
    truth.voxel(i)[2] = 100 + 30 * std::sin(w * p.y);
  }
  const OcclusionMask mask = testing::box_mask(d, 15, 16, 9, 9);
  const PatchShape shape(5, 5, 5);
  const InitResult r = run_init(truth, mask, shape, 7);
  EXPECT_EQ(r.layers, 5);
  EXPECT_EQ(r.fallback_voxels, 0u);
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    if (!mask.occluded[i]) {
      for (int c = 0; c < 3; ++c) EXPECT_EQ(r.colors.voxel(i)[c], truth.voxel(i)[c]);
      continue;
    }
    for (int c = 0; c < 3; ++c) EXPECT_GE(r.colors.voxel(i)[c], 0.0);
  }
  const Mask cover = mask_or(dilate_mask(mask, shape), mask.occluded);
  const Mask sources = valid_source_mask(mask, shape);
  for (std::size_t i = 0; i < d.voxels(); ++i)
    if (cover[i]) {
      ASSERT_TRUE(r.phi.defined(i));
      EXPECT_TRUE(sources[d.index(r.phi.source(i))]);
    }
  EXPECT_GT(testing::psnr(r.colors, truth, mask.occluded), 25.0);
}

TEST(OnionPeelTest, HoleTouchingTheBorderTerminates) {
  const Dims d{24, 20, 5};
  const VideoVolume u = testing::random_video(d, 3);
  OcclusionMask mask = testing::box_mask(d, 0, 0, 6, 5);
  const InitResult r = run_init(u, mask, PatchShape(3, 3, 3), 2);
  EXPECT_GE(r.layers, 1);
  for (std::size_t i = 0; i < d.voxels(); ++i)
    for (int c = 0; c < 3; ++c) EXPECT_GE(r.colors.voxel(i)[c], 0.0);
}

}  // namespace
}  // namespace vinp
