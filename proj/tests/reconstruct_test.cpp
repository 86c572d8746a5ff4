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

#include "vinp/reconstruct.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <vector>

#include "test_util.hpp"

namespace vinp {
namespace {

// Independent scalar evaluation of the weighted / unweighted mean at p.
std::vector<double> scalar_mean(const std::vector<double>& values, int channels, const ShiftMap& phi,
                                const PatchShape& shape, Voxel p, bool weighted,
                                const Mask* exclude) {
  const Dims& d = phi.dims();
  std::vector<std::size_t> src;
  std::vector<double> dist2;
  for (int dt = -shape.ht(); dt <= shape.ht(); ++dt)
    for (int dy = -shape.hy(); dy <= shape.hy(); ++dy)
      for (int dx = -shape.hx(); dx <= shape.hx(); ++dx) {
        const Voxel q{p.x + dx, p.y + dy, p.t + dt};
        if (!d.contains(q) || (exclude && exclude->at(q.x, q.y, q.t))) continue;
        const std::size_t qi = d.index(q);
        src.push_back(d.index(p + phi.shift(qi)));
        dist2.push_back(phi.cost(qi));
      }
  std::vector<double> s(src.size(), 1.0);
  if (weighted) {
    std::vector<double> dd;
    for (double v : dist2) dd.push_back(std::sqrt(v));
    std::sort(dd.begin(), dd.end());
    const double sigma = dd[static_cast<std::size_t>(std::ceil(0.75 * dd.size())) - 1];
    for (std::size_t i = 0; i < s.size(); ++i)
      s[i] = sigma == 0.0 ? (dist2[i] == 0.0 ? 1.0 : 0.0)
                          : std::exp(-dist2[i] / (2 * sigma * sigma));
  }
  std::vector<double> out(channels, 0.0);
  double ws = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (int c = 0; c < channels; ++c) out[c] += s[i] * values[src[i] * channels + c];
    ws += s[i];
  }
  for (double& v : out) v /= ws;
  return out;
}

std::vector<double> as_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

// Random shifts that keep every p + phi(q) (q within a patch of p) inside
// the volume, with random cached costs.
ShiftMap random_shifts(Dims d, const PatchShape& s, std::uint64_t seed) {
  ShiftMap phi(d);
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    const Voxel q = d.voxel(i);
    const Voxel src{s.hx() + int(rng::below(rng::key(seed, i, 0), d.width - 2 * s.hx())),
                    s.hy() + int(rng::below(rng::key(seed, i, 1), d.height - 2 * s.hy())),
                    s.ht() + int(rng::below(rng::key(seed, i, 2), d.frames - 2 * s.ht()))};
    phi.set(i, src - q, 400.0 * rng::unit(rng::key(seed, i, 3)));
  }
  return phi;
}

TEST(PercentileTest, NearestRank) {
  EXPECT_EQ(nearest_rank_percentile({5, 1, 3, 2}, 75), 3);
  EXPECT_EQ(nearest_rank_percentile({0, 10}, 75), 10);
  EXPECT_EQ(nearest_rank_percentile({4}, 75), 4);
  EXPECT_THROW(nearest_rank_percentile({}, 75), std::invalid_argument);
}

TEST(ReconstructTest, ModeNames) {
  EXPECT_EQ(parse_reconstruction_mode("unweighted"), ReconstructionMode::unweighted);
  EXPECT_STREQ(to_string(ReconstructionMode::weighted), "weighted");
  EXPECT_THROW(parse_reconstruction_mode("median"), std::invalid_argument);
}

TEST(ReconstructTest, IdenticalSourcesGiveTheirColourInEveryMode) {
  const Dims d{12, 12, 5};
  VideoVolume u = testing::random_video(d, 1);
  for (int c = 0; c < 3; ++c) u.at(9, 9, 3, c) = 40.0 * (c + 1);
  const PatchShape shape(3, 3, 3);
  ShiftMap phi(d);
  const Voxel p{4, 4, 2};
  for (std::size_t i = 0; i < d.voxels(); ++i) phi.set(i, Voxel{9, 9, 3} - p, 3.0 + i % 7);
  Mask region(d);
  region.at(p.x, p.y, p.t) = 1;
  for (auto mode : {ReconstructionMode::weighted, ReconstructionMode::unweighted,
                    ReconstructionMode::best_patch}) {
    const VideoVolume out = reconstruct_colors(u, phi, region, shape, mode);
    for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(out.at(p.x, p.y, p.t, c), 40.0 * (c + 1));
  }
}

TEST(ReconstructTest, UnweightedTwoContributors) {
  const Dims d{5, 1, 1};
  VideoVolume u(d);
  for (int c = 0; c < 3; ++c) {
    u.at(0, 0, 0, c) = 100.0;
    u.at(4, 0, 0, c) = 200.0;
  }
  ShiftMap phi(d);
  phi.set(d.index(1, 0, 0), Shift{-2, 0, 0}, 1.0);  // p=(2,0,0) -> (0,0,0)
  phi.set(d.index(2, 0, 0), Shift{2, 0, 0}, 1.0);   // -> (4,0,0)
  Mask region(d);
  region.at(2, 0, 0) = 1;
  const VideoVolume out = reconstruct_colors(u, phi, region, PatchShape(3, 1, 1), ReconstructionMode::unweighted);
  EXPECT_EQ(out.at(2, 0, 0, 1), 150.0);
}

// Nine contributors: six at distance 0 and two at distance 1 all map to
// colour c, one at distance 100 maps elsewhere. sigma_p = 1, so the
// outlier weight is exp(-5000).
TEST(ReconstructTest, WeightedFollowsZeroDistanceContributors) {
  const Dims d{9, 9, 1};
  VideoVolume u(d);
  const Voxel p{4, 4, 0};
  ShiftMap phi(d);
  const double costs[9] = {0, 0, 1, 0, 0, 1, 0, 0, 1e4};
  int k = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx, ++k) {
      const Voxel src{k, 0, 0};
      const double v = k == 8 ? 250.0 : 60.0;
      for (int c = 0; c < 3; ++c) u.at(src.x, src.y, 0, c) = v;
      phi.set(d.index(p.x + dx, p.y + dy, 0), src - p, costs[k]);
    }
  Mask region(d);
  region.at(4, 4, 0) = 1;
  const VideoVolume out = reconstruct_colors(u, phi, region, PatchShape(3, 3, 1), ReconstructionMode::weighted);
  const auto ref = scalar_mean(as_vector(u.data()), 3, phi, PatchShape(3, 3, 1), p, true, nullptr);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(out.at(4, 4, 0, c), 60.0, 1e-6);
    EXPECT_NEAR(out.at(4, 4, 0, c), ref[c], 1e-9);
  }
}

TEST(ReconstructTest, ZeroSigmaFallsBackToZeroDistanceMean) {
  const Dims d{9, 9, 1};
  VideoVolume u(d);
  const Voxel p{4, 4, 0};
  ShiftMap phi(d);
  int k = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx, ++k) {
      for (int c = 0; c < 3; ++c) u.at(k, 0, 0, c) = 10.0 * k;
      phi.set(d.index(p.x + dx, p.y + dy, 0), Voxel{k, 0, 0} - p, k < 7 ? 0.0 : 9.0);
    }
  Mask region(d);
  region.at(4, 4, 0) = 1;
  const VideoVolume out = reconstruct_colors(u, phi, region, PatchShape(3, 3, 1), ReconstructionMode::weighted);
  EXPECT_NEAR(out.at(4, 4, 0, 0), 30.0, 1e-12);  // mean of 0..60
}

TEST(ReconstructTest, RejectsStaleCostsInWeightedMode) {
  const Dims d{9, 9, 1};
  const PatchShape shape(3, 3, 1);
  ShiftMap phi = random_shifts(d, shape, 3);
  phi.invalidate_costs();
  Mask region(d);
  region.at(4, 4, 0) = 1;
  EXPECT_THROW(reconstruct_colors(VideoVolume(d), phi, region, shape, ReconstructionMode::weighted),
               std::logic_error);
  EXPECT_NO_THROW(reconstruct_colors(VideoVolume(d), phi, region, shape, ReconstructionMode::unweighted));
}

TEST(ReconstructTest, RandomInstanceMatchesScalarFormula) {
  const Dims d{14, 12, 7};
  const PatchShape shape(3, 3, 3);
  const VideoVolume u = testing::random_video(d, 5);
  TextureVolume T(d);
  for (std::size_t i = 0; i < T.data().size(); ++i) T.data()[i] = rng::unit(rng::key(6, i)) * 30;
  const ShiftMap phi = random_shifts(d, shape, 7);
  Mask region(d);
  for (std::size_t i = 0; i < d.voxels(); ++i) region[i] = rng::below(rng::key(8, i), 5) == 0;
  for (bool weighted : {true, false}) {
    const auto mode = weighted ? ReconstructionMode::weighted : ReconstructionMode::unweighted;
    const VideoVolume out = reconstruct_colors(u, phi, region, shape, mode);
    const TextureVolume tout = reconstruct_features(T, phi, region, shape, mode);
    for (std::size_t i = 0; i < d.voxels(); ++i) {
      if (!region[i]) {
        for (int c = 0; c < 3; ++c) EXPECT_EQ(out.voxel(i)[c], u.voxel(i)[c]);
        for (int c = 0; c < 2; ++c) EXPECT_EQ(tout.voxel(i)[c], T.voxel(i)[c]);
        continue;
      }
      const auto rc = scalar_mean(as_vector(u.data()), 3, phi, shape, d.voxel(i), weighted, nullptr);
      const auto rt = scalar_mean(as_vector(T.data()), 2, phi, shape, d.voxel(i), weighted, nullptr);
      for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.voxel(i)[c], rc[c], 1e-9);
      for (int c = 0; c < 2; ++c) EXPECT_NEAR(tout.voxel(i)[c], rt[c], 1e-9);
    }
  }
}

TEST(ReconstructTest, ConvexCombinationOfContributors) {
  const Dims d{12, 12, 6};
  const PatchShape shape(3, 3, 3);
  const VideoVolume u = testing::random_video(d, 9);
  const ShiftMap phi = random_shifts(d, shape, 10);
  Mask region(d);
  std::fill(region.data().begin(), region.data().end(), 1);
  const VideoVolume out = reconstruct_colors(u, phi, region, shape, ReconstructionMode::weighted);
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    const Voxel p = d.voxel(i);
    double lo[3] = {1e9, 1e9, 1e9}, hi[3] = {-1e9, -1e9, -1e9};
    for (int dt = -1; dt <= 1; ++dt)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const Voxel q{p.x + dx, p.y + dy, p.t + dt};
          if (!d.contains(q)) continue;
          const double* v = u.voxel(d.index(p + phi.shift(d.index(q))));
          for (int c = 0; c < 3; ++c) {
            lo[c] = std::min(lo[c], v[c]);
            hi[c] = std::max(hi[c], v[c]);
          }
        }
    for (int c = 0; c < 3; ++c) {
      EXPECT_GE(out.voxel(i)[c], lo[c] - 1e-9);
      EXPECT_LE(out.voxel(i)[c], hi[c] + 1e-9);
    }
  }
}

TEST(FeatureReconstructTest, ConstantAndSingleContributor) {
  const Dims d{9, 9, 5};
  const PatchShape shape(3, 3, 3);
  TextureVolume T(d);
  std::fill(T.data().begin(), T.data().end(), 2.5);
  const ShiftMap phi = random_shifts(d, shape, 11);
  Mask region(d);
  std::fill(region.data().begin(), region.data().end(), 1);
  const TextureVolume flat = reconstruct_features(T, phi, region, shape);
  for (double v : flat.data()) EXPECT_DOUBLE_EQ(v, 2.5);

  for (std::size_t i = 0; i < T.data().size(); ++i) T.data()[i] = static_cast<double>(i);
  ShiftMap one(d);
  one.set(d.index(4, 4, 1), Shift{2, -3, 1}, 5.0);
  Mask r1(d);
  r1.at(4, 4, 1) = 1;
  const TextureVolume out = reconstruct_features(T, one, r1, shape);
  EXPECT_EQ(out.at(4, 4, 1, 0), T.at(6, 1, 2, 0));
  EXPECT_EQ(out.at(4, 4, 1, 1), T.at(6, 1, 2, 1));
}

TEST(FinalReconstructTest, TiesGoToFirstNeighbourInScanOrder) {
  const Dims d{9, 9, 3};
  const VideoVolume u = testing::random_video(d, 12);
  const PatchShape shape(3, 3, 3);
  ShiftMap phi(d);
  for (std::size_t i = 0; i < d.voxels(); ++i)
    phi.set(i, Shift{int(i % 3) - 1, int(i % 2), 0}, 7.0);
  Mask region(d);
  region.at(4, 4, 1) = 1;
  const VideoVolume out = final_reconstruct(u, phi, region, shape);
  const std::size_t first = d.index(3, 3, 0);
  const double* want = u.voxel(d.index(Voxel{4, 4, 1} + phi.shift(first)));
  for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(4, 4, 1, c), want[c]);
}

TEST(FinalReconstructTest, ZeroDistanceNeighbourWins) {
  const Dims d{9, 9, 3};
  const VideoVolume u = testing::random_video(d, 13);
  const PatchShape shape(3, 3, 3);
  ShiftMap phi(d);
  for (std::size_t i = 0; i < d.voxels(); ++i) phi.set(i, Shift{int(i % 3) - 1, 1, 0}, 7.0 + i % 4);
  const std::size_t winner = d.index(5, 3, 2);
  phi.set(winner, Shift{-2, 2, 0}, 0.0);
  Mask region(d);
  region.at(4, 4, 1) = 1;
  const VideoVolume out = final_reconstruct(u, phi, region, shape);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(out.at(4, 4, 1, c), u.at(2, 6, 1, c));
}

TEST(FinalReconstructTest, CopyProperty) {
  const Dims d{14, 12, 7};
  const PatchShape shape(3, 3, 3);
  const VideoVolume u = testing::random_video(d, 14);
  const ShiftMap phi = random_shifts(d, shape, 15);
  Mask region(d);
  for (std::size_t i = 0; i < d.voxels(); ++i) region[i] = rng::below(rng::key(16, i), 3) == 0;
  const VideoVolume out = final_reconstruct(u, phi, region, shape);
  std::set<std::array<double, 3>> pool;
  for (std::size_t i = 0; i < d.voxels(); ++i)
    if (!region[i]) pool.insert({u.voxel(i)[0], u.voxel(i)[1], u.voxel(i)[2]});
  // Every written colour is verbatim a colour of u at some voxel p + phi(q).
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    if (!region[i]) continue;
    bool found = false;
    const Voxel p = d.voxel(i);
    for (int dt = -1; dt <= 1 && !found; ++dt)
      for (int dy = -1; dy <= 1 && !found; ++dy)
        for (int dx = -1; dx <= 1 && !found; ++dx) {
          const Voxel q{p.x + dx, p.y + dy, p.t + dt};
          if (!d.contains(q)) continue;
          const double* v = u.voxel(d.index(p + phi.shift(d.index(q))));
          found = std::equal(v, v + 3, out.voxel(i));
        }
    EXPECT_TRUE(found);
  }
}

TEST(LayerReconstructTest, FullySurroundedEqualsPlainReconstruction) {
  const Dims d{12, 12, 6};
  const PatchShape shape(3, 3, 3);
  const VideoVolume u = testing::random_video(d, 17);
  TextureVolume T(d);
  const ShiftMap phi = random_shifts(d, shape, 18);
  Mask layer(d);
  layer.at(5, 5, 2) = 1;
  const LayerResult r = layer_reconstruct(u, T, phi, layer, layer, shape);
  // The layer voxel itself is excluded; compare against the formula.
  const auto ref = scalar_mean(as_vector(u.data()), 3, phi, shape, {5, 5, 2}, true, &layer);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(r.colors.at(5, 5, 2, c), ref[c], 1e-9);

  const Mask none(d);
  const LayerResult all = layer_reconstruct(u, T, phi, layer, none, shape);
  const VideoVolume plain = reconstruct_colors(u, phi, layer, shape, ReconstructionMode::weighted);
  for (int c = 0; c < 3; ++c) EXPECT_EQ(all.colors.at(5, 5, 2, c), plain.at(5, 5, 2, c));
}

TEST(LayerReconstructTest, SingleContributorIsCopied) {
  const Dims d{9, 9, 3};
  const PatchShape shape(3, 3, 3);
  const VideoVolume u = testing::random_video(d, 19);
  TextureVolume T(d);
  for (std::size_t i = 0; i < T.data().size(); ++i) T.data()[i] = static_cast<double>(i);
  const ShiftMap phi = random_shifts(d, shape, 20);
  Mask occ(d);
  std::fill(occ.data().begin(), occ.data().end(), 1);
  occ.at(3, 5, 1) = 0;
  Mask layer(d);
  layer.at(4, 4, 1) = 1;
  const LayerResult r = layer_reconstruct(u, T, phi, layer, occ, shape);
  const Voxel src = Voxel{4, 4, 1} + phi.shift(d.index(3, 5, 1));
  for (int c = 0; c < 3; ++c) EXPECT_EQ(r.colors.at(4, 4, 1, c), u.at(src.x, src.y, src.t, c));
  for (int c = 0; c < 2; ++c) EXPECT_EQ(r.features.at(4, 4, 1, c), T.at(src.x, src.y, src.t, c));
  EXPECT_TRUE(r.unresolved.empty());

  occ.at(3, 5, 1) = 1;
  const LayerResult none = layer_reconstruct(u, T, phi, layer, occ, shape);
  ASSERT_EQ(none.unresolved.size(), 1u);
  EXPECT_EQ(none.colors, u);
}

TEST(LayerReconstructTest, RandomConfigurationMatchesFormula) {
  const Dims d{14, 12, 7};
  const PatchShape shape(3, 3, 3);
  const VideoVolume u = testing::random_video(d, 21);
  TextureVolume T(d);
  for (std::size_t i = 0; i < T.data().size(); ++i) T.data()[i] = rng::unit(rng::key(22, i)) * 10;
  const ShiftMap phi = random_shifts(d, shape, 23);
  Mask occ(d), layer(d);
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    occ[i] = rng::below(rng::key(24, i), 2);
    layer[i] = occ[i] && rng::below(rng::key(25, i), 2);
  }
  const LayerResult r = layer_reconstruct(u, T, phi, layer, occ, shape);
  const std::set<std::size_t> unresolved(r.unresolved.begin(), r.unresolved.end());
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    if (!layer[i] || unresolved.count(i)) {
      for (int c = 0; c < 3; ++c) EXPECT_EQ(r.colors.voxel(i)[c], u.voxel(i)[c]);
      continue;
    }
    const auto rc = scalar_mean(as_vector(u.data()), 3, phi, shape, d.voxel(i), true, &occ);
    const auto rt = scalar_mean(as_vector(T.data()), 2, phi, shape, d.voxel(i), true, &occ);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(r.colors.voxel(i)[c], rc[c], 1e-9);
    for (int c = 0; c < 2; ++c) EXPECT_NEAR(r.features.voxel(i)[c], rt[c], 1e-9);
  }
}

}  // namespace
}  // namespace vinp
