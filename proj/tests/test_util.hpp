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

#pragma once

#include <cmath>
#include <cstdint>

#include "vinp/volume.hpp"
#include "vinp/random.hpp"

namespace vinp::testing {

inline VideoVolume random_video(Dims d, std::uint64_t seed, int levels = 256) {
  VideoVolume u(d);
  for (std::size_t i = 0; i < u.data().size(); ++i)
    u.data()[i] = static_cast<double>(rng::below(rng::key(seed, i), levels));
  return u;
}

inline VideoVolume constant_video(Dims d, double r, double g, double b) {
  VideoVolume u(d);
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    u.voxel(i)[0] = r;
    u.voxel(i)[1] = g;
    u.voxel(i)[2] = b;
  }
  return u;
}

// Same w x h box in every frame.
inline OcclusionMask box_mask(Dims d, int x0, int y0, int w, int h) {
  OcclusionMask m(d);
  for (int t = 0; t < d.frames; ++t)
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) m.occluded.at(x, y, t) = 1;
  return m;
}

inline double psnr(const VideoVolume& a, const VideoVolume& b, const Mask& region) {
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < region.voxels(); ++i) {
    if (!region[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const double e = a.voxel(i)[c] - b.voxel(i)[c];
      se += e * e;
    }
    n += 3;
  }
  const double mse = se / static_cast<double>(n);
  return mse == 0.0 ? 1e9 : 10.0 * std::log10(255.0 * 255.0 / mse);
}

}  // namespace vinp::testing
