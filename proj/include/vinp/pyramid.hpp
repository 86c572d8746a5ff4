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

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "vinp/volume.hpp"

namespace vinp {

inline Dims level_dims(const Dims& fine, int level) {
  const int f = 1 << (level - 1);
  return {(fine.width + f - 1) / f, (fine.height + f - 1) / f, fine.frames};
}

inline void check_levels(const Dims& d, int levels, int min_extent) {
  if (levels < 1) throw std::invalid_argument("pyramid needs at least one level");
  if (levels > 30) throw std::invalid_argument("pyramid level count too large");
  const Dims coarse = level_dims(d, levels);
  if (coarse.width < min_extent || coarse.height < min_extent)
    throw std::invalid_argument("too many pyramid levels (" + std::to_string(levels) +
                                ") for a " + d.str() + " volume: coarsest level is " +
                                coarse.str());
}

namespace detail {

inline int mirror(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * (n - 1) - i;
  }
  return i;
}

inline constexpr std::array<double, 5> kBinomial{1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

// One 2:1 spatial reduction: separable (1,4,6,4,1)/16 in x and y with
// mirrored borders, then sampling at even positions. If `known` is given,
// unknown voxels get zero weight (normalised convolution); a footprint
// with no known voxel falls back to the plain filter.
template <typename T, int C>
Volume<T, C> reduce(const Volume<T, C>& in, const Mask* known) {
  const Dims& d = in.dims();
  const Dims out_dims{(d.width + 1) / 2, (d.height + 1) / 2, d.frames};
  Volume<T, C> out(out_dims);
  for (int t = 0; t < d.frames; ++t) {
    for (int yc = 0; yc < out_dims.height; ++yc) {
      for (int xc = 0; xc < out_dims.width; ++xc) {
        std::array<double, C> plain{};
        std::array<double, C> masked{};
        double wsum = 0.0;
        for (int j = 0; j < 5; ++j) {
          const int y = mirror(2 * yc + j - 2, d.height);
          for (int i = 0; i < 5; ++i) {
            const int x = mirror(2 * xc + i - 2, d.width);
            const double w = kBinomial[i] * kBinomial[j];
            const std::size_t idx = d.index(x, y, t);
            const T* v = in.voxel(idx);
            const bool k = known == nullptr || (*known)[idx];
            for (int c = 0; c < C; ++c) {
              plain[c] += w * v[c];
              if (k) masked[c] += w * v[c];
            }
            if (k) wsum += w;
          }
        }
        T* o = out.voxel(out_dims.index(xc, yc, t));
        for (int c = 0; c < C; ++c)
          o[c] = static_cast<T>(known != nullptr && wsum > 0.0 ? masked[c] / wsum : plain[c]);
      }
    }
  }
  return out;
}

inline Mask reduce_any(const Mask& in) {
  const Dims& d = in.dims();
  const Dims out_dims{(d.width + 1) / 2, (d.height + 1) / 2, d.frames};
  Mask out(out_dims);
  for (int t = 0; t < d.frames; ++t)
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x)
        if (in.at(x, y, t)) out.at(x / 2, y / 2, t) = 1;
  return out;
}

template <typename T, int C>
std::vector<Volume<T, C>> build_pyramid(const Volume<T, C>& v, int levels, const Mask* known) {
  std::vector<Volume<T, C>> out{v};
  Mask k;
  if (known != nullptr) k = *known;
  for (int l = 1; l < levels; ++l) {
    out.push_back(reduce(out.back(), known != nullptr ? &k : nullptr));
    // A coarse voxel counts as known when all fine voxels of its block are.
    if (known != nullptr) k = mask_not(reduce_any(mask_not(k)));
  }
  return out;
}

}  // namespace detail

// Spatial Gaussian pyramid; level 0 of the result is u itself and no
// temporal decimation happens at any level.
inline std::vector<VideoVolume> build_video_pyramid(const VideoVolume& u, int levels,
                                                    int min_extent = 1) {
  check_levels(u.dims(), levels, min_extent);
  return detail::build_pyramid(u, levels, nullptr);
}

// Variant that ignores voxels outside `known` when filtering, so hole
// content never bleeds into coarse unoccluded voxels.
inline std::vector<VideoVolume> build_video_pyramid(const VideoVolume& u, int levels,
                                                    const Mask& known, int min_extent = 1) {
  check_levels(u.dims(), levels, min_extent);
  return detail::build_pyramid(u, levels, &known);
}

// A coarse voxel is occluded (or invalid) iff any fine voxel of its 2x2
// block is.
inline std::vector<OcclusionMask> build_occlusion_pyramid(const OcclusionMask& mask, int levels,
                                                          int min_extent = 1) {
  check_levels(mask.dims(), levels, min_extent);
  std::vector<OcclusionMask> out{mask};
  for (int l = 1; l < levels; ++l) {
    OcclusionMask next;
    next.occluded = detail::reduce_any(out.back().occluded);
    next.invalid = detail::reduce_any(out.back().invalid);
    out.push_back(std::move(next));
  }
  return out;
}

}  // namespace vinp
