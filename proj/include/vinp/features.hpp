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
#include <stdexcept>
#include <vector>

#include "vinp/pyramid.hpp"
#include "vinp/volume.hpp"

namespace vinp {

inline double luma(const double* rgb) { return 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]; }

// Half-width of the feature window for an L-level pyramid: the window
// covers the 2^(L-1) square that one coarsest-level pixel spans.
inline int default_feature_half_width(int levels) { return (1 << (levels - 1)) / 2; }

namespace detail {

// Box mean of `value` over the clipped (2r+1)^2 window, counting only
// samples with weight 1. Empty windows give 0.
inline void box_mean(const std::vector<double>& value, const std::vector<double>& weight, int w,
                     int h, int r, std::vector<double>& out) {
  const int sw = w + 1;
  std::vector<double> sv(static_cast<std::size_t>(sw) * (h + 1), 0.0);
  std::vector<double> sc(sv.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    double rv = 0.0, rc = 0.0;
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      rv += value[i] * weight[i];
      rc += weight[i];
      sv[(y + 1) * sw + x + 1] = sv[y * sw + x + 1] + rv;
      sc[(y + 1) * sw + x + 1] = sc[y * sw + x + 1] + rc;
    }
  }
  out.assign(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r) + 1;
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r) + 1;
      const double s = sv[y1 * sw + x1] - sv[y0 * sw + x1] - sv[y1 * sw + x0] + sv[y0 * sw + x0];
      const double c = sc[y1 * sw + x1] - sc[y0 * sw + x1] - sc[y1 * sw + x0] + sc[y0 * sw + x0];
      out[static_cast<std::size_t>(y) * w + x] = c > 0.5 ? s / c : 0.0;
    }
  }
}

// Absolute derivative along one axis at i of a line of n samples. Central
// difference with mirrored borders; where known samples are missing, a
// one-sided difference is used, or nothing at all.
inline bool abs_derivative(const double* line, const std::uint8_t* known, int i, int n,
                           std::size_t stride, double& out) {
  const int lo = mirror(i - 1, n), hi = mirror(i + 1, n);
  auto k = [&](int j) { return known == nullptr || known[j * stride] != 0; };
  if (k(lo) && k(hi)) {
    out = std::abs(line[hi * stride] - line[lo * stride]) * 0.5;
    return true;
  }
  if (!k(i)) return false;
  if (k(hi) && hi != i) {
    out = std::abs(line[hi * stride] - line[i * stride]);
    return true;
  }
  if (k(lo) && lo != i) {
    out = std::abs(line[i * stride] - line[lo * stride]);
    return true;
  }
  return false;
}

inline TextureVolume texture_features(const VideoVolume& u, int half_width, const Mask* known) {
  if (half_width < 0) throw std::invalid_argument("feature window half-width must be >= 0");
  const Dims& d = u.dims();
  TextureVolume out(d);
  const int w = d.width, h = d.height;
  const std::size_t fs = d.frame_size();
  std::vector<double> grey(fs), gx(fs), gy(fs), wx(fs), wy(fs), mean;
  for (int t = 0; t < d.frames; ++t) {
    const std::size_t base = d.index(0, 0, t);
    for (std::size_t i = 0; i < fs; ++i) grey[i] = luma(u.voxel(base + i));
    const std::uint8_t* kf = known != nullptr ? &(*known)[base] : nullptr;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        double v = 0.0;
        const std::size_t row = static_cast<std::size_t>(y) * w;
        wx[i] = abs_derivative(&grey[row], kf ? kf + row : nullptr, x, w, 1, v) ? 1.0 : 0.0;
        gx[i] = v;
        v = 0.0;
        wy[i] = abs_derivative(&grey[x], kf ? kf + x : nullptr, y, h, w, v) ? 1.0 : 0.0;
        gy[i] = v;
      }
    }
    box_mean(gx, wx, w, h, half_width, mean);
    for (std::size_t i = 0; i < fs; ++i) out.voxel(base + i)[0] = mean[i];
    box_mean(gy, wy, w, h, half_width, mean);
    for (std::size_t i = 0; i < fs; ++i) out.voxel(base + i)[1] = mean[i];
  }
  return out;
}

}  // namespace detail

// T = (mean |Ix|, mean |Iy|) of the grey level over a (2r+1)^2 window.
inline TextureVolume compute_texture_features(const VideoVolume& u, int half_width) {
  return detail::texture_features(u, half_width, nullptr);
}

// Same, but derivatives and window means only use voxels in `known`.
inline TextureVolume compute_texture_features(const VideoVolume& u, int half_width,
                                              const Mask& known) {
  return detail::texture_features(u, half_width, &known);
}

// Pure decimation of full-resolution features: level l samples
// T(2^(l-1) x, 2^(l-1) y, t). No filtering, no per-level recomputation.
inline std::vector<TextureVolume> build_texture_pyramid(const TextureVolume& features, int levels,
                                                        int min_extent = 1) {
  check_levels(features.dims(), levels, min_extent);
  std::vector<TextureVolume> out{features};
  const Dims& d = features.dims();
  for (int l = 2; l <= levels; ++l) {
    const int f = 1 << (l - 1);
    const Dims ld = level_dims(d, l);
    TextureVolume level(ld);
    for (int t = 0; t < ld.frames; ++t)
      for (int y = 0; y < ld.height; ++y)
        for (int x = 0; x < ld.width; ++x) {
          const double* src = features.voxel(d.index(x * f, y * f, t));
          double* dst = level.voxel(ld.index(x, y, t));
          dst[0] = src[0];
          dst[1] = src[1];
        }
    out.push_back(std::move(level));
  }
  return out;
}

}  // namespace vinp
