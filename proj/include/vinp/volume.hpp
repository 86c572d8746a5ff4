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

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vinp {

struct Shift {
  int dx = 0;
  int dy = 0;
  int dt = 0;

  friend bool operator==(const Shift&, const Shift&) = default;
};

struct Voxel {
  int x = 0;
  int y = 0;
  int t = 0;

  friend bool operator==(const Voxel&, const Voxel&) = default;
  friend Voxel operator+(Voxel p, Shift s) { return {p.x + s.dx, p.y + s.dy, p.t + s.dt}; }
  friend Shift operator-(Voxel a, Voxel b) { return {a.x - b.x, a.y - b.y, a.t - b.t}; }
};

// Volume extent. Voxels are stored with x fastest, then y, then t; this
// storage order is also the scan ("lexicographic") order used everywhere.
struct Dims {
  int width = 0;
  int height = 0;
  int frames = 0;

  friend bool operator==(const Dims&, const Dims&) = default;

  std::size_t voxels() const {
    return static_cast<std::size_t>(width) * height * frames;
  }
  std::size_t frame_size() const { return static_cast<std::size_t>(width) * height; }
  bool valid() const { return width >= 1 && height >= 1 && frames >= 1; }
  bool contains(int x, int y, int t) const {
    return x >= 0 && y >= 0 && t >= 0 && x < width && y < height && t < frames;
  }
  bool contains(Voxel p) const { return contains(p.x, p.y, p.t); }
  std::size_t index(int x, int y, int t) const {
    return (static_cast<std::size_t>(t) * height + y) * width + x;
  }
  std::size_t index(Voxel p) const { return index(p.x, p.y, p.t); }
  Voxel voxel(std::size_t idx) const {
    const auto fs = frame_size();
    const int t = static_cast<int>(idx / fs);
    const auto rem = idx % fs;
    return {static_cast<int>(rem % width), static_cast<int>(rem / width), t};
  }
  std::string str() const {
    return std::to_string(width) + "x" + std::to_string(height) + "x" + std::to_string(frames);
  }
};

// Dense multi-channel volume over (x, y, t), channel-interleaved.
template <typename T, int Channels>
class Volume {
 public:
  static constexpr int kChannels = Channels;
  using value_type = T;

  Volume() = default;
  explicit Volume(Dims dims, T fill = T{}) : dims_(dims) {
    if (!dims.valid())
      throw std::invalid_argument("volume dimensions must be positive, got " + dims.str());
    data_.assign(dims.voxels() * Channels, fill);
  }

  const Dims& dims() const { return dims_; }
  int width() const { return dims_.width; }
  int height() const { return dims_.height; }
  int frames() const { return dims_.frames; }
  std::size_t voxels() const { return dims_.voxels(); }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y, int t, int c = 0) {
    assert(dims_.contains(x, y, t) && c >= 0 && c < Channels);
    return data_[dims_.index(x, y, t) * Channels + c];
  }
  const T& at(int x, int y, int t, int c = 0) const {
    assert(dims_.contains(x, y, t) && c >= 0 && c < Channels);
    return data_[dims_.index(x, y, t) * Channels + c];
  }
  T& operator[](std::size_t idx) { return data_[idx * Channels]; }
  const T& operator[](std::size_t idx) const { return data_[idx * Channels]; }

  T* voxel(std::size_t idx) { return data_.data() + idx * Channels; }
  const T* voxel(std::size_t idx) const { return data_.data() + idx * Channels; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  Dims dims_;
  std::vector<T> data_;
};

using VideoVolume = Volume<double, 3>;
using TextureVolume = Volume<double, 2>;
using Mask = Volume<std::uint8_t, 1>;

inline bool all_finite(const VideoVolume& u) {
  return std::all_of(u.data().begin(), u.data().end(), [](double v) { return std::isfinite(v); });
}

inline std::size_t count(const Mask& m) {
  return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

inline bool any(const Mask& m) {
  return std::any_of(m.data().begin(), m.data().end(), [](std::uint8_t v) { return v != 0; });
}

inline Mask mask_or(const Mask& a, const Mask& b) {
  Mask out(a.dims());
  for (std::size_t i = 0; i < a.voxels(); ++i) out[i] = (a[i] || b[i]) ? 1 : 0;
  return out;
}

inline Mask mask_and_not(const Mask& a, const Mask& b) {
  Mask out(a.dims());
  for (std::size_t i = 0; i < a.voxels(); ++i) out[i] = (a[i] && !b[i]) ? 1 : 0;
  return out;
}

inline Mask mask_not(const Mask& a) {
  Mask out(a.dims());
  for (std::size_t i = 0; i < a.voxels(); ++i) out[i] = a[i] ? 0 : 1;
  return out;
}

// Indices of set voxels, in scan order.
inline std::vector<std::size_t> indices_of(const Mask& m) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m.voxels(); ++i)
    if (m[i]) out.push_back(i);
  return out;
}

// The hole H and the voxels without usable colour (e.g. outside the
// original frame after realignment). The data set D is everything else.
struct OcclusionMask {
  Mask occluded;
  Mask invalid;

  OcclusionMask() = default;
  explicit OcclusionMask(Dims dims) : occluded(dims), invalid(dims) {}

  const Dims& dims() const { return occluded.dims(); }

  Mask data_set() const {
    Mask d(dims());
    for (std::size_t i = 0; i < d.voxels(); ++i) d[i] = (occluded[i] || invalid[i]) ? 0 : 1;
    return d;
  }
};

// Rectangular cuboid patch; all extents odd.
struct PatchShape {
  int sx = 5;
  int sy = 5;
  int st = 5;

  PatchShape() = default;
  PatchShape(int x, int y, int t) : sx(x), sy(y), st(t) { validate(); }

  void validate() const {
    auto odd = [](int v) { return v > 0 && v % 2 == 1; };
    if (!odd(sx) || !odd(sy) || !odd(st))
      throw std::invalid_argument("patch extents must be odd positive integers, got " +
                                  std::to_string(sx) + "x" + std::to_string(sy) + "x" +
                                  std::to_string(st));
  }
  int hx() const { return sx / 2; }
  int hy() const { return sy / 2; }
  int ht() const { return st / 2; }
  int voxels() const { return sx * sy * st; }

  // True iff the full cuboid centred on p lies in the volume.
  bool fits(const Dims& d, Voxel p) const {
    return p.x - hx() >= 0 && p.y - hy() >= 0 && p.t - ht() >= 0 && p.x + hx() < d.width &&
           p.y + hy() < d.height && p.t + ht() < d.frames;
  }

  friend bool operator==(const PatchShape&, const PatchShape&) = default;
};

// Per-voxel shift field phi with a cached squared patch distance for each
// defined entry. A NaN cost means the cache is stale.
class ShiftMap {
 public:
  static constexpr double kStale = std::numeric_limits<double>::quiet_NaN();

  ShiftMap() = default;
  explicit ShiftMap(Dims dims)
      : dims_(dims), shift_(dims.voxels()), defined_(dims.voxels(), 0),
        cost_(dims.voxels(), kStale) {}

  const Dims& dims() const { return dims_; }

  bool defined(std::size_t i) const { return defined_[i] != 0; }
  const Shift& shift(std::size_t i) const { return shift_[i]; }
  double cost(std::size_t i) const { return cost_[i]; }
  bool cost_fresh(std::size_t i) const { return !std::isnan(cost_[i]); }

  void set(std::size_t i, Shift s, double cost = kStale) {
    shift_[i] = s;
    defined_[i] = 1;
    cost_[i] = cost;
  }
  void set_cost(std::size_t i, double cost) { cost_[i] = cost; }
  void clear(std::size_t i) {
    defined_[i] = 0;
    cost_[i] = kStale;
  }
  void invalidate_costs() { std::fill(cost_.begin(), cost_.end(), kStale); }

  // Source position p + phi(p).
  Voxel source(std::size_t i) const { return dims_.voxel(i) + shift_[i]; }

  Mask defined_mask() const {
    Mask m(dims_);
    for (std::size_t i = 0; i < dims_.voxels(); ++i) m[i] = defined_[i];
    return m;
  }

 private:
  Dims dims_;
  std::vector<Shift> shift_;
  std::vector<std::uint8_t> defined_;
  std::vector<double> cost_;
};

namespace detail {

// 1D "any set within radius" filter along one axis, clipped at the bounds.
inline Mask any_within(const Mask& in, int axis, int radius) {
  if (radius <= 0) return in;
  const Dims& d = in.dims();
  Mask out(d);
  const int len = axis == 0 ? d.width : axis == 1 ? d.height : d.frames;
  const std::size_t stride =
      axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(d.width) : d.frame_size();
  const int n1 = axis == 0 ? d.height : d.width;
  const int n2 = axis == 2 ? d.height : d.frames;
  std::vector<int> prefix(static_cast<std::size_t>(len) + 1);
  for (int b = 0; b < n2; ++b) {
    for (int a = 0; a < n1; ++a) {
      std::size_t base;
      if (axis == 0) base = d.index(0, a, b);
      else if (axis == 1) base = d.index(a, 0, b);
      else base = d.index(a, b, 0);
      prefix[0] = 0;
      for (int i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + (in[base + i * stride] ? 1 : 0);
      for (int i = 0; i < len; ++i) {
        const int lo = std::max(0, i - radius);
        const int hi = std::min(len - 1, i + radius);
        out[base + i * stride] = prefix[hi + 1] - prefix[lo] > 0 ? 1 : 0;
      }
    }
  }
  return out;
}

inline Mask dilate_box(const Mask& m, int rx, int ry, int rt) {
  return any_within(any_within(any_within(m, 0, rx), 1, ry), 2, rt);
}

}  // namespace detail

// H-tilde: every voxel whose patch cuboid touches an occluded voxel.
inline Mask dilate_mask(const OcclusionMask& mask, const PatchShape& shape) {
  return detail::dilate_box(mask.occluded, shape.hx(), shape.hy(), shape.ht());
}

inline Mask dilate_mask(const Mask& m, const PatchShape& shape) {
  return detail::dilate_box(m, shape.hx(), shape.hy(), shape.ht());
}

// D-tilde: centres whose full patch lies in bounds and avoids both
// occluded and invalid voxels.
inline Mask valid_source_mask(const OcclusionMask& mask, const PatchShape& shape) {
  const Dims& d = mask.dims();
  Mask bad(d);
  for (std::size_t i = 0; i < d.voxels(); ++i)
    bad[i] = (mask.occluded[i] || mask.invalid[i]) ? 1 : 0;
  const Mask touched = detail::dilate_box(bad, shape.hx(), shape.hy(), shape.ht());
  Mask out(d);
  for (std::size_t i = 0; i < d.voxels(); ++i)
    out[i] = (!touched[i] && shape.fits(d, d.voxel(i))) ? 1 : 0;
  return out;
}

}  // namespace vinp
