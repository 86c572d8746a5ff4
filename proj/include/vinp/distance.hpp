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
#include <limits>
#include <optional>
#include <stdexcept>

#include "vinp/volume.hpp"

namespace vinp {

struct DistanceParams {
  double lambda = 50.0;
  PatchShape shape;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// The part of a target patch that takes part in a comparison: the cuboid
// around p clipped to the volume, further restricted to `known` voxels
// when a known-mask is in use.
struct TargetWindow {
  Voxel p;
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0, t0 = 0, t1 = 0;  // inclusive offsets
  int count = 0;
};

// Squared patch distance kernel,
//   d^2 = 1/|W| sum_{r in W} ( |u(r) - u(r-p+q)|^2 + lambda |T(r) - T(r-p+q)|^2 ),
// accumulated in double. The source patch at q must fit in the volume.
class PatchDistance {
 public:
  PatchDistance(const VideoVolume& u, const TextureVolume* features, DistanceParams params,
                const Mask* known = nullptr)
      : u_(u), features_(features), params_(params), known_(known) {
    params_.shape.validate();
    if (params_.lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
    if (features_ != nullptr && !(features_->dims() == u.dims()))
      throw std::invalid_argument("feature volume dims differ from the video");
    if (known_ != nullptr && !(known_->dims() == u.dims()))
      throw std::invalid_argument("known-mask dims differ from the video");
    use_features_ = features_ != nullptr && params_.lambda > 0.0;
  }

  const DistanceParams& params() const { return params_; }
  const Dims& dims() const { return u_.dims(); }

  TargetWindow window(Voxel p) const {
    const Dims& d = u_.dims();
    const PatchShape& s = params_.shape;
    TargetWindow w;
    w.p = p;
    w.x0 = std::max(-s.hx(), -p.x);
    w.x1 = std::min(s.hx(), d.width - 1 - p.x);
    w.y0 = std::max(-s.hy(), -p.y);
    w.y1 = std::min(s.hy(), d.height - 1 - p.y);
    w.t0 = std::max(-s.ht(), -p.t);
    w.t1 = std::min(s.ht(), d.frames - 1 - p.t);
    if (known_ == nullptr) {
      w.count = (w.x1 - w.x0 + 1) * (w.y1 - w.y0 + 1) * (w.t1 - w.t0 + 1);
    } else {
      for (int dt = w.t0; dt <= w.t1; ++dt)
        for (int dy = w.y0; dy <= w.y1; ++dy)
          for (int dx = w.x0; dx <= w.x1; ++dx)
            if ((*known_)[d.index(p.x + dx, p.y + dy, p.t + dt)]) ++w.count;
    }
    return w;
  }

  // Distance from the target window to the patch centred on q. Returns
  // +inf for an empty window. Once the running mean exceeds `bound` the
  // scan stops early and the (already larger) partial mean is returned,
  // which leaves every strict "< bound" comparison unchanged.
  double operator()(const TargetWindow& w, Voxel q, double bound = kInfinity) const {
    if (w.count == 0) return kInfinity;
    const Dims& d = u_.dims();
    assert(params_.shape.fits(d, q));
    const double inv = 1.0 / w.count;
    const double lambda = params_.lambda;
    const int len = w.x1 - w.x0 + 1;
    double sum = 0.0;
    for (int dt = w.t0; dt <= w.t1; ++dt) {
      for (int dy = w.y0; dy <= w.y1; ++dy) {
        const std::size_t a = d.index(w.p.x + w.x0, w.p.y + dy, w.p.t + dt);
        const std::size_t b = d.index(q.x + w.x0, q.y + dy, q.t + dt);
        const double* ua = u_.voxel(a);
        const double* ub = u_.voxel(b);
        const std::uint8_t* k = known_ != nullptr ? &(*known_)[a] : nullptr;
        if (use_features_) {
          const double* fa = features_->voxel(a);
          const double* fb = features_->voxel(b);
          for (int i = 0; i < len; ++i) {
            if (k != nullptr && !k[i]) continue;
            const double c0 = ua[3 * i] - ub[3 * i];
            const double c1 = ua[3 * i + 1] - ub[3 * i + 1];
            const double c2 = ua[3 * i + 2] - ub[3 * i + 2];
            const double f0 = fa[2 * i] - fb[2 * i];
            const double f1 = fa[2 * i + 1] - fb[2 * i + 1];
            sum += (c0 * c0 + c1 * c1 + c2 * c2) + lambda * (f0 * f0 + f1 * f1);
          }
        } else {
          for (int i = 0; i < len; ++i) {
            if (k != nullptr && !k[i]) continue;
            const double c0 = ua[3 * i] - ub[3 * i];
            const double c1 = ua[3 * i + 1] - ub[3 * i + 1];
            const double c2 = ua[3 * i + 2] - ub[3 * i + 2];
            sum += c0 * c0 + c1 * c1 + c2 * c2;
          }
        }
        if (sum * inv > bound) return sum * inv;
      }
    }
    return sum * inv;
  }

  double operator()(Voxel p, Voxel q, double bound = kInfinity) const {
    return (*this)(window(p), q, bound);
  }

 private:
  const VideoVolume& u_;
  const TextureVolume* features_;
  DistanceParams params_;
  const Mask* known_;
  bool use_features_ = false;
};

// Full-patch distance; both cuboids must lie inside the volume.
inline double patch_distance_sq(const VideoVolume& u, const TextureVolume& features, Voxel p,
                                Voxel q, const DistanceParams& params) {
  assert(params.shape.fits(u.dims(), p) && params.shape.fits(u.dims(), q));
  return PatchDistance(u, &features, params)(p, q);
}

// Distance restricted to the target voxels flagged in `known`; nullopt
// when none of them is known (an isolated voxel that cannot be matched).
inline std::optional<double> partial_patch_distance_sq(const VideoVolume& u,
                                                       const TextureVolume& features, Voxel p,
                                                       Voxel q, const DistanceParams& params,
                                                       const Mask& known) {
  const PatchDistance dist(u, &features, params, &known);
  const TargetWindow w = dist.window(p);
  if (w.count == 0) return std::nullopt;
  return dist(w, q);
}

}  // namespace vinp
