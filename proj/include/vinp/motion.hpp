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
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "vinp/features.hpp"
#include "vinp/parallel.hpp"
#include "vinp/pyramid.hpp"
#include "vinp/volume.hpp"

namespace vinp {

// (x, y) -> (a1 + a2 x + a3 y, a4 + a5 x + a6 y)
struct AffineParams {
  double a1 = 0.0, a2 = 1.0, a3 = 0.0;
  double a4 = 0.0, a5 = 0.0, a6 = 1.0;

  static AffineParams identity() { return {}; }
  static AffineParams translation(double tx, double ty) { return {tx, 1.0, 0.0, ty, 0.0, 1.0}; }
  static AffineParams rotation_about(double radians, double cx, double cy, double tx = 0.0,
                                     double ty = 0.0) {
    const double c = std::cos(radians), s = std::sin(radians);
    return {cx + tx - c * cx + s * cy, c, -s, cy + ty - s * cx - c * cy, s, c};
  }

  double determinant() const { return a2 * a6 - a3 * a5; }
  std::array<double, 2> apply(double x, double y) const {
    return {a1 + a2 * x + a3 * y, a4 + a5 * x + a6 * y};
  }
  std::array<double, 6> as_array() const { return {a1, a2, a3, a4, a5, a6}; }

  friend bool operator==(const AffineParams&, const AffineParams&) = default;
};

// outer o inner: apply `inner` first.
inline AffineParams compose(const AffineParams& outer, const AffineParams& inner) {
  return {outer.a1 + outer.a2 * inner.a1 + outer.a3 * inner.a4,
          outer.a2 * inner.a2 + outer.a3 * inner.a5,
          outer.a2 * inner.a3 + outer.a3 * inner.a6,
          outer.a4 + outer.a5 * inner.a1 + outer.a6 * inner.a4,
          outer.a5 * inner.a2 + outer.a6 * inner.a5,
          outer.a5 * inner.a3 + outer.a6 * inner.a6};
}

inline AffineParams invert(const AffineParams& t) {
  const double det = t.determinant();
  if (!(std::abs(det) > 1e-12) || !std::isfinite(det))
    throw std::invalid_argument("affine warp with singular linear part");
  const double i2 = t.a6 / det, i3 = -t.a3 / det, i5 = -t.a5 / det, i6 = t.a2 / det;
  return {-(i2 * t.a1 + i3 * t.a4), i2, i3, -(i5 * t.a1 + i6 * t.a4), i5, i6};
}

using GreyFrame = Volume<double, 1>;

inline GreyFrame grey_frame(const VideoVolume& u, int t) {
  const Dims& d = u.dims();
  GreyFrame g(Dims{d.width, d.height, 1});
  const std::size_t base = d.index(0, 0, t);
  for (std::size_t i = 0; i < d.frame_size(); ++i) g[i] = luma(u.voxel(base + i));
  return g;
}

inline Mask frame_mask(const Mask& m, int t) {
  const Dims& d = m.dims();
  Mask out(Dims{d.width, d.height, 1});
  const std::size_t base = d.index(0, 0, t);
  for (std::size_t i = 0; i < d.frame_size(); ++i) out[i] = m[base + i];
  return out;
}

namespace detail {

inline double snap(double v) {
  const double r = std::round(v);
  return std::abs(v - r) < 1e-9 ? r : v;
}

// Bilinear footprint of (x, y): up to four taps with positive weight.
struct Footprint {
  int n = 0;
  std::array<std::size_t, 4> idx{};
  std::array<double, 4> w{};
};

inline bool footprint(int width, int height, double x, double y, Footprint& f) {
  x = snap(x);
  y = snap(y);
  if (!(x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1)) return false;
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const double fx = x - x0, fy = y - y0;
  f.n = 0;
  const double wx[2] = {1.0 - fx, fx}, wy[2] = {1.0 - fy, fy};
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) {
      const double w = wx[i] * wy[j];
      if (w <= 0.0) continue;
      f.idx[f.n] = static_cast<std::size_t>(y0 + j) * width + (x0 + i);
      f.w[f.n] = w;
      ++f.n;
    }
  return true;
}

inline double sample(const GreyFrame& g, const Footprint& f) {
  double v = 0.0;
  for (int k = 0; k < f.n; ++k) v += f.w[k] * g[f.idx[k]];
  return v;
}

struct CubicSample {
  double v = 0.0, dx = 0.0, dy = 0.0;
};

inline void cubic_weights(double t, double w[4], double d[4]) {
  const double t2 = t * t, t3 = t2 * t;
  w[0] = 0.5 * (-t3 + 2.0 * t2 - t);
  w[1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
  w[2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
  w[3] = 0.5 * (t3 - t2);
  d[0] = 0.5 * (-3.0 * t2 + 4.0 * t - 1.0);
  d[1] = 0.5 * (9.0 * t2 - 10.0 * t);
  d[2] = 0.5 * (-9.0 * t2 + 8.0 * t + 1.0);
  d[3] = 0.5 * (3.0 * t2 - 2.0 * t);
}

// Catmull-Rom sample of g at (x, y) with its analytic gradient. Taps past
// the border are clamped; `taps` gets the indices with nonzero weight.
inline bool cubic_sample(const GreyFrame& g, double x, double y, CubicSample& s,
                         std::vector<std::size_t>& taps) {
  const int width = g.width(), height = g.height();
  x = snap(x);
  y = snap(y);
  if (!(x >= 0.0 && y >= 0.0 && x <= width - 1 && y <= height - 1)) return false;
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  double wx[4], dx[4], wy[4], dy[4];
  cubic_weights(x - x0, wx, dx);
  cubic_weights(y - y0, wy, dy);
  s = {};
  taps.clear();
  for (int j = 0; j < 4; ++j) {
    const int yy = std::clamp(y0 - 1 + j, 0, height - 1);
    double rv = 0.0, rd = 0.0;
    for (int i = 0; i < 4; ++i) {
      const int xx = std::clamp(x0 - 1 + i, 0, width - 1);
      const std::size_t k = static_cast<std::size_t>(yy) * width + xx;
      rv += wx[i] * g[k];
      rd += dx[i] * g[k];
      if (wy[j] != 0.0 && wx[i] != 0.0) taps.push_back(k);
    }
    s.v += wy[j] * rv;
    s.dx += wy[j] * rd;
    s.dy += dy[j] * rv;
  }
  return true;
}

// Binomial blur at full resolution; pixels flagged in `skip` carry no
// weight.
inline GreyFrame smooth(const GreyFrame& g, const Mask* skip) {
  const int w = g.width(), h = g.height();
  GreyFrame out(g.dims());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double plain = 0.0, masked = 0.0, wsum = 0.0;
      for (int j = 0; j < 5; ++j) {
        const int yy = mirror(y + j - 2, h);
        for (int i = 0; i < 5; ++i) {
          const int xx = mirror(x + i - 2, w);
          const double k = kBinomial[i] * kBinomial[j];
          const double v = g.at(xx, yy, 0);
          plain += k * v;
          if (skip == nullptr || !skip->at(xx, yy, 0)) {
            masked += k * v;
            wsum += k;
          }
        }
      }
      out.at(x, y, 0) = wsum > 0.0 ? masked / wsum : plain;
    }
  return out;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

}  // namespace detail

struct AffineEstimate {
  AffineParams theta;
  bool degraded = false;  // normal equations were singular; identity returned
};

struct AffineEstimatorOptions {
  int levels = 3;
  int max_iterations = 20;
  double tolerance = 1e-4;
  double tukey_c = 4.685;
};

// Dominant affine motion between two grey frames: minimises the Tukey
// biweight of r(x) = I_b(theta(x)) - I_a(x) over pixels not flagged in
// `exclude_a` (and, if given, not landing on `exclude_b`), by IRLS on the
// linearised residual, coarse to fine. The robust scale is 1.4826 times
// the median absolute residual.
inline AffineEstimate estimate_affine(const GreyFrame& frame_a, const GreyFrame& frame_b,
                                      const Mask& exclude_a, const Mask* exclude_b = nullptr,
                                      const AffineEstimatorOptions& opt = {}) {
  if (!(frame_a.dims() == frame_b.dims()) || !(exclude_a.dims() == frame_a.dims()))
    throw std::invalid_argument("estimate_affine: frame dimensions differ");

  int levels = 1;
  while (levels < opt.levels && level_dims(frame_a.dims(), levels + 1).width >= 16 &&
         level_dims(frame_a.dims(), levels + 1).height >= 16)
    ++levels;

  const Mask known_a = mask_not(exclude_a);
  const Mask known_b = exclude_b != nullptr ? mask_not(*exclude_b) : Mask();
  const std::vector<GreyFrame> pa = detail::build_pyramid(frame_a, levels, &known_a);
  const std::vector<GreyFrame> pb =
      detail::build_pyramid(frame_b, levels, exclude_b != nullptr ? &known_b : nullptr);
  std::vector<Mask> ma{exclude_a};
  std::vector<Mask> mb;
  if (exclude_b != nullptr) mb.push_back(*exclude_b);
  for (int l = 1; l < levels; ++l) {
    ma.push_back(detail::reduce_any(ma.back()));
    if (exclude_b != nullptr) mb.push_back(detail::reduce_any(mb.back()));
  }

  struct LevelFit {
    AffineParams theta;
    double median_abs = std::numeric_limits<double>::infinity();
    bool degraded = false;
  };
  std::vector<double> res;
  std::vector<std::array<double, 6>> jac;

  // IRLS at one pyramid level from the given start.
  // Interpolating b averages its noise unevenly across subpixel phases,
  // which drags the fit towards half-pixel offsets; a light blur of both
  // frames evens that out.
  std::vector<GreyFrame> sa, sb;
  for (int l = 0; l < levels; ++l) {
    sa.push_back(detail::smooth(pa[l], &ma[l]));
    sb.push_back(detail::smooth(pb[l], exclude_b != nullptr ? &mb[l] : nullptr));
  }

  auto fit_level = [&](int l, AffineParams theta) {
    const GreyFrame& a = sa[l];
    const GreyFrame& b = sb[l];
    std::vector<std::size_t> taps;
    const int w = a.width(), h = a.height();
    const double cx = 0.5 * (w - 1), cy = 0.5 * (h - 1);
    auto residuals = [&](const AffineParams& th) {
      const double det = th.determinant();
      res.clear();
      jac.clear();
      // The blur mirrors at the frame edge; keep clear of that band in
      // both frames.
      for (int y = 2; y < h - 2; ++y)
        for (int x = 2; x < w - 2; ++x) {
          if (ma[l].at(x, y, 0)) continue;
          const auto [xw, yw] = th.apply(x, y);
          if (!(xw >= 3.0 && yw >= 3.0 && xw <= w - 4.0 && yw <= h - 4.0)) continue;
          detail::CubicSample cs;
          if (!detail::cubic_sample(b, xw, yw, cs, taps)) continue;
          if (exclude_b != nullptr) {
            bool hit = false;
            for (std::size_t k : taps) hit = hit || mb[l][k] != 0;
            if (hit) continue;
          }
          const double r = cs.v - a.at(x, y, 0);
          // grad b at theta(x) taken as D^-T grad a(x): the noise in b's own
          // gradient correlates with the noise in r and biases the fit.
          const double ax = 0.5 * (a.at(x + 1, y, 0) - a.at(x - 1, y, 0));
          const double ay = 0.5 * (a.at(x, y + 1, 0) - a.at(x, y - 1, 0));
          const double ix = (th.a6 * ax - th.a5 * ay) / det;
          const double iy = (-th.a3 * ax + th.a2 * ay) / det;
          const double xc = x - cx, yc = y - cy;
          res.push_back(r);
          jac.push_back({ix, ix * xc, ix * yc, iy, iy * xc, iy * yc});
        }
    };
    std::vector<double> absr;
    auto abs_residuals = [&]() {
      absr.resize(res.size());
      for (std::size_t i = 0; i < res.size(); ++i) absr[i] = std::abs(res[i]);
    };

    LevelFit fit;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
      residuals(theta);
      if (res.size() < 6) {
        fit.degraded = true;
        return fit;
      }
      abs_residuals();
      const double scale = std::max(1.4826 * detail::median_of(absr), 1e-6);
      const double c = opt.tukey_c * scale;

      Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
      Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
      for (std::size_t i = 0; i < res.size(); ++i) {
        const double z = res[i] / c;
        if (std::abs(z) >= 1.0) continue;
        const double wt = (1.0 - z * z) * (1.0 - z * z);
        Eigen::Map<const Eigen::Matrix<double, 6, 1>> j(jac[i].data());
        A.noalias() += wt * j * j.transpose();
        g.noalias() += wt * res[i] * j;
      }
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(A);
      const double emax = eig.eigenvalues().maxCoeff(), emin = eig.eigenvalues().minCoeff();
      if (!(emax > 0.0) || emin < 1e-10 * emax) {
        fit.degraded = true;
        return fit;
      }
      const Eigen::Matrix<double, 6, 1> step = A.ldlt().solve(-g);
      // Step is in centred coordinates: delta(x) = b + D (x - c).
      theta.a1 += step[0] - step[1] * cx - step[2] * cy;
      theta.a2 += step[1];
      theta.a3 += step[2];
      theta.a4 += step[3] - step[4] * cx - step[5] * cy;
      theta.a5 += step[4];
      theta.a6 += step[5];
      if (step.norm() < opt.tolerance) break;
    }
    residuals(theta);
    if (res.size() < 6) {
      fit.degraded = true;
      return fit;
    }
    abs_residuals();
    fit.theta = theta;
    fit.median_abs = detail::median_of(absr);
    return fit;
  };

  // Coarse levels can lose fine periodic texture entirely and hand down a
  // wrong start, so each finer level also tries a fresh start and keeps
  // the fit with the smaller median residual.
  AffineEstimate result;
  AffineParams theta = AffineParams::identity();
  for (int l = levels - 1; l >= 0; --l) {
    LevelFit fit = fit_level(l, theta);
    if (l < levels - 1) {
      LevelFit fresh = fit_level(l, AffineParams::identity());
      if (fit.degraded || (!fresh.degraded && fresh.median_abs < fit.median_abs)) fit = fresh;
    }
    if (fit.degraded) {
      result.degraded = true;
      break;
    }
    theta = fit.theta;
    if (l > 0) {
      theta.a1 *= 2.0;
      theta.a4 *= 2.0;
    }
  }
  if (result.degraded || !std::isfinite(theta.determinant()) ||
      std::abs(theta.determinant()) < 1e-6) {
    result.theta = AffineParams::identity();
    result.degraded = true;
  } else {
    result.theta = theta;
  }
  return result;
}

// Per-frame warps into the reference frame (the middle one).
struct AffineChain {
  int reference = 0;
  std::vector<AffineParams> to_reference;
  std::vector<AffineParams> pairwise;  // theta_{n, n+1}
  std::vector<bool> degraded;
};

// Composes pairwise warps theta_{n,n+1} into warps to frame floor(N/2).
inline AffineChain chain_to_reference(const std::vector<AffineParams>& pairwise, int frames) {
  AffineChain chain;
  chain.reference = frames / 2;
  chain.pairwise = pairwise;
  chain.to_reference.assign(static_cast<std::size_t>(frames), AffineParams::identity());
  for (int n = chain.reference - 1; n >= 0; --n)
    chain.to_reference[n] = compose(chain.to_reference[n + 1], pairwise[n]);
  for (int n = chain.reference + 1; n < frames; ++n)
    chain.to_reference[n] = compose(chain.to_reference[n - 1], invert(pairwise[n - 1]));
  return chain;
}

struct AlignedVideo {
  VideoVolume video;
  OcclusionMask mask;
  AffineChain chain;
};

// Resamples every frame into the reference frame's geometry.
// Occlusion spreads to any pixel whose bilinear footprint touches an
// occluded pixel; pixels sampling outside the original frame are invalid.
inline AlignedVideo warp_to_reference(const VideoVolume& u, const OcclusionMask& mask,
                                      const AffineChain& chain, int threads = 1) {
  const Dims& d = u.dims();
  AlignedVideo out{VideoVolume(d), OcclusionMask(d), chain};
  parallel_for(static_cast<std::size_t>(d.frames), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t tn = b; tn < e; ++tn) {
      const int t = static_cast<int>(tn);
      const std::size_t base = d.index(0, 0, t);
      if (t == chain.reference) {
        for (std::size_t i = 0; i < d.frame_size(); ++i) {
          std::copy(u.voxel(base + i), u.voxel(base + i) + 3, out.video.voxel(base + i));
          out.mask.occluded[base + i] = mask.occluded[base + i];
          out.mask.invalid[base + i] = mask.invalid[base + i];
        }
        continue;
      }
      const AffineParams back = invert(chain.to_reference[t]);
      for (int y = 0; y < d.height; ++y)
        for (int x = 0; x < d.width; ++x) {
          const std::size_t oi = d.index(x, y, t);
          const auto [sx, sy] = back.apply(x, y);
          detail::Footprint f;
          if (!detail::footprint(d.width, d.height, sx, sy, f)) {
            out.mask.invalid[oi] = 1;
            continue;
          }
          double c[3] = {0.0, 0.0, 0.0};
          bool occ = false, inv = false;
          for (int k = 0; k < f.n; ++k) {
            const double* v = u.voxel(base + f.idx[k]);
            for (int ch = 0; ch < 3; ++ch) c[ch] += f.w[k] * v[ch];
            occ = occ || mask.occluded[base + f.idx[k]];
            inv = inv || mask.invalid[base + f.idx[k]];
          }
          std::copy(c, c + 3, out.video.voxel(oi));
          out.mask.occluded[oi] = occ ? 1 : 0;
          out.mask.invalid[oi] = inv ? 1 : 0;
        }
    }
  });
  return out;
}

// Estimates pairwise dominant motion (occluded pixels excluded) and
// realigns the video to its middle frame.
inline AlignedVideo align_video(const VideoVolume& u, const OcclusionMask& mask,
                                int threads = 1) {
  const Dims& d = u.dims();
  std::vector<AffineParams> pairwise(d.frames > 1 ? d.frames - 1 : 0);
  std::vector<bool> degraded(pairwise.size(), false);
  const Mask unusable = mask_or(mask.occluded, mask.invalid);
  parallel_for(pairwise.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n) {
      const int t = static_cast<int>(n);
      const Mask ea = frame_mask(unusable, t), eb = frame_mask(unusable, t + 1);
      const AffineEstimate est = estimate_affine(grey_frame(u, t), grey_frame(u, t + 1), ea, &eb);
      pairwise[n] = est.theta;
      degraded[n] = est.degraded;
    }
  });
  AffineChain chain = chain_to_reference(pairwise, d.frames);
  chain.degraded = degraded;
  return warp_to_reference(u, mask, chain, threads);
}

// Maps inpainted content back to the original geometry and pastes it into
// the originally occluded pixels only; everything else is copied from
// the original video unchanged.
inline VideoVolume unwarp_video(const VideoVolume& inpainted, const AffineChain& chain,
                                const VideoVolume& original, const OcclusionMask& original_mask,
                                const Mask* aligned_invalid = nullptr) {
  const Dims& d = original.dims();
  VideoVolume out = original;
  for (int t = 0; t < d.frames; ++t) {
    const std::size_t base = d.index(0, 0, t);
    const AffineParams& fwd = chain.to_reference[t];
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x) {
        const std::size_t oi = d.index(x, y, t);
        if (!original_mask.occluded[oi]) continue;
        auto [ax, ay] = fwd.apply(x, y);
        ax = std::clamp(ax, 0.0, static_cast<double>(d.width - 1));
        ay = std::clamp(ay, 0.0, static_cast<double>(d.height - 1));
        detail::Footprint f;
        detail::footprint(d.width, d.height, ax, ay, f);
        double c[3] = {0.0, 0.0, 0.0};
        double wsum = 0.0;
        for (int k = 0; k < f.n; ++k) {
          if (aligned_invalid != nullptr && (*aligned_invalid)[base + f.idx[k]]) continue;
          const double* v = inpainted.voxel(base + f.idx[k]);
          for (int ch = 0; ch < 3; ++ch) c[ch] += f.w[k] * v[ch];
          wsum += f.w[k];
        }
        if (wsum <= 0.0) {
          // Whole footprint invalid: take the nearest tap regardless.
          const int nx = static_cast<int>(std::lround(ax)), ny = static_cast<int>(std::lround(ay));
          std::copy(inpainted.voxel(d.index(nx, ny, t)), inpainted.voxel(d.index(nx, ny, t)) + 3,
                    out.voxel(oi));
          continue;
        }
        for (int ch = 0; ch < 3; ++ch) out.voxel(oi)[ch] = c[ch] / wsum;
      }
  }
  return out;
}

}  // namespace vinp
