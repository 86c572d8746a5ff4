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
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vinp/distance.hpp"
#include "vinp/parallel.hpp"
#include "vinp/random.hpp"
#include "vinp/volume.hpp"

namespace vinp {

// Soft correspondences: for each occluded voxel (scan order) a
// probability vector over source positions.
struct SoftWeights {
  double gamma = 0.0;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows;
};

inline SoftWeights dirac_weights(const ShiftMap& phi, const Mask& occluded) {
  SoftWeights w;
  for (std::size_t i = 0; i < occluded.voxels(); ++i) {
    if (!occluded[i]) continue;
    if (!phi.defined(i)) throw std::invalid_argument("dirac_weights: undefined shift in the hole");
    w.rows.push_back({{phi.dims().index(phi.source(i)), 1.0}});
  }
  return w;
}

// Soft-assignment energy with entropy regulariser,
//   sum_p [ sum_r w(p,r) d^2(W_p, W_r) + gamma sum_r w(p,r) log w(p,r) ],
// for the uniform intra-patch weight and squared l2 colour distance
// (0 log 0 = 0).
inline double arias_energy(const VideoVolume& u, const SoftWeights& weights,
                           const Mask& occluded, const PatchShape& shape) {
  const auto holes = indices_of(occluded);
  if (holes.size() != weights.rows.size())
    throw std::invalid_argument("arias_energy: one weight row per occluded voxel required");
  if (weights.gamma < 0.0) throw std::invalid_argument("arias_energy: gamma must be >= 0");
  const PatchDistance dist(u, nullptr, DistanceParams{0.0, shape});
  const Dims& d = u.dims();
  double total = 0.0;
  for (std::size_t k = 0; k < holes.size(); ++k) {
    double mass = 0.0;
    for (const auto& [src, w] : weights.rows[k]) {
      if (w < 0.0) throw std::invalid_argument("arias_energy: negative weight");
      mass += w;
    }
    if (std::abs(mass - 1.0) > 1e-9)
      throw std::invalid_argument("arias_energy: weights of a voxel must sum to one");
    const TargetWindow win = dist.window(d.voxel(holes[k]));
    double term = 0.0, entropy = 0.0;
    for (const auto& [src, w] : weights.rows[k]) {
      if (w == 0.0) continue;
      term += w * dist(win, d.voxel(src));
      entropy += w * std::log(w);
    }
    total += term + weights.gamma * entropy;
  }
  return total;
}

// u(p) = u(p + phi(p)) on `region` (the shift-map reconstruction).
inline VideoVolume copy_reconstruct(const VideoVolume& u, const ShiftMap& phi, const Mask& region) {
  VideoVolume out = u;
  for (std::size_t i = 0; i < region.voxels(); ++i) {
    if (!region[i]) continue;
    const double* s = u.voxel(u.dims().index(phi.source(i)));
    std::copy(s, s + 3, out.voxel(i));
  }
  return out;
}

// Shift-map form of the energy, which depends on u only through the
// sources: sum_p 1/|N_p| sum_{q in N_p} |u(q + phi(q)) - u(q + phi(p))|^2.
// Requires phi on every in-bounds q of every occluded patch.
inline double shift_map_energy(const VideoVolume& u, const ShiftMap& phi, const Mask& occluded,
                               const PatchShape& shape) {
  const Dims& d = u.dims();
  double total = 0.0;
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    if (!occluded[i]) continue;
    const Voxel p = d.voxel(i);
    const Shift sp = phi.shift(i);
    double sum = 0.0;
    int n = 0;
    for (int dt = -shape.ht(); dt <= shape.ht(); ++dt)
      for (int dy = -shape.hy(); dy <= shape.hy(); ++dy)
        for (int dx = -shape.hx(); dx <= shape.hx(); ++dx) {
          const Voxel q{p.x + dx, p.y + dy, p.t + dt};
          if (!d.contains(q)) continue;
          const std::size_t qi = d.index(q);
          if (!phi.defined(qi)) throw std::invalid_argument("shift_map_energy: undefined shift");
          const double* a = u.voxel(d.index(q + phi.shift(qi)));
          const double* b = u.voxel(d.index(q + sp));
          for (int c = 0; c < 3; ++c) sum += (a[c] - b[c]) * (a[c] - b[c]);
          ++n;
        }
    total += sum / n;
  }
  return total;
}

struct AmbiguityEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t successes = 0;
  std::uint64_t trials = 0;
};

// Monte Carlo estimate of P(|W - V|^2 < |W - Z|^2) for patches W, V with
// i.i.d. Normal(mu, sigma^2) components and the constant patch Z = mu.
// Trial i draws from its own counter-based stream, so the estimate does
// not depend on the thread count.
inline AmbiguityEstimate simulate_patch_ambiguity(int components, double sigma,
                                                  std::uint64_t trials, std::uint64_t seed,
                                                  int threads = 1, double mu = 128.0) {
  if (components < 1) throw std::invalid_argument("patch must have at least one component");
  if (trials < 1) throw std::invalid_argument("at least one trial required");
  if (sigma < 0.0) throw std::invalid_argument("sigma must be nonnegative");
  const int workers = std::max(1, threads);
  std::vector<std::uint64_t> hits(static_cast<std::size_t>(workers), 0);
  const std::uint64_t per = (trials + workers - 1) / workers;
  parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t b, std::size_t e) {
    for (std::size_t w = b; w < e; ++w) {
      const std::uint64_t lo = w * per, hi = std::min(trials, lo + per);
      std::uint64_t local = 0;
      for (std::uint64_t trial = lo; trial < hi; ++trial) {
        rng::Stream s(rng::key(seed, static_cast<std::uint64_t>(components), trial));
        double to_random = 0.0, to_constant = 0.0;
        for (int c = 0; c < components; ++c) {
          double g1, g2;
          s.normal_pair(g1, g2);
          const double wv = mu + sigma * g1;
          const double vv = mu + sigma * g2;
          to_random += (wv - vv) * (wv - vv);
          to_constant += (wv - mu) * (wv - mu);
        }
        if (to_random < to_constant) ++local;
      }
      hits[w] = local;
    }
  });
  AmbiguityEstimate r;
  r.trials = trials;
  for (auto h : hits) r.successes += h;
  r.estimate = static_cast<double>(r.successes) / static_cast<double>(trials);
  r.std_error = std::sqrt(r.estimate * (1.0 - r.estimate) / static_cast<double>(trials));
  return r;
}

// Patch shape written as "WxH" or "WxHxT".
struct AmbiguityShape {
  std::string name;
  int components = 0;
};

inline AmbiguityShape parse_ambiguity_shape(const std::string& text) {
  AmbiguityShape s{text, 1};
  std::size_t pos = 0;
  int dims = 0;
  while (pos <= text.size()) {
    const std::size_t next = text.find('x', pos);
    const std::string part = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    if (part.empty() || part.find_first_not_of("0123456789") != std::string::npos)
      throw std::invalid_argument("bad patch shape '" + text + "' (expected e.g. 5x5 or 3x3x3)");
    const int v = std::stoi(part);
    if (v < 1) throw std::invalid_argument("bad patch shape '" + text + "'");
    s.components *= v;
    ++dims;
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (dims < 2 || dims > 3)
    throw std::invalid_argument("bad patch shape '" + text + "' (need 2 or 3 extents)");
  return s;
}

// Published probabilities for grey-level variance 25.
struct ReferenceAmbiguity {
  const char* shape;
  double probability;
};

inline constexpr ReferenceAmbiguity kReferenceAmbiguity[] = {
    {"3x3", 8e-2},   {"5x5", 1e-2},    {"3x3x3", 6e-3}, {"7x7", 4.1e-4},
    {"9x9", 5.5e-6}, {"11x11", 3e-7},  {"5x5x5", 2e-7},
};

inline double reference_ambiguity(const std::string& shape) {
  for (const auto& r : kReferenceAmbiguity)
    if (shape == r.shape) return r.probability;
  return std::nan("");
}

}  // namespace vinp
