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
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "vinp/distance.hpp"
#include "vinp/parallel.hpp"
#include "vinp/random.hpp"
#include "vinp/volume.hpp"

namespace vinp {

struct SearchParams {
  int iterations = 10;
  double rho = 0.5;       // window reduction factor of the random search
  int r_max = 0;          // 0: largest volume dimension
  std::uint64_t seed = 0;
  int threads = 1;
  bool tiled_propagation = false;  // nondeterministic-order tiles; off in strict mode

  void validate() const {
    if (iterations < 1) throw std::invalid_argument("PatchMatch needs at least one iteration");
    if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("rho must lie in (0, 1)");
    if (r_max < 0) throw std::invalid_argument("r_max must be positive");
  }
};

// floor(r_max * rho^k * delta), component-wise.
inline Shift random_search_offset(double r_max, double rho, int k, std::array<double, 3> delta) {
  const double radius = r_max * std::pow(rho, k);
  return {static_cast<int>(std::floor(radius * delta[0])),
          static_cast<int>(std::floor(radius * delta[1])),
          static_cast<int>(std::floor(radius * delta[2]))};
}

inline bool is_source(const Mask& sources, Voxel s) {
  return sources.dims().contains(s) && sources[sources.dims().index(s)] != 0;
}

// True iff every target has a defined shift landing in `sources`.
inline bool shifts_valid(const ShiftMap& phi, const Mask& targets, const Mask& sources) {
  for (std::size_t i = 0; i < targets.voxels(); ++i) {
    if (!targets[i]) continue;
    if (!phi.defined(i) || !is_source(sources, phi.source(i))) return false;
  }
  return true;
}

// Assigns every target a shift to a uniformly drawn source voxel.
inline void random_init(ShiftMap& phi, const Mask& targets, const Mask& sources,
                        std::uint64_t seed) {
  const std::vector<std::size_t> pool = indices_of(sources);
  if (pool.empty())
    throw std::runtime_error("no valid source patch: every patch overlaps the occlusion");
  const Dims& d = targets.dims();
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    if (!targets[i]) continue;
    const std::size_t pick = pool[rng::below(rng::key(seed, 0x1417, i), pool.size())];
    phi.set(i, d.voxel(pick) - d.voxel(i));
  }
}

inline ShiftMap random_init(const Mask& targets, const Mask& sources, std::uint64_t seed) {
  ShiftMap phi(targets.dims());
  random_init(phi, targets, sources, seed);
  return phi;
}

namespace detail {

struct SearchTarget {
  std::size_t index;
  TargetWindow window;
};

inline void propagate_one(const PatchDistance& dist, ShiftMap& phi, const Mask& sources,
                          const SearchTarget& target, int step, int t_lo, int t_hi) {
  const Dims& d = phi.dims();
  const Voxel p = target.window.p;
  double best = phi.cost(target.index);
  Voxel current = phi.source(target.index);
  const std::array<Voxel, 3> neighbours{Voxel{p.x + step, p.y, p.t}, Voxel{p.x, p.y + step, p.t},
                                        Voxel{p.x, p.y, p.t + step}};
  for (const Voxel& n : neighbours) {
    if (!d.contains(n) || n.t < t_lo || n.t > t_hi) continue;
    const std::size_t ni = d.index(n);
    if (!phi.defined(ni)) continue;
    const Shift s = phi.shift(ni);
    const Voxel candidate = p + s;
    if (candidate == current || !is_source(sources, candidate)) continue;
    const double c = dist(target.window, candidate, best);
    if (c < best) {
      best = c;
      current = candidate;
      phi.set(target.index, s, c);
    }
  }
}

}  // namespace detail

// Spatio-temporal PatchMatch. Alternates propagation scans (forward with
// -1 neighbours on even passes, backward with +1 neighbours on odd ones)
// and an exponentially shrinking random search around the current match.
// Every accepted change strictly lowers that target's distance.
inline void ann_search(const PatchDistance& dist, ShiftMap& phi, const Mask& targets,
                       const Mask& sources, const SearchParams& params) {
  params.validate();
  const Dims& d = phi.dims();
  if (!(targets.dims() == d) || !(sources.dims() == d))
    throw std::invalid_argument("ann_search: mask dims differ from the shift map");

  std::vector<detail::SearchTarget> list;
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    if (!targets[i]) continue;
    if (!phi.defined(i) || !is_source(sources, phi.source(i)))
      throw std::invalid_argument("ann_search: target without a valid initial shift");
    detail::SearchTarget st{i, dist.window(d.voxel(i))};
    if (st.window.count == 0) {
      phi.set_cost(i, kInfinity);
      continue;
    }
    list.push_back(st);
  }

  parallel_for(list.size(), params.threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      const auto& st = list[j];
      if (!phi.cost_fresh(st.index)) phi.set_cost(st.index, dist(st.window, phi.source(st.index)));
    }
  });

  const double r_max = params.r_max > 0 ? params.r_max
                                        : std::max({d.width, d.height, d.frames});
  const bool tiled = params.tiled_propagation && params.threads > 1 && d.frames > 1;

  for (int it = 0; it < params.iterations; ++it) {
    const bool forward = it % 2 == 0;
    const int step = forward ? -1 : 1;
    if (!tiled) {
      if (forward) {
        for (std::size_t j = 0; j < list.size(); ++j)
          detail::propagate_one(dist, phi, sources, list[j], step, 0, d.frames - 1);
      } else {
        for (std::size_t j = list.size(); j-- > 0;)
          detail::propagate_one(dist, phi, sources, list[j], step, 0, d.frames - 1);
      }
    } else {
      // Frame slabs scanned concurrently; the temporal candidate never
      // crosses a slab boundary, so no two workers touch the same entries.
      const int slabs = std::min(params.threads, d.frames);
      std::vector<std::size_t> start(static_cast<std::size_t>(slabs) + 1, list.size());
      std::vector<int> t_first(static_cast<std::size_t>(slabs) + 1, d.frames);
      for (int s = 0; s < slabs; ++s) t_first[s] = s * d.frames / slabs;
      for (int s = slabs; s-- > 0;) {
        const auto it_pos = std::lower_bound(
            list.begin(), list.end(), t_first[s],
            [](const detail::SearchTarget& st, int t) { return st.window.p.t < t; });
        start[s] = static_cast<std::size_t>(it_pos - list.begin());
      }
      parallel_for(static_cast<std::size_t>(slabs), slabs, [&](std::size_t b, std::size_t e) {
        for (std::size_t s = b; s < e; ++s) {
          const int t_lo = t_first[s], t_hi = t_first[s + 1] - 1;
          if (forward) {
            for (std::size_t j = start[s]; j < start[s + 1]; ++j)
              detail::propagate_one(dist, phi, sources, list[j], step, t_lo, t_hi);
          } else {
            for (std::size_t j = start[s + 1]; j-- > start[s];)
              detail::propagate_one(dist, phi, sources, list[j], step, t_lo, t_hi);
          }
        }
      });
    }

    parallel_for(list.size(), params.threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        const auto& st = list[j];
        rng::Stream stream(rng::key(params.seed, 0x5eed, static_cast<std::uint64_t>(it), st.index));
        double best = phi.cost(st.index);
        const Voxel p = st.window.p;
        for (int k = 1;; ++k) {
          const double radius = r_max * std::pow(params.rho, k);
          if (radius < 1.0) break;
          const std::array<double, 3> delta{2.0 * stream.uniform() - 1.0,
                                            2.0 * stream.uniform() - 1.0,
                                            2.0 * stream.uniform() - 1.0};
          const Shift off = random_search_offset(r_max, params.rho, k, delta);
          const Voxel candidate = phi.source(st.index) + off;
          if (!is_source(sources, candidate)) continue;
          const double c = dist(st.window, candidate, best);
          if (c < best) {
            best = c;
            phi.set(st.index, candidate - p, c);
          }
        }
      }
    });
  }
}

inline ShiftMap ann_search(const VideoVolume& u, const TextureVolume& features, ShiftMap phi,
                           const Mask& targets, const Mask& sources,
                           const DistanceParams& dparams, const SearchParams& sparams) {
  const PatchDistance dist(u, &features, dparams);
  ann_search(dist, phi, targets, sources, sparams);
  return phi;
}

// Exhaustive nearest neighbour over all sources; ties go to the first
// source in scan order.
inline ShiftMap brute_force_nn(const PatchDistance& dist, const Mask& targets, const Mask& sources,
                               int threads = 1) {
  const Dims& d = targets.dims();
  const std::vector<std::size_t> pool = indices_of(sources);
  if (pool.empty())
    throw std::runtime_error("no valid source patch: every patch overlaps the occlusion");
  const std::vector<std::size_t> list = indices_of(targets);
  ShiftMap phi(d);
  parallel_for(list.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      const std::size_t i = list[j];
      const Voxel p = d.voxel(i);
      const TargetWindow w = dist.window(p);
      double best = kInfinity;
      std::size_t arg = pool.front();
      for (std::size_t s : pool) {
        const double c = dist(w, d.voxel(s), best);
        if (c < best) {
          best = c;
          arg = s;
        }
      }
      phi.set(i, d.voxel(arg) - p, best);
    }
  });
  return phi;
}

inline ShiftMap brute_force_nn(const VideoVolume& u, const TextureVolume& features,
                               const Mask& targets, const Mask& sources,
                               const DistanceParams& dparams, int threads = 1) {
  return brute_force_nn(PatchDistance(u, &features, dparams), targets, sources, threads);
}

}  // namespace vinp
