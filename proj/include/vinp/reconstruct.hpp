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
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vinp/parallel.hpp"
#include "vinp/volume.hpp"

namespace vinp {

enum class ReconstructionMode { weighted, unweighted, best_patch };

inline const char* to_string(ReconstructionMode m) {
  switch (m) {
    case ReconstructionMode::weighted: return "weighted";
    case ReconstructionMode::unweighted: return "unweighted";
    case ReconstructionMode::best_patch: return "best_patch";
  }
  return "?";
}

inline ReconstructionMode parse_reconstruction_mode(const std::string& s) {
  if (s == "weighted") return ReconstructionMode::weighted;
  if (s == "unweighted") return ReconstructionMode::unweighted;
  if (s == "best_patch" || s == "best-patch") return ReconstructionMode::best_patch;
  throw std::invalid_argument("unknown reconstruction mode '" + s + "'");
}

// Nearest-rank percentile (pct in (0, 100]) of an unsorted sample.
inline double nearest_rank_percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw std::invalid_argument("percentile of an empty sample");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(n)));
  rank = std::clamp<std::size_t>(rank, 1, n);
  return values[rank - 1];
}

namespace detail {

struct Contributor {
  std::size_t q;       // patch centre
  std::size_t source;  // p + phi(q)
  double cost;         // d^2(W_q, W_{q+phi(q)})
};

// Patches overlapping p (clipped to the volume) that have a shift and are
// not excluded, listed in scan order.
inline void gather_contributors(const ShiftMap& phi, const PatchShape& shape, Voxel p,
                                const Mask* exclude, std::vector<Contributor>& out) {
  out.clear();
  const Dims& d = phi.dims();
  for (int dt = -shape.ht(); dt <= shape.ht(); ++dt)
    for (int dy = -shape.hy(); dy <= shape.hy(); ++dy)
      for (int dx = -shape.hx(); dx <= shape.hx(); ++dx) {
        const Voxel q{p.x + dx, p.y + dy, p.t + dt};
        if (!d.contains(q)) continue;
        const std::size_t qi = d.index(q);
        if (!phi.defined(qi) || (exclude != nullptr && (*exclude)[qi])) continue;
        const Voxel s = p + phi.shift(qi);
        out.push_back({qi, d.index(s), phi.cost(qi)});
      }
}

// Fills `weights` for the contributors under `mode`; false if none usable.
inline bool contributor_weights(const std::vector<Contributor>& cs, ReconstructionMode mode,
                                std::vector<double>& weights) {
  weights.assign(cs.size(), 0.0);
  if (cs.empty()) return false;
  if (mode == ReconstructionMode::unweighted) {
    std::fill(weights.begin(), weights.end(), 1.0);
    return true;
  }
  if (mode == ReconstructionMode::best_patch) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < cs.size(); ++i)
      if (cs[i].cost < cs[best].cost) best = i;
    weights[best] = 1.0;
    return true;
  }
  std::vector<double> dists;
  dists.reserve(cs.size());
  for (const auto& c : cs) {
    if (std::isnan(c.cost))
      throw std::logic_error("weighted reconstruction needs fresh patch distances");
    if (std::isfinite(c.cost)) dists.push_back(std::sqrt(c.cost));
  }
  if (dists.empty()) {
    std::fill(weights.begin(), weights.end(), 1.0);
    return true;
  }
  const double sigma = nearest_rank_percentile(dists, 75.0);
  if (sigma == 0.0) {
    for (std::size_t i = 0; i < cs.size(); ++i) weights[i] = cs[i].cost == 0.0 ? 1.0 : 0.0;
    return true;
  }
  const double denom = 2.0 * sigma * sigma;
  for (std::size_t i = 0; i < cs.size(); ++i)
    weights[i] = std::isfinite(cs[i].cost) ? std::exp(-cs[i].cost / denom) : 0.0;
  return true;
}

// Rewrites the region voxels of `out` (a copy of `in`) from the shifted
// contributors. Returns the region voxels that had no contributor.
template <int C>
std::vector<std::size_t> aggregate(const Volume<double, C>& in, Volume<double, C>& out,
                                   const ShiftMap& phi, const std::vector<std::size_t>& region,
                                   const PatchShape& shape, ReconstructionMode mode,
                                   const Mask* exclude, int threads) {
  std::vector<std::uint8_t> missing(region.size(), 0);
  parallel_for(region.size(), threads, [&](std::size_t b, std::size_t e) {
    std::vector<Contributor> cs;
    std::vector<double> w;
    for (std::size_t j = b; j < e; ++j) {
      const std::size_t pi = region[j];
      gather_contributors(phi, shape, phi.dims().voxel(pi), exclude, cs);
      if (!contributor_weights(cs, mode, w)) {
        missing[j] = 1;
        continue;
      }
      double acc[C] = {};
      double wsum = 0.0;
      for (std::size_t i = 0; i < cs.size(); ++i) {
        if (w[i] == 0.0) continue;
        const double* v = in.voxel(cs[i].source);
        for (int c = 0; c < C; ++c) acc[c] += w[i] * v[c];
        wsum += w[i];
      }
      double* o = out.voxel(pi);
      if (wsum > 0.0) {
        for (int c = 0; c < C; ++c) o[c] = acc[c] / wsum;
      } else {
        // Every weight underflowed: fall back to the best contributor.
        std::size_t best = 0;
        for (std::size_t i = 1; i < cs.size(); ++i)
          if (cs[i].cost < cs[best].cost) best = i;
        const double* v = in.voxel(cs[best].source);
        for (int c = 0; c < C; ++c) o[c] = v[c];
      }
    }
  });
  std::vector<std::size_t> unresolved;
  for (std::size_t j = 0; j < region.size(); ++j)
    if (missing[j]) unresolved.push_back(region[j]);
  return unresolved;
}

}  // namespace detail

// u(p) = sum_q s_p^q u(p + phi(q)) / sum_q s_p^q over the patches q
// containing p, for every p in `region`. Weighted mode uses
// s = exp(-d^2 / (2 sigma_p^2)) with sigma_p the 75th percentile of the
// contributors' distances; voxels outside `region` are left untouched.
inline VideoVolume reconstruct_colors(const VideoVolume& u, const ShiftMap& phi,
                                      const Mask& region, const PatchShape& shape,
                                      ReconstructionMode mode, int threads = 1) {
  VideoVolume out = u;
  detail::aggregate(u, out, phi, indices_of(region), shape, mode, nullptr, threads);
  return out;
}

// Texture features reconstructed with the same weights as the colours.
inline TextureVolume reconstruct_features(const TextureVolume& features, const ShiftMap& phi,
                                          const Mask& region, const PatchShape& shape,
                                          ReconstructionMode mode = ReconstructionMode::weighted,
                                          int threads = 1) {
  TextureVolume out = features;
  detail::aggregate(features, out, phi, indices_of(region), shape, mode, nullptr, threads);
  return out;
}

// Best-patch pass: u(p) = u(p + phi(q*)) with q* the contributor of least
// distance (first in scan order on ties). Only copies existing colours.
inline VideoVolume final_reconstruct(const VideoVolume& u, const ShiftMap& phi,
                                     const Mask& occluded, const PatchShape& shape,
                                     int threads = 1) {
  return reconstruct_colors(u, phi, occluded, shape, ReconstructionMode::best_patch, threads);
}

struct LayerResult {
  VideoVolume colors;
  TextureVolume features;
  std::vector<std::size_t> unresolved;  // layer voxels without any contributor
};

// Onion-layer reconstruction: only patches centred outside the current
// occlusion contribute. Applied to both colours and features.
inline LayerResult layer_reconstruct(const VideoVolume& u, const TextureVolume& features,
                                     const ShiftMap& phi, const Mask& layer,
                                     const Mask& current_occlusion, const PatchShape& shape,
                                     ReconstructionMode mode = ReconstructionMode::weighted,
                                     int threads = 1) {
  LayerResult r{u, features, {}};
  const auto region = indices_of(layer);
  r.unresolved =
      detail::aggregate(u, r.colors, phi, region, shape, mode, &current_occlusion, threads);
  detail::aggregate(features, r.features, phi, region, shape, mode, &current_occlusion, threads);
  return r;
}

}  // namespace vinp
