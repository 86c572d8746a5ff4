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

#include <cstdint>
#include <vector>

#include "vinp/distance.hpp"
#include "vinp/patchmatch.hpp"
#include "vinp/reconstruct.hpp"
#include "vinp/volume.hpp"

namespace vinp {

// Erosion by the 3x3x3 cube. Neighbours outside the volume are ignored,
// so any mask short of the full volume loses at least one voxel.
inline Mask erode(const Mask& mask) {
  const Mask grown = detail::dilate_box(mask_not(mask), 1, 1, 1);
  return mask_and_not(mask, grown);
}

// Current onion layer: H' minus its erosion.
inline Mask onion_layer(const Mask& current_occlusion) {
  return mask_and_not(current_occlusion, erode(current_occlusion));
}

struct InitResult {
  VideoVolume colors;
  TextureVolume features;
  ShiftMap phi;
  int layers = 0;
  std::size_t fallback_voxels = 0;  // filled without any patch contributor
};

namespace detail {

// Mean over the known 6-neighbours; false if there is none.
template <int C>
bool neighbour_mean(const Volume<double, C>& v, const Mask& unknown, Voxel p, double* out) {
  static constexpr int kOff[6][3] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0},
                                     {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  const Dims& d = v.dims();
  double acc[C] = {};
  int n = 0;
  for (const auto& o : kOff) {
    const Voxel q{p.x + o[0], p.y + o[1], p.t + o[2]};
    if (!d.contains(q) || unknown[d.index(q)]) continue;
    const double* s = v.voxel(d.index(q));
    for (int c = 0; c < C; ++c) acc[c] += s[c];
    ++n;
  }
  if (n == 0) return false;
  for (int c = 0; c < C; ++c) out[c] = acc[c] / n;
  return true;
}

template <int C>
void known_mean(const Volume<double, C>& v, const Mask& unknown, double* out) {
  double acc[C] = {};
  std::size_t n = 0;
  for (std::size_t i = 0; i < v.voxels(); ++i) {
    if (unknown[i]) continue;
    for (int c = 0; c < C; ++c) acc[c] += v.voxel(i)[c];
    ++n;
  }
  for (int c = 0; c < C; ++c) out[c] = n > 0 ? acc[c] / n : 0.0;
}

}  // namespace detail

// Coarsest-level initialisation, filling the hole one shell at a time
// from its border inwards. Each shell is matched with the partial distance
// (only voxels outside the current occlusion compare) and reconstructed
// from the patches centred outside the current occlusion.
//
// `phi` must hold valid shifts on the dilated hole (e.g. from random_init).
inline InitResult onion_peel_init(const VideoVolume& u, const TextureVolume& features,
                                  ShiftMap phi, const OcclusionMask& mask,
                                  const DistanceParams& dparams, const SearchParams& sparams,
                                  ReconstructionMode mode = ReconstructionMode::weighted) {
  InitResult r{u, features, std::move(phi), 0, 0};
  if (!any(mask.occluded)) return r;

  const Dims& d = u.dims();
  const Mask sources = valid_source_mask(mask, dparams.shape);
  const Mask dilated = dilate_mask(mask.occluded, dparams.shape);

  // Patches centred on the rim of the hole contribute to the first shell,
  // so they are matched first (on their known part).
  {
    const Mask unknown = mask_or(mask.occluded, mask.invalid);
    const Mask known = mask_not(unknown);
    const Mask rim = mask_and_not(dilated, mask.occluded);
    const PatchDistance dist(r.colors, &r.features, dparams, &known);
    r.phi.invalidate_costs();
    SearchParams sp = sparams;
    sp.seed = rng::key(sparams.seed, 0x7a11);
    ann_search(dist, r.phi, rim, sources, sp);
  }

  Mask current = mask.occluded;
  while (any(current)) {
    const Mask layer = onion_layer(current);
    const Mask unknown = mask_or(current, mask.invalid);
    const Mask known = mask_not(unknown);
    {
      const PatchDistance dist(r.colors, &r.features, dparams, &known);
      SearchParams sp = sparams;
      sp.seed = rng::key(sparams.seed, 0x1a7e, static_cast<std::uint64_t>(r.layers));
      ann_search(dist, r.phi, layer, sources, sp);
    }
    LayerResult lr = layer_reconstruct(r.colors, r.features, r.phi, layer, current,
                                       dparams.shape, mode, sparams.threads);
    r.colors = std::move(lr.colors);
    r.features = std::move(lr.features);

    Mask next = erode(current);
    std::vector<std::size_t> deferred;
    for (std::size_t i : lr.unresolved) {
      const Voxel p = d.voxel(i);
      double c[3], f[2];
      if (detail::neighbour_mean(r.colors, unknown, p, c) &&
          detail::neighbour_mean(r.features, unknown, p, f)) {
        std::copy(c, c + 3, r.colors.voxel(i));
        std::copy(f, f + 2, r.features.voxel(i));
        ++r.fallback_voxels;
      } else {
        deferred.push_back(i);
      }
    }
    if (!deferred.empty()) {
      if (deferred.size() == count(layer)) {
        // No progress possible from neighbours: force-fill the shell.
        double c[3], f[2];
        detail::known_mean(r.colors, unknown, c);
        detail::known_mean(r.features, unknown, f);
        for (std::size_t i : deferred) {
          std::copy(c, c + 3, r.colors.voxel(i));
          std::copy(f, f + 2, r.features.voxel(i));
          ++r.fallback_voxels;
        }
      } else {
        for (std::size_t i : deferred) next[i] = 1;
      }
    }
    current = std::move(next);
    ++r.layers;
  }
  return r;
}

}  // namespace vinp
