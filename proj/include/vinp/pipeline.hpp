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
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vinp/distance.hpp"
#include "vinp/features.hpp"
#include "vinp/init.hpp"
#include "vinp/motion.hpp"
#include "vinp/patchmatch.hpp"
#include "vinp/pyramid.hpp"
#include "vinp/random.hpp"
#include "vinp/reconstruct.hpp"
#include "vinp/volume.hpp"

namespace vinp {

inline constexpr double kSentinel = -1.0;

struct PipelineConfig {
  PatchShape patch{5, 5, 5};
  double lambda = 50.0;
  int levels = 0;                  // 0: chosen from the occlusion size
  int max_iterations = 20;         // per pyramid level
  double stop_threshold = 0.1;     // mean per-channel colour change
  SearchParams search;             // iterations 10, rho 0.5
  ReconstructionMode reconstruction = ReconstructionMode::weighted;
  bool align = true;
  bool texture = true;
  int feature_half_width = -1;     // -1: derived from the level count
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const {
    patch.validate();
    search.validate();
    if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
    if (levels < 0) throw std::invalid_argument("levels must be >= 1 (or 0 for automatic)");
    if (max_iterations < 1) throw std::invalid_argument("max iterations must be >= 1");
    if (!(stop_threshold >= 0.0)) throw std::invalid_argument("stop threshold must be >= 0");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (reconstruction == ReconstructionMode::best_patch)
      throw std::invalid_argument("in-loop reconstruction must be weighted or unweighted");
  }
};

// Largest side of the per-frame bounding box of the occlusion.
inline int max_occlusion_extent(const Mask& occluded) {
  const Dims& d = occluded.dims();
  int side = 0;
  for (int t = 0; t < d.frames; ++t) {
    int x0 = d.width, x1 = -1, y0 = d.height, y1 = -1;
    for (int y = 0; y < d.height; ++y)
      for (int x = 0; x < d.width; ++x)
        if (occluded.at(x, y, t)) {
          x0 = std::min(x0, x);
          x1 = std::max(x1, x);
          y0 = std::min(y0, y);
          y1 = std::max(y1, y);
        }
    if (x1 >= 0) side = std::max({side, x1 - x0 + 1, y1 - y0 + 1});
  }
  return side;
}

// Smallest L whose coarsest occlusion extent is at most twice the spatial
// patch size, capped so the coarsest level still holds a whole patch.
inline int choose_num_levels(const Mask& occluded, const PatchShape& shape) {
  const Dims& d = occluded.dims();
  const int side = max_occlusion_extent(occluded);
  if (side == 0) throw std::invalid_argument("cannot choose levels for an empty occlusion");
  if (count(occluded) == d.voxels())
    throw std::invalid_argument("occlusion covers the whole video");
  const double limit = 2.0 * std::max(shape.sx, shape.sy);
  int levels = 1;
  while (side / std::pow(2.0, levels - 1) > limit) ++levels;
  int cap = 1;
  while (true) {
    const Dims next = level_dims(d, cap + 1);
    if (next.width < shape.sx || next.height < shape.sy || cap + 1 > 30) break;
    ++cap;
  }
  return std::min(levels, cap);
}

struct UpsampleStats {
  std::size_t targets = 0;
  std::size_t valid_before_repair = 0;
  std::size_t repaired = 0;
  std::size_t randomised = 0;
};

// Nearest-neighbour upsampling of a shift map to the next finer level:
// phi_f(x, y, t) = (2 dx, 2 dy, dt) of the coarse entry at (x/2, y/2, t).
// Cached coarse distances travel with their shifts. Entries on `targets`
// that miss `sources` are moved along their shift direction to the first
// valid centre, or redrawn at random when there is none.
inline ShiftMap upsample_shift_map(const ShiftMap& coarse, const Dims& fine,
                                   const Mask& targets, const Mask& sources, std::uint64_t seed,
                                   UpsampleStats* stats = nullptr) {
  const Dims& cd = coarse.dims();
  if (cd.frames != fine.frames || (fine.width + 1) / 2 != cd.width ||
      (fine.height + 1) / 2 != cd.height)
    throw std::invalid_argument("upsample_shift_map: " + fine.str() +
                                " is not the next finer level of " + cd.str());
  ShiftMap out(fine);
  UpsampleStats st;
  std::vector<std::size_t> pool;
  const int reach = std::max({fine.width, fine.height, fine.frames});
  for (std::size_t i = 0; i < fine.voxels(); ++i) {
    const Voxel p = fine.voxel(i);
    const std::size_t ci = cd.index(p.x / 2, p.y / 2, p.t);
    const bool is_target = targets[i] != 0;
    if (is_target) ++st.targets;
    if (!coarse.defined(ci)) {
      if (!is_target) continue;
      if (pool.empty()) pool = indices_of(sources);
      if (pool.empty()) throw std::runtime_error("upsample_shift_map: no valid source");
      const std::size_t pick = pool[rng::below(rng::key(seed, 0xf1e, i), pool.size())];
      out.set(i, fine.voxel(pick) - p, coarse.cost(ci));
      ++st.randomised;
      continue;
    }
    const Shift cs = coarse.shift(ci);
    const Shift s{2 * cs.dx, 2 * cs.dy, cs.dt};
    if (is_source(sources, p + s)) {
      out.set(i, s, coarse.cost(ci));
      if (is_target) ++st.valid_before_repair;
      continue;
    }
    if (!is_target) continue;
    const double norm = std::sqrt(double(s.dx) * s.dx + double(s.dy) * s.dy + double(s.dt) * s.dt);
    bool fixed = false;
    if (norm > 0.0) {
      for (int k = 1; k <= reach && !fixed; ++k) {
        const double f = 1.0 + k / norm;
        const Shift cand{static_cast<int>(std::lround(s.dx * f)),
                         static_cast<int>(std::lround(s.dy * f)),
                         static_cast<int>(std::lround(s.dt * f))};
        if (!fine.contains(p + cand)) break;
        if (is_source(sources, p + cand)) {
          out.set(i, cand, coarse.cost(ci));
          fixed = true;
        }
      }
    }
    if (fixed) {
      ++st.repaired;
      continue;
    }
    if (pool.empty()) pool = indices_of(sources);
    if (pool.empty()) throw std::runtime_error("upsample_shift_map: no valid source");
    const std::size_t pick = pool[rng::below(rng::key(seed, 0xf1e, i), pool.size())];
    out.set(i, fine.voxel(pick) - p, coarse.cost(ci));
    ++st.randomised;
  }
  if (stats != nullptr) *stats = st;
  return out;
}

// E(u, phi) = sum over the region of d^2(W_p, W_{p + phi(p)}).
inline double energy(const VideoVolume& u, const TextureVolume* features, const ShiftMap& phi,
                     const Mask& region, const PatchShape& shape, double lambda,
                     const Mask* known = nullptr) {
  const PatchDistance dist(u, features, DistanceParams{lambda, shape}, known);
  double total = 0.0;
  for (std::size_t i = 0; i < region.voxels(); ++i) {
    if (!region[i]) continue;
    if (!phi.defined(i)) throw std::invalid_argument("energy: undefined shift in the region");
    total += dist(phi.dims().voxel(i), phi.source(i));
  }
  return total;
}

inline double energy(const VideoVolume& u, const ShiftMap& phi, const Mask& region,
                     const PatchShape& shape) {
  return energy(u, nullptr, phi, region, shape, 0.0);
}

// Mean per-channel change on the region: |u_H - v_H|_2 / (3 |H|).
inline double mean_change(const VideoVolume& u, const VideoVolume& v, const Mask& region) {
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < region.voxels(); ++i) {
    if (!region[i]) continue;
    for (int c = 0; c < 3; ++c) {
      const double diff = u.voxel(i)[c] - v.voxel(i)[c];
      sq += diff * diff;
    }
    ++n;
  }
  return n == 0 ? 0.0 : std::sqrt(sq) / (3.0 * static_cast<double>(n));
}

struct EnergyLogRow {
  int level = 0;      // 1 = full resolution
  int iteration = 0;  // 1-based
  double change = 0.0;
  double energy = 0.0;
};

struct InpaintResult {
  VideoVolume video;
  int levels = 0;
  std::vector<EnergyLogRow> log;
  std::optional<AffineChain> chain;
  ShiftMap final_shifts;      // finest-level shift map used by the last pass
  OcclusionMask working_mask;  // occlusion in the (possibly aligned) working geometry
  VideoVolume working_video;   // finest-level result before unwarping
};

// Full multi-resolution inpainting of the occluded voxels of u.
inline InpaintResult inpaint(const VideoVolume& input, const OcclusionMask& mask,
                             const PipelineConfig& cfg) {
  cfg.validate();
  if (!(input.dims() == mask.dims()))
    throw std::invalid_argument("mask dims " + mask.dims().str() + " differ from video dims " +
                                input.dims().str());
  if (!all_finite(input)) throw std::invalid_argument("input video holds non-finite values");
  if (!any(mask.occluded)) throw std::invalid_argument("empty occlusion: nothing to inpaint");

  InpaintResult result;
  VideoVolume u = input;
  OcclusionMask work_mask = mask;
  if (cfg.align && input.frames() > 1) {
    AlignedVideo aligned = align_video(input, mask, cfg.threads);
    u = std::move(aligned.video);
    work_mask = std::move(aligned.mask);
    result.chain = std::move(aligned.chain);
  }
  const Dims& d = u.dims();
  for (std::size_t i = 0; i < d.voxels(); ++i) {
    if (work_mask.occluded[i]) std::fill_n(u.voxel(i), 3, kSentinel);
    else if (work_mask.invalid[i]) std::fill_n(u.voxel(i), 3, 0.0);
  }

  const int levels = cfg.levels > 0 ? cfg.levels : choose_num_levels(work_mask.occluded, cfg.patch);
  result.levels = levels;
  const int min_extent = std::max(cfg.patch.sx, cfg.patch.sy);
  const Mask known = work_mask.data_set();
  std::vector<VideoVolume> video = build_video_pyramid(u, levels, known, min_extent);
  std::vector<OcclusionMask> occ = build_occlusion_pyramid(work_mask, levels, min_extent);
  const int half = cfg.feature_half_width >= 0 ? cfg.feature_half_width
                                                : default_feature_half_width(levels);
  std::vector<TextureVolume> feat =
      build_texture_pyramid(compute_texture_features(u, half, known), levels, min_extent);
  for (int l = 1; l < levels; ++l)
    for (std::size_t i = 0; i < video[l].voxels(); ++i)
      if (occ[l].occluded[i]) std::fill_n(video[l].voxel(i), 3, kSentinel);

  const double lambda = cfg.texture ? cfg.lambda : 0.0;
  const DistanceParams dparams{lambda, cfg.patch};
  auto level_sources = [&](int l) {
    Mask s = valid_source_mask(occ[l], cfg.patch);
    if (!any(s))
      throw std::runtime_error("pyramid level " + std::to_string(l + 1) +
                               " has no valid source patch (occlusion too large for the video)");
    return s;
  };
  auto search_params = [&](int l, int k) {
    SearchParams sp = cfg.search;
    sp.threads = cfg.threads;
    sp.seed = rng::key(cfg.seed, 0xa11, static_cast<std::uint64_t>(l), static_cast<std::uint64_t>(k));
    return sp;
  };

  int l = levels - 1;
  Mask sources = level_sources(l);
  Mask targets = dilate_mask(occ[l].occluded, cfg.patch);
  ShiftMap phi(video[l].dims());
  random_init(phi, targets, sources, rng::key(cfg.seed, 0x12a));
  {
    InitResult init = onion_peel_init(video[l], feat[l], std::move(phi), occ[l], dparams,
                                      search_params(l, -1), cfg.reconstruction);
    video[l] = std::move(init.colors);
    feat[l] = std::move(init.features);
    phi = std::move(init.phi);
  }

  for (;; --l) {
    const Mask& hole = occ[l].occluded;
    const bool any_invalid = any(occ[l].invalid);
    const Mask valid = mask_not(occ[l].invalid);
    const Mask* dist_known = any_invalid ? &valid : nullptr;
    double change = kInfinity;
    for (int k = 0; change > cfg.stop_threshold && k < cfg.max_iterations; ++k) {
      const VideoVolume before = video[l];
      phi.invalidate_costs();
      {
        const PatchDistance dist(video[l], cfg.texture ? &feat[l] : nullptr, dparams, dist_known);
        ann_search(dist, phi, targets, sources, search_params(l, k));
      }
      video[l] = reconstruct_colors(video[l], phi, hole, cfg.patch, cfg.reconstruction,
                                    cfg.threads);
      feat[l] = reconstruct_features(feat[l], phi, hole, cfg.patch, cfg.reconstruction,
                                     cfg.threads);
      change = mean_change(video[l], before, hole);
      const double e = energy(video[l], cfg.texture ? &feat[l] : nullptr, phi, hole, cfg.patch,
                              lambda, dist_known);
      result.log.push_back({l + 1, k + 1, change, e});
    }
    if (l == 0) break;

    const Dims fine = video[l - 1].dims();
    sources = level_sources(l - 1);
    targets = dilate_mask(occ[l - 1].occluded, cfg.patch);
    phi = upsample_shift_map(phi, fine, targets, sources,
                             rng::key(cfg.seed, 0x0b5, static_cast<std::uint64_t>(l)));
    video[l - 1] = reconstruct_colors(video[l - 1], phi, occ[l - 1].occluded, cfg.patch,
                                      cfg.reconstruction, cfg.threads);
    feat[l - 1] = reconstruct_features(feat[l - 1], phi, occ[l - 1].occluded, cfg.patch,
                                       cfg.reconstruction, cfg.threads);
  }

  // Best-patch choice uses distances against the final colours.
  {
    const Mask valid = mask_not(occ[0].invalid);
    const PatchDistance dist(video[0], cfg.texture ? &feat[0] : nullptr, dparams,
                             any(occ[0].invalid) ? &valid : nullptr);
    const auto list = indices_of(targets);
    parallel_for(list.size(), cfg.threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j)
        phi.set_cost(list[j], dist(d.voxel(list[j]), phi.source(list[j])));
    });
  }
  VideoVolume finest = final_reconstruct(video[0], phi, occ[0].occluded, cfg.patch, cfg.threads);
  result.final_shifts = phi;
  result.working_mask = work_mask;

  if (result.chain) {
    result.video = unwarp_video(finest, *result.chain, input, mask, &work_mask.invalid);
  } else {
    result.video = input;
    for (std::size_t i = 0; i < d.voxels(); ++i)
      if (mask.occluded[i]) std::copy(finest.voxel(i), finest.voxel(i) + 3, result.video.voxel(i));
  }
  result.working_video = std::move(finest);
  return result;
}

}  // namespace vinp
