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

// vinp: command-line front end.
//
//   vinp inpaint --input in/ --mask mask/ --output out/ [options]
//   vinp ambiguity-table [--shapes 3x3,5x5] [--trials N]
//   vinp estimate-motion --input in/ [--mask mask/] --dump-warps warps.csv
//   vinp version

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vinp/vinp.hpp"

namespace {

struct PipelineFlags {
  std::optional<std::string> patch_size;
  std::optional<double> lambda;
  std::optional<std::string> levels;
  std::optional<double> rho;
  std::optional<int> pm_iters;
  std::optional<int> max_iters;
  std::optional<double> stop_eps;
  std::optional<std::string> recon;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool no_texture = false;
  bool no_align = false;
  std::string config;
};

struct InpaintArgs {
  std::string input, mask, output, pattern = "frame_%05d.png", mask_pattern, output_pattern;
  std::string log_energy, dump_warps;
  PipelineFlags flags;
};

struct TableArgs {
  std::string shapes = "3x3,5x5,3x3x3,7x7,9x9,11x11,5x5x5";
  std::uint64_t trials = 10000000;
  double sigma = 5.0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output;
};

struct MotionArgs {
  std::string input, mask, pattern = "frame_%05d.png", dump_warps;
  int threads = 1;
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
  cmd->add_option("--patch-size", f.patch_size, "patch extents X,Y,T (odd) [5,5,5]");
  cmd->add_option("--lambda", f.lambda, "texture feature weight [50]");
  cmd->add_option("--levels", f.levels, "pyramid levels, or 'auto' [auto]");
  cmd->add_option("--rho", f.rho, "random search window reduction factor [0.5]");
  cmd->add_option("--pm-iters", f.pm_iters, "PatchMatch iterations per search [10]");
  cmd->add_option("--max-iters", f.max_iters, "search/reconstruction iterations per level [20]");
  cmd->add_option("--stop-eps", f.stop_eps, "per-level stopping threshold [0.1]");
  cmd->add_flag("--no-texture", f.no_texture, "disable texture features");
  cmd->add_flag("--no-align", f.no_align, "skip affine realignment");
  cmd->add_option("--recon", f.recon, "in-loop reconstruction: weighted|unweighted [weighted]")
      ->check(CLI::IsMember({"weighted", "unweighted"}));
  cmd->add_option("--seed", f.seed, "random seed [0]");
  cmd->add_option("--threads", f.threads, "worker threads; 1 is strict deterministic mode [1]")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--config", f.config, "config file of key = value lines")->check(CLI::ExistingFile);
}

vinp::PipelineConfig resolve_config(const PipelineFlags& f) {
  vinp::PipelineConfig cfg;
  if (!f.config.empty()) vinp::apply_config(vinp::load_config(f.config), cfg);
  vinp::ConfigEntries cli;
  if (f.patch_size) cli["patch_size"] = *f.patch_size;
  if (f.levels) cli["levels"] = *f.levels;
  if (f.recon) cli["recon"] = *f.recon;
  vinp::apply_config(cli, cfg);
  if (f.lambda) cfg.lambda = *f.lambda;
  if (f.rho) cfg.search.rho = *f.rho;
  if (f.pm_iters) cfg.search.iterations = *f.pm_iters;
  if (f.max_iters) cfg.max_iterations = *f.max_iters;
  if (f.stop_eps) cfg.stop_threshold = *f.stop_eps;
  if (f.seed) cfg.seed = *f.seed;
  if (f.threads) cfg.threads = *f.threads;
  if (f.no_texture) cfg.texture = false;
  if (f.no_align) cfg.align = false;
  cfg.validate();
  return cfg;
}

int run_inpaint(const InpaintArgs& a) {
  const vinp::PipelineConfig cfg = resolve_config(a.flags);
  vinp::SequenceSpec in{a.input, a.pattern};
  const vinp::LoadedSequence video = vinp::load_sequence_indexed(in);
  vinp::SequenceSpec mspec{a.mask, a.mask_pattern.empty() ? a.pattern : a.mask_pattern,
                           -1, video.video.frames()};
  const vinp::OcclusionMask mask = vinp::load_mask(mspec, video.video.dims());
  const vinp::InpaintResult r = vinp::inpaint(video.video, mask, cfg);
  vinp::SequenceSpec out{a.output, a.output_pattern.empty() ? a.pattern : a.output_pattern};
  vinp::save_sequence(r.video, out, video.indices);
  if (!a.log_energy.empty()) vinp::save_log(r.log, a.log_energy);
  if (!a.dump_warps.empty()) {
    vinp::AffineChain chain = r.chain ? *r.chain
                                      : vinp::chain_to_reference(
                                            std::vector<vinp::AffineParams>(
                                                video.video.frames() - 1,
                                                vinp::AffineParams::identity()),
                                            video.video.frames());
    vinp::save_warps(chain, a.dump_warps);
  }
  return 0;
}

int run_table(const TableArgs& a) {
  std::vector<vinp::AmbiguityShape> shapes;
  std::stringstream ss(a.shapes);
  for (std::string item; std::getline(ss, item, ',');) shapes.push_back(vinp::parse_ambiguity_shape(item));
  std::ostringstream csv;
  csv << "shape,trials,estimate,stderr,reference\n";
  for (const auto& s : shapes) {
    const auto e = vinp::simulate_patch_ambiguity(s.components, a.sigma, a.trials, a.seed, a.threads);
    const double ref = vinp::reference_ambiguity(s.name);
    csv << s.name << ',' << e.trials << ',' << vinp::format_double(e.estimate) << ','
        << vinp::format_double(e.std_error) << ',';
    if (ref > 0.0) csv << vinp::format_double(ref);
    csv << '\n';
  }
  if (a.output.empty()) {
    std::cout << csv.str();
  } else {
    vinp::write_text_atomic(a.output, csv.str());
  }
  return 0;
}

int run_motion(const MotionArgs& a) {
  const vinp::VideoVolume u = vinp::load_sequence(vinp::SequenceSpec{a.input, a.pattern});
  vinp::OcclusionMask mask(u.dims());
  if (!a.mask.empty())
    mask = vinp::load_mask(vinp::SequenceSpec{a.mask, a.pattern, -1, u.frames()}, u.dims());
  const vinp::AlignedVideo aligned = vinp::align_video(u, mask, a.threads);
  if (a.dump_warps.empty()) {
    std::cout << "a1,a2,a3,a4,a5,a6\n";
    for (const auto& th : aligned.chain.to_reference) {
      const auto p = th.as_array();
      for (int i = 0; i < 6; ++i) std::cout << (i ? "," : "") << vinp::format_double(p[i]);
      std::cout << '\n';
    }
  } else {
    vinp::save_warps(aligned.chain, a.dump_warps);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vinp: patch-based video inpainting"};
  app.require_subcommand(1);

  InpaintArgs inp;
  auto* c_inpaint = app.add_subcommand("inpaint", "fill the masked region of a frame sequence");
  c_inpaint->add_option("--input", inp.input, "input frame directory")->required();
  c_inpaint->add_option("--mask", inp.mask, "mask frame directory (white = fill)")->required();
  c_inpaint->add_option("--output", inp.output, "output frame directory")->required();
  c_inpaint->add_option("--pattern", inp.pattern, "frame filename pattern")->capture_default_str();
  c_inpaint->add_option("--mask-pattern", inp.mask_pattern, "mask filename pattern [--pattern]");
  c_inpaint->add_option("--output-pattern", inp.output_pattern, "output filename pattern [--pattern]");
  c_inpaint->add_option("--log-energy", inp.log_energy, "write per-iteration CSV log");
  c_inpaint->add_option("--dump-warps", inp.dump_warps, "write per-frame affine warps as CSV");
  add_pipeline_flags(c_inpaint, inp.flags);

  TableArgs tab;
  auto* c_table = app.add_subcommand("ambiguity-table", "simulate random-vs-constant patch ambiguity");
  c_table->add_option("--shapes", tab.shapes, "comma-separated WxH or WxHxT shapes")->capture_default_str();
  c_table->add_option("--trials", tab.trials, "trials per shape")->capture_default_str();
  c_table->add_option("--sigma", tab.sigma, "grey-level standard deviation")->capture_default_str();
  c_table->add_option("--seed", tab.seed, "random seed")->capture_default_str();
  c_table->add_option("--threads", tab.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  c_table->add_option("--output", tab.output, "CSV path [stdout]");

  MotionArgs mot;
  auto* c_motion = app.add_subcommand("estimate-motion", "estimate dominant affine motion only");
  c_motion->add_option("--input", mot.input, "input frame directory")->required();
  c_motion->add_option("--mask", mot.mask, "mask frame directory (white = ignore)");
  c_motion->add_option("--pattern", mot.pattern, "frame filename pattern")->capture_default_str();
  c_motion->add_option("--dump-warps", mot.dump_warps, "CSV path [stdout]");
  c_motion->add_option("--threads", mot.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();

  auto* c_version = app.add_subcommand("version", "print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*c_inpaint) return run_inpaint(inp);
    if (*c_table) return run_table(tab);
    if (*c_motion) return run_motion(mot);
    if (*c_version) {
      std::cout << "vinp " << vinp::kVersion << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "vinp: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
