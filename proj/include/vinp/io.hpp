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

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vinp/motion.hpp"
#include "vinp/pipeline.hpp"
#include "vinp/volume.hpp"

namespace vinp {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // RGB, row-major
};

namespace detail {

inline std::string lower_ext(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline RgbImage read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    throw IoError("not a PNG file: " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialisation failed for " + path.string());
  }
  RgbImage img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("cannot decode PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int type = png_get_color_type(png, info);
  if (depth == 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("16-bit images are not supported: " + path.string());
  }
  if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (type == PNG_COLOR_TYPE_GRAY || type == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  if (type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(img.width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG layout: " + path.string());
  }
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  rows.resize(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[y] = &img.pixels[static_cast<std::size_t>(y) * img.width * 3];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialisation failed for " + path.string());
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("cannot encode PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y)
    rows[y] = const_cast<png_bytep>(&img.pixels[static_cast<std::size_t>(y) * img.width * 3]);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(fp.get()) != 0) throw IoError("cannot write " + path.string());
}

// Binary PPM (P6) or PGM (P5), maxval 255.
inline RgbImage read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic;
  in >> magic;
  auto next_int = [&]() {
    int v = -1;
    while (in >> std::ws && in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
    }
    in >> v;
    return v;
  };
  if (magic != "P6" && magic != "P5") throw IoError("not a binary PPM/PGM file: " + path.string());
  RgbImage img;
  img.width = next_int();
  img.height = next_int();
  const int maxval = next_int();
  if (img.width < 1 || img.height < 1 || maxval != 255)
    throw IoError("unsupported PNM header in " + path.string());
  in.get();
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(n * 3);
  if (magic == "P6") {
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(n * 3));
  } else {
    std::vector<std::uint8_t> g(n);
    in.read(reinterpret_cast<char*>(g.data()), static_cast<std::streamsize>(n));
    for (std::size_t i = 0; i < n; ++i) std::fill_n(&img.pixels[i * 3], 3, g[i]);
  }
  if (!in) throw IoError("truncated image data in " + path.string());
  return img;
}

inline void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P6\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace detail

inline RgbImage read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("missing file " + path.string());
  const std::string ext = detail::lower_ext(path);
  if (ext == ".png") return detail::read_png(path);
  if (ext == ".ppm" || ext == ".pgm" || ext == ".pnm") return detail::read_pnm(path);
  throw IoError("unsupported image format: " + path.string());
}

inline void write_image(const std::filesystem::path& path, const RgbImage& img,
                        const std::string& format_ext) {
  if (format_ext == ".png") return detail::write_png(path, img);
  if (format_ext == ".ppm") return detail::write_ppm(path, img);
  throw IoError("unsupported output format '" + format_ext + "' for " + path.string());
}

// A numbered frame sequence: directory + printf-style pattern with one
// integer conversion, e.g. "frame_%05d.png".
struct SequenceSpec {
  std::filesystem::path directory;
  std::string pattern = "frame_%05d.png";
  int first = -1;  // -1: smallest index found on disk
  int count = -1;  // -1: every frame from `first` on

  std::filesystem::path frame_path(int index) const {
    const int n = std::snprintf(nullptr, 0, pattern.c_str(), index);
    if (n < 0) throw std::invalid_argument("bad frame pattern '" + pattern + "'");
    std::string name(static_cast<std::size_t>(n) + 1, '\0');
    std::snprintf(name.data(), name.size(), pattern.c_str(), index);
    name.resize(static_cast<std::size_t>(n));
    return directory / name;
  }
};

namespace detail {

inline std::regex pattern_regex(const std::string& pattern) {
  const std::size_t pct = pattern.find('%');
  const std::size_t d = pattern.find('d', pct);
  if (pct == std::string::npos || d == std::string::npos)
    throw std::invalid_argument("frame pattern needs an integer conversion: '" + pattern + "'");
  auto quote = [](const std::string& s) {
    static const std::regex special(R"([.^$|()\[\]{}*+?\\])");
    return std::regex_replace(s, special, R"(\$&)");
  };
  return std::regex(quote(pattern.substr(0, pct)) + "([0-9]+)" + quote(pattern.substr(d + 1)));
}

// Contiguous frame indices of a sequence; a hole in the numbering is an
// error naming the first missing frame.
inline std::vector<int> frame_indices(const SequenceSpec& spec) {
  if (spec.count >= 0 && spec.first >= 0) {
    std::vector<int> out;
    for (int i = 0; i < spec.count; ++i) {
      if (!std::filesystem::exists(spec.frame_path(spec.first + i)))
        throw IoError("missing frame " + std::to_string(spec.first + i) + " (" +
                      spec.frame_path(spec.first + i).string() + ")");
      out.push_back(spec.first + i);
    }
    return out;
  }
  if (!std::filesystem::is_directory(spec.directory))
    throw IoError("not a directory: " + spec.directory.string());
  const std::regex re = pattern_regex(spec.pattern);
  std::set<int> found;
  for (const auto& entry : std::filesystem::directory_iterator(spec.directory)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, re)) found.insert(std::stoi(m[1].str()));
  }
  if (found.empty())
    throw IoError("no frames matching '" + spec.pattern + "' in " + spec.directory.string());
  const int first = spec.first >= 0 ? spec.first : *found.begin();
  std::vector<int> out;
  for (int i = first; found.count(i) != 0; ++i) {
    out.push_back(i);
    if (spec.count >= 0 && static_cast<int>(out.size()) == spec.count) break;
  }
  if (out.empty() || (spec.count >= 0 && static_cast<int>(out.size()) < spec.count) ||
      (spec.count < 0 && *found.rbegin() > out.back())) {
    const int missing = out.empty() ? first : out.back() + 1;
    throw IoError("missing frame " + std::to_string(missing) + " (" +
                  spec.frame_path(missing).string() + ")");
  }
  return out;
}

}  // namespace detail

struct LoadedSequence {
  VideoVolume video;
  std::vector<int> indices;
};

inline LoadedSequence load_sequence_indexed(const SequenceSpec& spec) {
  const std::vector<int> idx = detail::frame_indices(spec);
  LoadedSequence out;
  out.indices = idx;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto path = spec.frame_path(idx[k]);
    const RgbImage img = read_image(path);
    if (k == 0) {
      out.video = VideoVolume(Dims{img.width, img.height, static_cast<int>(idx.size())});
    } else if (img.width != out.video.width() || img.height != out.video.height()) {
      throw IoError("frame " + std::to_string(idx[k]) + " (" + path.string() + ") is " +
                    std::to_string(img.width) + "x" + std::to_string(img.height) + ", expected " +
                    std::to_string(out.video.width()) + "x" + std::to_string(out.video.height()));
    }
    const std::size_t base = out.video.dims().index(0, 0, static_cast<int>(k));
    for (std::size_t i = 0; i < out.video.dims().frame_size(); ++i)
      for (int c = 0; c < 3; ++c) out.video.voxel(base + i)[c] = img.pixels[i * 3 + c];
  }
  return out;
}

inline VideoVolume load_sequence(const SequenceSpec& spec) {
  return load_sequence_indexed(spec).video;
}

// Mask frames: a voxel is occluded iff any channel exceeds 127.
inline OcclusionMask load_mask(const SequenceSpec& spec, const Dims& dims) {
  const VideoVolume m = load_sequence(spec);
  if (!(m.dims() == dims))
    throw IoError("mask sequence in " + spec.directory.string() + " is " + m.dims().str() +
                  ", video is " + dims.str());
  OcclusionMask out(dims);
  for (std::size_t i = 0; i < dims.voxels(); ++i) {
    const double* v = m.voxel(i);
    out.occluded[i] = (v[0] > 127.0 || v[1] > 127.0 || v[2] > 127.0) ? 1 : 0;
  }
  if (count(out.occluded) == dims.voxels())
    throw IoError("mask in " + spec.directory.string() + " occludes every voxel");
  return out;
}

// Clamp to [0, 255], round half to even.
inline std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::nearbyint(c));
}

// Writes frames to temporary names first and renames them only once
// every frame is encoded; on failure nothing new is left behind.
inline void save_sequence(const VideoVolume& u, const SequenceSpec& spec,
                          const std::vector<int>& indices = {}) {
  namespace fs = std::filesystem;
  const std::string ext = detail::lower_ext(fs::path(spec.pattern));
  const bool created = !fs::exists(spec.directory);
  std::error_code ec;
  if (created) {
    fs::create_directories(spec.directory, ec);
    if (ec) throw IoError("cannot create directory " + spec.directory.string() + ": " + ec.message());
  }
  std::vector<std::pair<fs::path, fs::path>> written;
  try {
    const Dims& d = u.dims();
    RgbImage img{d.width, d.height, std::vector<std::uint8_t>(d.frame_size() * 3)};
    for (int t = 0; t < d.frames; ++t) {
      const int index = indices.empty() ? std::max(spec.first, 0) + t : indices.at(t);
      const fs::path final_path = spec.frame_path(index);
      const fs::path tmp = final_path.parent_path() / ("." + final_path.filename().string() + ".tmp");
      const std::size_t base = d.index(0, 0, t);
      for (std::size_t i = 0; i < d.frame_size(); ++i)
        for (int c = 0; c < 3; ++c) img.pixels[i * 3 + c] = to_byte(u.voxel(base + i)[c]);
      written.emplace_back(tmp, final_path);
      write_image(tmp, img, ext);
    }
    for (const auto& [tmp, final_path] : written) {
      fs::rename(tmp, final_path, ec);
      if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
    }
  } catch (...) {
    for (const auto& [tmp, final_path] : written) fs::remove(tmp, ec);
    if (created) fs::remove_all(spec.directory, ec);
    throw;
  }
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("cannot write " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot write " + path.string());
  }
}

inline std::string format_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

inline void save_log(const std::vector<EnergyLogRow>& rows, const std::filesystem::path& path) {
  std::ostringstream s;
  s << "level,iteration,e,energy\n";
  for (const auto& r : rows)
    s << r.level << ',' << r.iteration << ',' << format_double(r.change) << ','
      << format_double(r.energy) << '\n';
  write_text_atomic(path, s.str());
}

inline void save_warps(const AffineChain& chain, const std::filesystem::path& path) {
  std::ostringstream s;
  s << "a1,a2,a3,a4,a5,a6\n";
  for (const auto& th : chain.to_reference) {
    const auto a = th.as_array();
    for (int i = 0; i < 6; ++i) s << (i ? "," : "") << format_double(a[i]);
    s << '\n';
  }
  write_text_atomic(path, s.str());
}

// `key = value` lines, '#' comments. Unknown keys are rejected.
using ConfigEntries = std::map<std::string, std::string>;

inline const std::set<std::string>& config_keys() {
  static const std::set<std::string> keys{
      "patch_size", "lambda",   "levels", "rho",     "pm_iters", "max_iters", "stop_eps",
      "texture",    "align",    "recon",  "seed",    "threads",  "r_max",     "feature_half_width"};
  return keys;
}

inline ConfigEntries parse_config(std::istream& in, const std::string& origin = "config") {
  ConfigEntries out;
  std::string line;
  int lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (config_keys().count(key) == 0)
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    out[key] = value;
  }
  return out;
}

inline ConfigEntries load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  return parse_config(in, path.string());
}

inline PatchShape parse_patch_size(const std::string& s) {
  int v[3];
  char c1 = 0, c2 = 0;
  std::istringstream in(s);
  if (!(in >> v[0] >> c1 >> v[1] >> c2 >> v[2]) || c1 != ',' || c2 != ',' || !(in >> std::ws).eof())
    throw std::invalid_argument("patch size must be X,Y,T, got '" + s + "'");
  return PatchShape(v[0], v[1], v[2]);
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "on" || s == "true" || s == "1" || s == "yes") return true;
  if (s == "off" || s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument(key + ": expected on/off, got '" + s + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& s) {
  std::istringstream in(s);
  T v{};
  if (!(in >> v) || !(in >> std::ws).eof())
    throw std::invalid_argument(key + ": invalid value '" + s + "'");
  return v;
}

inline void apply_config(const ConfigEntries& entries, PipelineConfig& cfg) {
  for (const auto& [key, value] : entries) {
    if (key == "patch_size") cfg.patch = parse_patch_size(value);
    else if (key == "lambda") cfg.lambda = parse_number<double>(key, value);
    else if (key == "levels") cfg.levels = value == "auto" ? 0 : parse_number<int>(key, value);
    else if (key == "rho") cfg.search.rho = parse_number<double>(key, value);
    else if (key == "pm_iters") cfg.search.iterations = parse_number<int>(key, value);
    else if (key == "max_iters") cfg.max_iterations = parse_number<int>(key, value);
    else if (key == "stop_eps") cfg.stop_threshold = parse_number<double>(key, value);
    else if (key == "texture") cfg.texture = parse_bool(key, value);
    else if (key == "align") cfg.align = parse_bool(key, value);
    else if (key == "recon") cfg.reconstruction = parse_reconstruction_mode(value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "threads") cfg.threads = parse_number<int>(key, value);
    else if (key == "r_max") cfg.search.r_max = parse_number<int>(key, value);
    else if (key == "feature_half_width") cfg.feature_half_width = parse_number<int>(key, value);
  }
  cfg.validate();
}

}  // namespace vinp
