#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "fdgan/haze.hpp"
#include "fdgan/tensor.hpp"

namespace fdgan {

class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::uint8_t quantize(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace detail

/// Writes a 1x1xHxW (gray) or 1x3xHxW (RGB) tensor as an 8-bit PNG.
inline void write_png(const std::filesystem::path& path, const Tensor& img) {
  const Shape s = img.shape();
  if (s.n != 1 || (s.c != 1 && s.c != 3)) {
    throw ShapeError("write_png: expected 1x1xHxW or 1x3xHxW, got " + s.str());
  }
  detail::FilePtr file(std::fopen(path.string().c_str(), "wb"));
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng initialization failed");
  }
  std::vector<std::uint8_t> row(s.w * s.c);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(s.w), static_cast<png_uint_32>(s.h), 8,
               s.c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < s.h; ++y) {
    for (std::size_t x = 0; x < s.w; ++x) {
      for (std::size_t c = 0; c < s.c; ++c) row[x * s.c + c] = detail::quantize(img(0, c, y, x));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads any PNG as 1x3xHxW floats v/255 (gray is replicated, alpha dropped, 16-bit reduced).
inline Tensor read_png(const std::filesystem::path& path) {
  detail::FilePtr file(std::fopen(path.string().c_str(), "rb"));
  if (!file) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError(path.string() + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("libpng initialization failed");
  }
  std::vector<std::uint8_t> pixels;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<std::size_t>(width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("unsupported PNG layout in " + path.string());
  }
  pixels.resize(rowbytes * height);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Tensor img(Shape{1, 3, height, width});
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        img(0, c, y, x) = static_cast<float>(pixels[y * rowbytes + x * 3 + c]) / 255.0f;
      }
    }
  }
  return img;
}

/// First channel of a PNG read through read_png.
inline Tensor read_png_gray(const std::filesystem::path& path) {
  const Tensor rgb = read_png(path);
  Tensor g(Shape{1, 1, rgb.shape().h, rgb.shape().w});
  std::copy(rgb.plane(0, 0).begin(), rgb.plane(0, 0).end(), g.data());
  return g;
}

/// Rounds every value through 8-bit storage, exactly as a PNG round trip would.
inline Tensor quantize_8bit(const Tensor& t) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<float>(detail::quantize(t[i])) / 255.0f;
  return out;
}

struct ManifestEntry {
  std::size_t id = 0;
  std::string clear;
  std::string hazy;
  std::string transmission;
  double atmospheric_light = 0.0;
  double beta = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kManifestName = "manifest.txt";
inline constexpr const char* kManifestHeader = "# id clear hazy transmission A beta seed";

inline std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::ostringstream os;
  os << kManifestHeader << "\n";
  for (const auto& e : entries) {
    os << e.id << " " << e.clear << " " << e.hazy << " " << e.transmission << " "
       << std::setprecision(17) << e.atmospheric_light << " " << e.beta << " " << e.seed << "\n";
  }
  return os.str();
}

inline std::vector<ManifestEntry> parse_manifest(std::istream& in) {
  std::vector<ManifestEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    ManifestEntry e;
    if (!(is >> e.id >> e.clear >> e.hazy >> e.transmission >> e.atmospheric_light >> e.beta >> e.seed)) {
      throw IoError("manifest line " + std::to_string(lineno) + " is malformed");
    }
    out.push_back(e);
  }
  return out;
}

/// 64-bit FNV-1a, used to fingerprint manifests and checkpoints.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Writes clear/hazy/transmission PNGs plus manifest.txt; returns the manifest text.
inline std::string write_corpus(const std::filesystem::path& dir,
                                const std::vector<PairedSample>& samples, std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<ManifestEntry> entries;
  for (const auto& s : samples) {
    std::ostringstream stem;
    stem << std::setw(5) << std::setfill('0') << s.id;
    ManifestEntry e{s.id,
                    stem.str() + "_clear.png",
                    stem.str() + "_hazy.png",
                    stem.str() + "_trans.png",
                    s.params.atmospheric_light,
                    s.params.beta,
                    seed};
    write_png(dir / e.clear, s.clear);
    write_png(dir / e.hazy, s.hazy);
    write_png(dir / e.transmission, s.transmission);
    entries.push_back(e);
  }
  const std::string text = format_manifest(entries);
  std::ofstream out(dir / kManifestName, std::ios::binary);
  if (!(out << text)) throw IoError("cannot write manifest in " + dir.string());
  return text;
}

/// Loads a corpus written by write_corpus (images dequantized as v/255).
inline std::vector<PairedSample> read_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestName);
  if (!in) throw IoError("no " + std::string(kManifestName) + " in " + dir.string());
  std::vector<PairedSample> out;
  for (const auto& e : parse_manifest(in)) {
    PairedSample s;
    s.id = e.id;
    s.clear = read_png(dir / e.clear);
    s.hazy = read_png(dir / e.hazy);
    s.transmission = read_png_gray(dir / e.transmission);
    s.params = {e.atmospheric_light, e.beta};
    if (s.clear.shape() != s.hazy.shape()) {
      throw IoError("sample " + std::to_string(e.id) + ": clear and hazy sizes differ");
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw IoError("empty manifest in " + dir.string());
  return out;
}

}  // namespace fdgan
