// SPDX-License-Identifier: Apache-2.0
#include "mssf/data/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace mssf::data {

namespace {

std::string extension(const std::string& path) {
  const auto dot = path.rfind('.');
  if (dot == std::string::npos) return {};
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  (void)png;
  throw InputError(std::string("png: ") + msg);
}

void png_warn(png_structp, png_const_charp) {}

TensorF load_png(const std::string& path) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw InputError("cannot open image " + path);
  png_byte sig[8];
  if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8)) throw InputError(path + " is not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_read_struct(p, i, nullptr); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_RGB && color != PNG_COLOR_TYPE_PALETTE)
    throw InputError(path + ": only RGB images are supported (color type " + std::to_string(color) + ")");
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) throw InputError(path + ": transparency is not supported");
  if (depth == 16) png_set_swap(png);  // host order on little-endian hosts
  png_read_update_info(png, info);
  const std::size_t w = png_get_image_width(png, info), h = png_get_image_height(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<png_byte> buf(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (std::size_t y = 0; y < h; ++y) rows[y] = buf.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);

  TensorF out({3, h, w});
  auto o = out.mutable_data();
  const bool wide = depth == 16;
  const float peak = wide ? 65535.0f : 255.0f;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        float v;
        if (wide) {
          std::uint16_t s;
          std::memcpy(&s, rows[y] + (x * 3 + c) * 2, 2);
          v = static_cast<float>(s) / peak;
        } else {
          v = static_cast<float>(rows[y][x * 3 + c]) / peak;
        }
        o[(c * h + y) * w + x] = v;
      }
  return out;
}

// Reads the next whitespace-delimited header token, skipping comments.
std::string ppm_token(std::istream& is) {
  std::string tok;
  char ch;
  while (is.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(is, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

TensorF load_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open image " + path);
  if (ppm_token(is) != "P6") throw InputError(path + ": only binary RGB PPM (P6) is supported");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(ppm_token(is));
    h = std::stoul(ppm_token(is));
    maxval = std::stoul(ppm_token(is));
  } catch (const std::exception&) {
    throw InputError(path + ": malformed PPM header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw InputError(path + ": malformed PPM header");
  const bool wide = maxval > 255;
  std::vector<unsigned char> buf(w * h * 3 * (wide ? 2 : 1));
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw InputError(path + ": truncated PPM data");
  TensorF out({3, h, w});
  auto o = out.mutable_data();
  const auto peak = static_cast<float>(maxval);
  for (std::size_t i = 0; i < w * h; ++i)
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t k = i * 3 + c;
      const unsigned v = wide ? (unsigned(buf[2 * k]) << 8) | buf[2 * k + 1] : buf[k];
      o[c * w * h + i] = static_cast<float>(v) / peak;
    }
  return out;
}

std::vector<std::uint16_t> quantize(const TensorF& image, unsigned maxval) {
  std::vector<std::uint16_t> q(image.numel());
  const std::size_t h = image.dim(1), w = image.dim(2);
  auto d = image.data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < h * w; ++i) {
      const double v = std::clamp(static_cast<double>(d[c * h * w + i]), 0.0, 1.0);
      q[i * 3 + c] = static_cast<std::uint16_t>(std::lround(v * maxval));
    }
  return q;
}

void write_png(const std::string& path, std::size_t w, std::size_t h, int depth, const std::vector<png_byte>& bytes) {
  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw InputError("cannot write image " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  png_infop info = png_create_info_struct(png);
  struct Guard {
    png_structp* p;
    png_infop* i;
    ~Guard() { png_destroy_write_struct(p, i); }
  } guard{&png, &info};
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), depth, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t rowbytes = w * 3 * static_cast<std::size_t>(depth / 8);
  for (std::size_t y = 0; y < h; ++y) png_write_row(png, bytes.data() + y * rowbytes);
  png_write_end(png, nullptr);
}

}  // namespace

TensorF load_image(const std::string& path) {
  const auto ext = extension(path);
  if (ext == "png") return load_png(path);
  if (ext == "ppm" || ext == "pnm") return load_ppm(path);
  throw InputError("unsupported image format for " + path + " (expected .png or .ppm)");
}

void save_image(const std::string& path, const TensorF& image, BitDepth depth) {
  if (image.rank() != 3 || image.dim(0) != 3)
    throw DimensionError("save_image: expected [3,H,W], got " + shape_str(image.shape()));
  const std::size_t h = image.dim(1), w = image.dim(2);
  const bool wide = depth == BitDepth::sixteen;
  const auto q = quantize(image, wide ? 65535u : 255u);
  std::vector<png_byte> bytes;
  bytes.reserve(q.size() * (wide ? 2 : 1));
  for (auto v : q) {
    if (wide) bytes.push_back(static_cast<png_byte>(v >> 8));  // both formats store big-endian samples
    bytes.push_back(static_cast<png_byte>(v & 0xff));
  }
  const auto ext = extension(path);
  if (ext == "png") {
    write_png(path, w, h, wide ? 16 : 8, bytes);
  } else if (ext == "ppm" || ext == "pnm") {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot write image " + path);
    os << "P6\n" << w << " " << h << "\n" << (wide ? 65535 : 255) << "\n";
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw InputError("failed writing " + path);
  } else {
    throw InputError("unsupported image format for " + path + " (expected .png or .ppm)");
  }
}

void write_png_rgb8(const std::string& path, std::size_t width, std::size_t height,
                    const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != width * height * 3) throw DimensionError("write_png_rgb8: buffer size mismatch");
  write_png(path, width, height, 8, rgb);
}

}  // namespace mssf::data
