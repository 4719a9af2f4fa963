#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "latdiff/dataio/png_io.hpp"

namespace latdiff {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Decodes to 8-bit gray or RGB rows.
void read_png_bytes(const std::string& path, int& h, int& w, int& c,
                    std::vector<std::uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(ErrorKind::IoError, "cannot open " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(ErrorKind::IoError, "png init failed for " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorKind::IoError, "png init failed for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::UnsupportedFormat, "not a readable PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr,
               nullptr, nullptr);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  color_type = png_get_color_type(png, info);

  c = (color_type == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
  h = static_cast<int>(height);
  w = static_cast<int>(width);
  bytes.resize(static_cast<std::size_t>(h) * w * c);
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y)
    rows[y] = bytes.data() + static_cast<std::size_t>(y) * w * c;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
}

void write_png_bytes(const std::string& path, int h, int w, int c,
                     const std::vector<std::uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(ErrorKind::IoError, "cannot write " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) fail(ErrorKind::IoError, "png init failed for " + path);
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorKind::IoError, "png init failed for " + path);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::IoError, "png write failed for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = const_cast<png_bytep>(bytes.data() +
                                    static_cast<std::size_t>(y) * w * c);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImagePlane read_png(const std::string& path) {
  int h = 0, w = 0, c = 0;
  std::vector<std::uint8_t> bytes;
  read_png_bytes(path, h, w, c, bytes);
  ImagePlane img = make_image(h, w, c);
  for (std::size_t i = 0; i < bytes.size(); ++i)
    img.data.data[static_cast<Eigen::Index>(i)] = bytes[i] / Real(255);
  if (c == 3) img.channel_names = {"R", "G", "B"};
  return img;
}

void write_png(const ImagePlane& image, const std::string& path) {
  image.validate("write_png");
  const int c = image.channels();
  if (c != 1 && c != 3)
    fail(ErrorKind::UnsupportedFormat,
         "write_png: " + std::to_string(c) + " channels (want 1 or 3): " + path);
  std::vector<std::uint8_t> bytes(image.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    Real v = image.data.data[static_cast<Eigen::Index>(i)];
    v = v < 0 ? 0 : (v > 1 ? 1 : v);
    bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255));
  }
  write_png_bytes(path, image.height(), image.width(), c, bytes);
}

ChangeMask read_mask_png(const std::string& path) {
  int h = 0, w = 0, c = 0;
  std::vector<std::uint8_t> bytes;
  read_png_bytes(path, h, w, c, bytes);
  ChangeMask m = make_mask(h, w);
  for (std::size_t i = 0; i < m.data.size(); ++i)
    m.data[i] = bytes[i * c] >= 128 ? 1 : 0;
  return m;
}

void write_mask_png(const ChangeMask& mask, const std::string& path) {
  std::vector<std::uint8_t> bytes(mask.data.size());
  for (std::size_t i = 0; i < bytes.size(); ++i)
    bytes[i] = mask.data[i] ? 255 : 0;
  write_png_bytes(path, mask.h, mask.w, 1, bytes);
}

}  // namespace latdiff
