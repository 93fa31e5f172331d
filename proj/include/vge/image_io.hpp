#pragma once

// PPM (P6) and PNG image IO. PNG goes through libpng; everything is decoded
// to 8-bit RGB.

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <png.h>

#include "vge/errors.hpp"
#include "vge/frame.hpp"

namespace vge {

inline Frame read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string magic;
  in >> magic;
  if (magic != "P6") throw UnsupportedFormat("'" + path + "' is not a P6 ppm");

  auto next_token = [&in, &path]() -> long {
    // Skips whitespace and '#' comment lines between header fields.
    while (true) {
      int c = in.peek();
      if (c == '#') {
        std::string line;
        std::getline(in, line);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    long value = -1;
    in >> value;
    if (!in || value < 0) throw UnsupportedFormat("bad ppm header in '" + path + "'");
    return value;
  };

  long w = next_token(), h = next_token(), maxval = next_token();
  if (maxval != 255) throw UnsupportedFormat("ppm maxval must be 255 in '" + path + "'");
  in.get();  // single whitespace after header
  Frame frame(static_cast<int>(w), static_cast<int>(h));
  in.read(reinterpret_cast<char*>(frame.rgb.data()),
          static_cast<std::streamsize>(frame.rgb.size()));
  if (in.gcount() != static_cast<std::streamsize>(frame.rgb.size())) {
    throw IoError("truncated ppm '" + path + "'");
  }
  return frame;
}

inline void write_ppm(const std::string& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "P6\n" << frame.width << " " << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.rgb.data()),
            static_cast<std::streamsize>(frame.rgb.size()));
}

inline Frame read_png(const std::string& path) {
  std::FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open '" + path + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw UnsupportedFormat("'" + path + "' is not a decodable png");
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  png_uint_32 width = png_get_image_width(png, info);
  png_uint_32 height = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  // Normalize every input variant to 8-bit RGB.
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  Frame frame(static_cast<int>(width), static_cast<int>(height));
  std::vector<png_bytep> rows(height);
  for (png_uint_32 y = 0; y < height; ++y) {
    rows[y] = frame.rgb.data() + static_cast<size_t>(y) * width * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return frame;
}

inline void write_png(const std::string& path, const Frame& frame) {
  std::FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot write '" + path + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("png encode failed for '" + path + "'");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(frame.width),
               static_cast<png_uint_32>(frame.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(frame.height);
  for (int y = 0; y < frame.height; ++y) {
    rows[y] = const_cast<png_bytep>(frame.rgb.data() + static_cast<size_t>(y) * frame.width * 3);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

// PNG bytes in memory, for embedding frames into chat requests.
inline std::string encode_png(const Frame& frame) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    throw IoError("libpng init failed");
  }
  std::string buffer;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("png encode failed");
  }
  png_set_write_fn(
      png, &buffer,
      [](png_structp p, png_bytep data, png_size_t length) {
        auto* out = static_cast<std::string*>(png_get_io_ptr(p));
        out->append(reinterpret_cast<const char*>(data), length);
      },
      nullptr);
  png_set_IHDR(png, info, static_cast<png_uint_32>(frame.width),
               static_cast<png_uint_32>(frame.height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(frame.height);
  for (int y = 0; y < frame.height; ++y) {
    rows[y] = const_cast<png_bytep>(frame.rgb.data() + static_cast<size_t>(y) * frame.width * 3);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return buffer;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

inline Frame read_image(const std::string& path) {
  if (ends_with(path, ".ppm")) return read_ppm(path);
  if (ends_with(path, ".png")) return read_png(path);
  throw UnsupportedFormat("unsupported image format: '" + path + "'");
}

}  // namespace vge
