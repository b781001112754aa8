#pragma once

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "rar/error.hpp"
#include "rar/image.hpp"

namespace rar {

namespace detail {

inline int pnm_next_int(std::istream& in, const std::string& path) {
  // Skips whitespace and '#' comments per the PNM grammar.
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (!std::isspace(c)) {
      break;
    }
    c = in.get();
  }
  if (c == EOF) throw ParseError(path + ": truncated PNM header");
  int v = 0;
  bool any = false;
  while (c != EOF && std::isdigit(c)) {
    v = v * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw ParseError(path + ": malformed PNM header");
  return v;
}

}  // namespace detail

inline ImageFrame load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path + ": cannot open");
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    throw ParseError(path + ": not a binary PGM/PPM file");
  const bool gray = magic[1] == '5';
  const int w = detail::pnm_next_int(in, path);
  const int h = detail::pnm_next_int(in, path);
  const int maxval = detail::pnm_next_int(in, path);
  if (maxval != 255) throw ParseError(path + ": only maxval 255 supported");
  ImageFrame f(w, h);
  const std::size_t n = static_cast<std::size_t>(w) * h * (gray ? 1 : 3);
  std::vector<std::uint8_t> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw ParseError(path + ": truncated pixel data, missing " +
                     std::to_string(n - in.gcount()) + " bytes");
  if (gray) {
    for (std::size_t i = 0; i < raw.size(); ++i)
      f.pixels[i * 3] = f.pixels[i * 3 + 1] = f.pixels[i * 3 + 2] = raw[i];
  } else {
    f.pixels = std::move(raw);
  }
  return f;
}

inline void save_pnm(const ImageFrame& f, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot write");
  out << "P6\n" << f.width << " " << f.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(f.pixels.data()),
            static_cast<std::streamsize>(f.pixels.size()));
}

inline ImageFrame load_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw ParseError(path + ": cannot open");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw ParseError(path + ": PNG decode failed");
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  ImageFrame f(w, h);
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y)
    rows[y] = f.pixels.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return f;
}

inline void save_png(const ImageFrame& f, const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw DataError(path + ": cannot write");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw DataError(path + ": PNG encode failed");
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, f.width, f.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < f.height; ++y)
    png_write_row(png, const_cast<png_bytep>(
                           f.pixels.data() + static_cast<std::size_t>(y) * f.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

namespace detail {

// The stock libjpeg error handler calls exit(); route errors through
// setjmp so a corrupt file becomes a ParseError instead.
struct JpegErr {
  jpeg_error_mgr mgr;
  jmp_buf jump;
};

inline void jpeg_error_throw(j_common_ptr cinfo) {
  std::longjmp(reinterpret_cast<JpegErr*>(cinfo->err)->jump, 1);
}

}  // namespace detail

inline ImageFrame load_jpeg(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw ParseError(path + ": cannot open");
  jpeg_decompress_struct cinfo;
  detail::JpegErr jerr;
  cinfo.err = jpeg_std_error(&jerr.mgr);
  jerr.mgr.error_exit = detail::jpeg_error_throw;
  jerr.mgr.output_message = [](j_common_ptr) {};
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    throw ParseError(path + ": JPEG decode failed");
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  if (jpeg_read_header(&cinfo, TRUE) != JPEG_HEADER_OK) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    throw ParseError(path + ": not a JPEG file");
  }
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  ImageFrame f(static_cast<int>(cinfo.output_width),
               static_cast<int>(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = f.pixels.data() +
                   static_cast<std::size_t>(cinfo.output_scanline) * f.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(fp);
  return f;
}

// Dispatch on extension; PGM/PPM are handled natively, PNG and JPEG via the
// standard codecs.
inline ImageFrame load_image(const std::string& path) {
  auto dot = path.find_last_of('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(ch));
  if (ext == "png") return load_png(path);
  if (ext == "jpg" || ext == "jpeg") return load_jpeg(path);
  if (ext == "pgm" || ext == "ppm" || ext == "pnm") return load_pnm(path);
  throw ParseError(path + ": unsupported image format ." + ext);
}

}  // namespace rar
