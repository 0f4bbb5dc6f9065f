#include "core/image_io.hpp"

#include <png.h>

#include <cctype>
#include <cstdio>
#include <cstring>
#include <memory>

#include "core/errors.hpp"
#include "core/io_util.hpp"

namespace dlsvm {
namespace {

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  std::string* out = static_cast<std::string*>(png_get_error_ptr(png));
  if (out && out->empty()) *out = msg;
  longjmp(png_jmpbuf(png), 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

GrayImage read_png(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw_input("cannot open " + path);

  std::string errmsg;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &errmsg, png_error_fn,
                                           png_warning_fn);
  if (!png) throw_internal("libpng: read struct allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw_internal("libpng: info struct allocation failed");
  }

  GrayImage img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw_format(path + ": " + (errmsg.empty() ? "corrupt PNG" : errmsg));
  }

  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(png, info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  if (png_get_rowbytes(png, info) != w) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw_format(path + ": PNG did not reduce to 8-bit gray");
  }

  img.h = h;
  img.w = w;
  img.pixels.resize(size_t(h) * w);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.pixels.data() + size_t(y) * w;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// PGM header tokens, skipping whitespace and # comments.
bool next_pgm_token(const std::string& buf, size_t& pos, std::string& tok) {
  while (pos < buf.size()) {
    if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  size_t start = pos;
  while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos])) &&
         buf[pos] != '#')
    ++pos;
  tok = buf.substr(start, pos - start);
  return !tok.empty();
}

size_t parse_pgm_size(const std::string& tok, const std::string& path, const char* what) {
  size_t val = 0;
  for (char c : tok) {
    if (!std::isdigit(static_cast<unsigned char>(c)))
      throw_format(path + ": bad PGM " + what);
    val = val * 10 + size_t(c - '0');
    if (val > 1u << 24) throw_format(path + ": PGM " + what + " out of range");
  }
  return val;
}

GrayImage read_pgm(const std::string& path, const std::string& buf) {
  size_t pos = 0;
  std::string tok;
  next_pgm_token(buf, pos, tok);
  bool ascii = tok == "P2";
  if (!ascii && tok != "P5") throw_format(path + ": not a PGM file");

  std::string wt, ht, mt;
  if (!next_pgm_token(buf, pos, wt) || !next_pgm_token(buf, pos, ht) ||
      !next_pgm_token(buf, pos, mt))
    throw_format(path + ": truncated PGM header");
  GrayImage img;
  img.w = parse_pgm_size(wt, path, "width");
  img.h = parse_pgm_size(ht, path, "height");
  size_t maxval = parse_pgm_size(mt, path, "maxval");
  if (img.w == 0 || img.h == 0) throw_format(path + ": empty PGM");
  if (maxval == 0 || maxval > 255) throw_format(path + ": unsupported PGM maxval");

  size_t count = img.h * img.w;
  img.pixels.resize(count);
  if (ascii) {
    for (size_t i = 0; i < count; ++i) {
      if (!next_pgm_token(buf, pos, tok)) throw_format(path + ": truncated PGM data");
      size_t v = parse_pgm_size(tok, path, "sample");
      if (v > maxval) throw_format(path + ": PGM sample exceeds maxval");
      img.pixels[i] = uint8_t(v);
    }
  } else {
    ++pos;  // single whitespace byte after maxval
    if (pos + count > buf.size()) throw_format(path + ": truncated PGM data");
    std::memcpy(img.pixels.data(), buf.data() + pos, count);
  }
  // Scale up small maxvals so all sources land on the same 0..255 range.
  if (maxval != 255)
    for (auto& p : img.pixels) p = uint8_t((size_t(p) * 255 + maxval / 2) / maxval);
  return img;
}

}  // namespace

GrayImage read_gray_image(const std::string& path) {
  std::string buf = read_entire_file(path);
  if (buf.size() >= 8 && std::memcmp(buf.data(), "\x89PNG\r\n\x1a\n", 8) == 0)
    return read_png(path);
  if (buf.size() >= 2 && buf[0] == 'P' && (buf[1] == '5' || buf[1] == '2'))
    return read_pgm(path, buf);
  throw_format(path + ": not a PNG or PGM image");
}

void write_pgm(const std::string& path, const GrayImage& img) {
  if (img.pixels.size() != img.h * img.w) throw_internal("write_pgm: pixel count mismatch");
  std::string out = "P5\n" + std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  atomic_write_file(path, out);
}

}  // namespace dlsvm
