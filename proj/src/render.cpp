#include "rme/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "rme/denoise.hpp"
#include "rme/errors.hpp"
#include "rme/tensor_io.hpp"

namespace rme::render {

GrayImage heatmap(const Field& field) {
  if (field.size() == 0) throw ShapeError("cannot render an empty field");
  if (!field.allFinite()) throw ArgumentError("cannot render a non-finite field");
  const auto wrapped = denoise::log_forward(field);
  GrayImage img{field.rows(), field.cols(), {}};
  img.pixels.resize(static_cast<std::size_t>(field.size()));
  for (Index m = 0; m < field.rows(); ++m) {
    for (Index n = 0; n < field.cols(); ++n) {
      const double v = std::clamp(wrapped.image(m, n), 0.0, 1.0);
      img.pixels[static_cast<std::size_t>(m * img.cols + n)] = static_cast<std::uint8_t>(std::lround(255.0 * v));
    }
  }
  return img;
}

namespace {

void on_png_error(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  *what = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void flush_nothing(png_structp) {}

struct Reader {
  const std::vector<std::uint8_t>* bytes;
  std::size_t pos = 0;
};

void read_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* rd = static_cast<Reader*>(png_get_io_ptr(png));
  if (rd->pos + len > rd->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, rd->bytes->data() + rd->pos, len);
  rd->pos += len;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  if (img.rows < 1 || img.cols < 1 || img.pixels.size() != static_cast<std::size_t>(img.rows * img.cols)) {
    throw ShapeError("image buffer does not match its dimensions");
  }
  std::string err;
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  if (!png) throw FormatError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("PNG encode failed: " + err);
  }
  png_set_write_fn(png, &out, append_bytes, flush_nothing);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols), static_cast<png_uint_32>(img.rows), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (Index r = 0; r < img.rows; ++r) {
    png_write_row(png, const_cast<png_bytep>(img.pixels.data() + r * img.cols));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

GrayImage decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("not a PNG stream");
  std::string err;
  Reader rd{&bytes};
  GrayImage img;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
  if (!png) throw FormatError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG decode failed: " + err);
  }
  png_set_read_fn(png, &rd, read_bytes);
  png_read_info(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("only 8-bit grayscale PNG is supported");
  }
  img.cols = static_cast<Index>(png_get_image_width(png, info));
  img.rows = static_cast<Index>(png_get_image_height(png, info));
  img.pixels.resize(static_cast<std::size_t>(img.rows * img.cols));
  for (Index r = 0; r < img.rows; ++r) png_read_row(png, img.pixels.data() + r * img.cols, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void render_heatmap(const Field& field, const std::filesystem::path& path) {
  const auto bytes = encode_png(heatmap(field));
  io::write_file_atomic(path, bytes);
}

}  // namespace rme::render
