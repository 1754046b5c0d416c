#include "fvv/image_io.hpp"

#include <png.h>

#include <bit>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fvv {

namespace {

std::ofstream open_out(const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

std::string slurp(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

// Reads the whitespace/comment separated header tokens of a PNM/PFM file.
class HeaderReader {
 public:
  HeaderReader(const std::string &data, std::string name) : data_(data), name_(std::move(name)) {}

  std::string token() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < data_.size() && !std::isspace(static_cast<unsigned char>(data_[pos_]))) ++pos_;
    if (start == pos_) throw ParseError(name_ + ": truncated header");
    return data_.substr(start, pos_ - start);
  }

  long integer() {
    const auto t = token();
    try {
      return std::stol(t);
    } catch (...) {
      throw ParseError(name_ + ": bad header value \"" + t + "\"");
    }
  }

  double real() {
    const auto t = token();
    try {
      return std::stod(t);
    } catch (...) {
      throw ParseError(name_ + ": bad header value \"" + t + "\"");
    }
  }

  // Exactly one whitespace byte separates the header from the payload.
  std::size_t payload_offset() {
    if (pos_ >= data_.size()) throw ParseError(name_ + ": truncated header");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < data_.size()) {
      if (data_[pos_] == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(data_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string &data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint8_t to_byte(double unit_value) {
  const double v = std::clamp(unit_value, 0.0, 1.0) * 255.0 + 0.5;
  return static_cast<std::uint8_t>(v);
}

void write_pgm(const std::filesystem::path &path, const Raster<std::uint8_t> &gray) {
  auto out = open_out(path);
  out << "P5\n" << gray.width() << " " << gray.height() << "\n255\n";
  out.write(reinterpret_cast<const char *>(gray.data().data()), static_cast<std::streamsize>(gray.size()));
}

Raster<std::uint8_t> read_pgm(const std::filesystem::path &path) {
  const std::string data = slurp(path);
  HeaderReader header(data, path.string());
  if (header.token() != "P5") throw ParseError(path.string() + ": not a binary PGM (P5)");
  const long w = header.integer();
  const long h = header.integer();
  const long maxval = header.integer();
  if (w <= 0 || h <= 0) throw ParseError(path.string() + ": bad dimensions");
  if (maxval != 255) throw ParseError(path.string() + ": only maxval 255 is supported");
  const std::size_t offset = header.payload_offset();
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (data.size() < offset + count) throw ParseError(path.string() + ": truncated pixel data");
  Raster<std::uint8_t> gray(static_cast<int>(w), static_cast<int>(h));
  std::memcpy(gray.data().data(), data.data() + offset, count);
  return gray;
}

Mask read_mask_pgm(const std::filesystem::path &path) {
  auto gray = read_pgm(path);
  for (auto &v : gray.data()) v = v >= 128 ? 1 : 0;
  return gray;
}

void write_mask_pgm(const std::filesystem::path &path, const Mask &mask) {
  Raster<std::uint8_t> gray(mask.width(), mask.height());
  for (std::size_t i = 0; i < mask.size(); ++i) gray[i] = mask[i] ? 255 : 0;
  write_pgm(path, gray);
}

void write_ppm(const std::filesystem::path &path, const ImageRgb &rgb) {
  auto out = open_out(path);
  out << "P6\n" << rgb.width() << " " << rgb.height() << "\n255\n";
  std::vector<std::uint8_t> bytes;
  bytes.reserve(rgb.size() * 3);
  for (const auto &c : rgb.data())
    for (int k = 0; k < 3; ++k) bytes.push_back(to_byte(c[k]));
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_pfm(const std::filesystem::path &path, const ScalarMap &values) {
  static_assert(std::endian::native == std::endian::little, "PFM writer assumes little-endian host");
  auto out = open_out(path);
  out << "Pf\n" << values.width() << " " << values.height() << "\n-1.0\n";
  std::vector<float> row(static_cast<std::size_t>(values.width()));
  for (int y = values.height() - 1; y >= 0; --y) {
    for (int x = 0; x < values.width(); ++x) row[x] = static_cast<float>(values(x, y));
    out.write(reinterpret_cast<const char *>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

ScalarMap read_pfm(const std::filesystem::path &path) {
  const std::string data = slurp(path);
  HeaderReader header(data, path.string());
  if (header.token() != "Pf") throw ParseError(path.string() + ": not a single-channel PFM");
  const long w = header.integer();
  const long h = header.integer();
  const double scale = header.real();
  if (w <= 0 || h <= 0) throw ParseError(path.string() + ": bad dimensions");
  if (!(scale < 0.0)) throw ParseError(path.string() + ": only little-endian PFM is supported");
  const std::size_t offset = header.payload_offset();
  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (data.size() < offset + count * sizeof(float)) throw ParseError(path.string() + ": truncated pixel data");
  ScalarMap values(static_cast<int>(w), static_cast<int>(h));
  const char *src = data.data() + offset;
  for (long y = h - 1; y >= 0; --y) {
    for (long x = 0; x < w; ++x) {
      float f;
      std::memcpy(&f, src, sizeof(float));
      src += sizeof(float);
      values(static_cast<int>(x), static_cast<int>(y)) = f;
    }
  }
  return values;
}

// ---------------------------------------------------------------------------
// PNG via libpng

namespace {

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto *out = static_cast<std::vector<std::uint8_t> *>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

void png_warn(png_structp, png_const_charp) {}

std::vector<std::uint8_t> encode_png(int width, int height, int channels, const std::vector<std::uint8_t> &pixels) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
  if (!png) throw Error("png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  std::vector<std::uint8_t> out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("png: encoding failed");
  }
  {
    png_set_write_fn(png, &out, png_append, png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
      auto *row = const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width * channels);
      png_write_row(png, row);
    }
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

struct PngReadCursor {
  const std::vector<std::uint8_t> *bytes;
  std::size_t pos;
};

void png_consume(png_structp png, png_bytep data, png_size_t length) {
  auto *cursor = static_cast<PngReadCursor *>(png_get_io_ptr(png));
  if (cursor->pos + length > cursor->bytes->size()) png_error(png, "truncated stream");
  std::memcpy(data, cursor->bytes->data() + cursor->pos, length);
  cursor->pos += length;
}

void write_bytes(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes) {
  auto out = open_out(path);
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

std::vector<std::uint8_t> encode_png_rgb(const ImageRgb &rgb) {
  std::vector<std::uint8_t> pixels;
  pixels.reserve(rgb.size() * 3);
  for (const auto &c : rgb.data())
    for (int k = 0; k < 3; ++k) pixels.push_back(to_byte(c[k]));
  return encode_png(rgb.width(), rgb.height(), 3, pixels);
}

std::vector<std::uint8_t> encode_png_gray(const Raster<std::uint8_t> &gray) {
  return encode_png(gray.width(), gray.height(), 1, gray.data());
}

void write_png(const std::filesystem::path &path, const ImageRgb &rgb) { write_bytes(path, encode_png_rgb(rgb)); }

void write_png(const std::filesystem::path &path, const Raster<std::uint8_t> &gray) {
  write_bytes(path, encode_png_gray(gray));
}

DecodedPng decode_png(const std::vector<std::uint8_t> &bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw ParseError("png: bad signature");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_warn);
  if (!png) throw Error("png: cannot create read struct");
  png_infop info = png_create_info_struct(png);
  DecodedPng result;
  PngReadCursor cursor{&bytes, 0};
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError("png: malformed or truncated stream");
  }
  {
    png_set_read_fn(png, &cursor, png_consume);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    png_set_palette_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    result.width = static_cast<int>(png_get_image_width(png, info));
    result.height = static_cast<int>(png_get_image_height(png, info));
    result.channels = png_get_channels(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    result.pixels.resize(stride * result.height);
    for (int y = 0; y < result.height; ++y) png_read_row(png, result.pixels.data() + y * stride, nullptr);
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return result;
}

}  // namespace fvv
