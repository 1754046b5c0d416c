#pragma once

#include "fvv/raster.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fvv {

/// 8-bit grayscale, binary PGM (P5, maxval 255).
void write_pgm(const std::filesystem::path &path, const Raster<std::uint8_t> &gray);
Raster<std::uint8_t> read_pgm(const std::filesystem::path &path);

/// Foreground mask from a PGM: value >= 128 is foreground.
Mask read_mask_pgm(const std::filesystem::path &path);
void write_mask_pgm(const std::filesystem::path &path, const Mask &mask);

/// Binary PPM (P6); colors in [0,1] are quantized to 8 bits.
void write_ppm(const std::filesystem::path &path, const ImageRgb &rgb);

/// PFM ("Pf", single channel, little-endian float32, scale -1.0). Rows are
/// stored bottom-to-top as the format prescribes.
void write_pfm(const std::filesystem::path &path, const ScalarMap &values);
ScalarMap read_pfm(const std::filesystem::path &path);

/// PNG (8-bit RGB or gray).
std::vector<std::uint8_t> encode_png_rgb(const ImageRgb &rgb);
std::vector<std::uint8_t> encode_png_gray(const Raster<std::uint8_t> &gray);
void write_png(const std::filesystem::path &path, const ImageRgb &rgb);
void write_png(const std::filesystem::path &path, const Raster<std::uint8_t> &gray);

struct DecodedPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> pixels;
};
DecodedPng decode_png(const std::vector<std::uint8_t> &bytes);

std::uint8_t to_byte(double unit_value);

}  // namespace fvv
