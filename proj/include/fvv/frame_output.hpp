#pragma once

#include "fvv/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fvv {

enum class FrameMode { Rgb, Depth, Normal, Weights };

/// "rgb", "depth", "normal" or "weights"; anything else is a ConfigError.
FrameMode parse_frame_mode(const std::string &text);
std::string to_string(FrameMode mode);

/// Display rasters. Depth maps nearest foreground to white and farthest to a
/// dark gray, background black. Normals use n * 0.5 + 0.5.
ImageRgb normal_image(const NormalMap &normals);
Raster<std::uint8_t> depth_image(const DepthMap &depth);
Raster<std::uint8_t> weight_image(const BlendWeightMap &weights);

std::vector<std::uint8_t> frame_png(const FrameResult &frame, FrameMode mode);

/// color.png, depth.pfm (refined hi-res depth), normal.png, weights.pgm.
void write_frame(const FrameResult &frame, const std::filesystem::path &dir);

}  // namespace fvv
