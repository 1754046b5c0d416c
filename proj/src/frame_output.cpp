#include "fvv/frame_output.hpp"

#include "fvv/image_io.hpp"

#include <algorithm>

namespace fvv {

FrameMode parse_frame_mode(const std::string &text) {
  if (text == "rgb") return FrameMode::Rgb;
  if (text == "depth") return FrameMode::Depth;
  if (text == "normal") return FrameMode::Normal;
  if (text == "weights") return FrameMode::Weights;
  throw ConfigError("unknown mode \"" + text + "\" (expected rgb, depth, normal or weights)");
}

std::string to_string(FrameMode mode) {
  switch (mode) {
    case FrameMode::Rgb: return "rgb";
    case FrameMode::Depth: return "depth";
    case FrameMode::Normal: return "normal";
    case FrameMode::Weights: return "weights";
  }
  return "rgb";
}

ImageRgb normal_image(const NormalMap &normals) {
  ImageRgb out(normals.normals.width(), normals.normals.height(), Color::Zero());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (normals.valid[i]) out[i] = (normals.normals[i] * 0.5 + Vec3::Constant(0.5)).cast<float>();
  return out;
}

Raster<std::uint8_t> depth_image(const DepthMap &depth) {
  Raster<std::uint8_t> out(depth.width(), depth.height(), 0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double d : depth.depth.data())
    if (std::isfinite(d)) {
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  if (!(hi >= lo)) return out;
  const double range = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double d = depth.depth[i];
    if (std::isfinite(d)) out[i] = to_byte(1.0 - 0.75 * (d - lo) / range);
  }
  return out;
}

Raster<std::uint8_t> weight_image(const BlendWeightMap &weights) {
  Raster<std::uint8_t> out(weights.width(), weights.height(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = to_byte(weights[i]);
  return out;
}

std::vector<std::uint8_t> frame_png(const FrameResult &frame, FrameMode mode) {
  switch (mode) {
    case FrameMode::Rgb: return encode_png_rgb(frame.color);
    case FrameMode::Depth: return encode_png_gray(depth_image(frame.depth_refined));
    case FrameMode::Normal: return encode_png_rgb(normal_image(frame.normal));
    case FrameMode::Weights: return encode_png_gray(weight_image(frame.weights));
  }
  return {};
}

void write_frame(const FrameResult &frame, const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  write_png(dir / "color.png", frame.color);
  write_pfm(dir / "depth.pfm", frame.depth_refined.depth);
  write_png(dir / "normal.png", normal_image(frame.normal));
  write_pgm(dir / "weights.pgm", weight_image(frame.weights));
}

}  // namespace fvv
