#pragma once

#include "fvv/camera.hpp"
#include "fvv/raster.hpp"
#include "fvv/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

namespace fvv {

/// Continuous occupancy s in [0,1] over 3D space, plus the sub-segment offset
/// o in [-1,1] used to refine a bracketed surface crossing.
class OccupancyField {
 public:
  virtual ~OccupancyField() = default;

  /// `depth` is the camera-space z of `point` in the view being rendered.
  virtual double occupancy(const Vec3 &point, double depth) const = 0;

  /// Position of the surface inside the segment [a, b], mapped linearly to
  /// [-1, 1] (a -> -1, b -> +1). The analytic backend throws NoCrossingError
  /// when the segment does not straddle the 0.5 level.
  virtual double offset(const Vec3 &a, const Vec3 &b) const = 0;
};

/// Oracle backend: s = logistic(-sdf / tau); offsets by bisection.
class AnalyticField final : public OccupancyField {
 public:
  static constexpr int kBisectionIterations = 20;

  AnalyticField(AnalyticScene scene, double tau);

  double occupancy(const Vec3 &point, double depth) const override;
  double offset(const Vec3 &a, const Vec3 &b) const override;

  const AnalyticScene &scene() const { return scene_; }
  double tau() const { return tau_; }

 private:
  AnalyticScene scene_;
  double tau_;
};

std::shared_ptr<const AnalyticField> oracle_field(const AnalyticScene &scene, double tau);

// ---------------------------------------------------------------------------
// MLP

enum class FinalActivation : std::uint8_t { Logistic = 0, Tanh = 1 };

/// Fully connected net: ReLU on hidden layers, `final_activation` on the last.
/// Layer l maps dims[l] -> dims[l+1] with a row-major dims[l+1] x dims[l]
/// matrix.
struct MlpWeights {
  std::vector<std::uint32_t> dims;
  std::vector<std::vector<float>> matrices;
  std::vector<std::vector<float>> biases;
  FinalActivation final_activation = FinalActivation::Logistic;

  std::size_t layer_count() const { return matrices.size(); }
  std::size_t input_size() const { return dims.empty() ? 0 : dims.front(); }
  std::size_t output_size() const { return dims.empty() ? 0 : dims.back(); }

  /// Throws ShapeError when the layers do not chain or weights are not finite.
  void validate() const;

  bool operator==(const MlpWeights &) const = default;
};

std::vector<double> mlp_forward(const MlpWeights &weights, std::span<const double> input);

std::vector<std::uint8_t> serialize_mlp(const MlpWeights &weights);
MlpWeights deserialize_mlp(std::span<const std::uint8_t> bytes);
MlpWeights load_mlp(const std::filesystem::path &path);
void save_mlp(const MlpWeights &weights, const std::filesystem::path &path);

// ---------------------------------------------------------------------------
// Multi-view pixel-aligned field

struct FeatureMap {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> values;  // (y * width + x) * channels + c

  const float *at(int x, int y) const { return values.data() + (static_cast<std::size_t>(y) * width + x) * channels; }
  float *at(int x, int y) { return values.data() + (static_cast<std::size_t>(y) * width + x) * channels; }
};

inline constexpr int kFeatureChannels = 7;

/// Hand-crafted per-pixel features: R, G, B, foreground flag, signed distance
/// to the silhouette boundary (positive inside, divided by the image
/// diagonal), and |d/dx|, |d/dy| of luminance.
FeatureMap extract_features(const ImageRgb &image, const Mask &mask);

/// Pixel-aligned field averaging per-view features: occupancy from an MLP on
/// [phi(X), depth], offsets from an MLP on phi of the segment midpoint.
class MultiViewField final : public OccupancyField {
 public:
  MultiViewField(std::vector<Camera> cameras, std::vector<FeatureMap> features, MlpWeights occupancy_net,
                 MlpWeights offset_net);

  /// Mean of bilinear feature samples over views that see `point` (in front
  /// of the camera and inside the image); zero vector when none does.
  std::vector<double> phi(const Vec3 &point, int *valid_views = nullptr) const;

  double occupancy(const Vec3 &point, double depth) const override;
  double offset(const Vec3 &a, const Vec3 &b) const override;

  std::size_t view_count() const { return cameras_.size(); }

 private:
  std::vector<Camera> cameras_;
  std::vector<FeatureMap> features_;
  MlpWeights occupancy_net_;
  MlpWeights offset_net_;
  int channels_;
};

/// Reference weights for the multi-view backend: occupancy from silhouette
/// consensus (the averaged foreground flag), and a zero offset net.
MlpWeights consensus_occupancy_mlp(int channels = kFeatureChannels);
MlpWeights zero_offset_mlp(int channels = kFeatureChannels);

}  // namespace fvv
