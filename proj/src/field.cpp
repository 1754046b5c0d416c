#include "fvv/field.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace fvv {

AnalyticField::AnalyticField(AnalyticScene scene, double tau) : scene_(std::move(scene)), tau_(tau) {
  scene_.validate();
  if (!(tau_ > 0.0)) throw ConfigError("occupancy sharpness tau must be positive");
}

double AnalyticField::occupancy(const Vec3 &point, double) const {
  if (!point.allFinite()) throw InputError("occupancy query at a non-finite point");
  return logistic(-scene_.sdf(point) / tau_);
}

double AnalyticField::offset(const Vec3 &a, const Vec3 &b) const {
  const auto inside = [&](double t) { return occupancy(a + t * (b - a), 0.0) >= 0.5; };
  const double s_a = occupancy(a, 0.0);
  if (s_a == 0.5) return -1.0;
  const bool inside_a = s_a >= 0.5;
  if (inside_a == inside(1.0)) throw NoCrossingError("segment does not straddle the surface");
  double lo = 0.0;
  double hi = 1.0;
  for (int i = 0; i < kBisectionIterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (inside(mid) == inside_a)
      lo = mid;
    else
      hi = mid;
  }
  return std::clamp(lo + hi - 1.0, -1.0, 1.0);
}

std::shared_ptr<const AnalyticField> oracle_field(const AnalyticScene &scene, double tau) {
  return std::make_shared<AnalyticField>(scene, tau);
}

// ---------------------------------------------------------------------------
// MLP

void MlpWeights::validate() const {
  if (dims.size() < 2) throw ShapeError("mlp needs at least one layer");
  if (matrices.size() != dims.size() - 1 || biases.size() != dims.size() - 1)
    throw ShapeError("mlp layer count does not match dims");
  for (std::size_t l = 0; l < matrices.size(); ++l) {
    if (dims[l] == 0 || dims[l + 1] == 0) throw ShapeError("mlp dims must be positive");
    if (matrices[l].size() != static_cast<std::size_t>(dims[l]) * dims[l + 1])
      throw ShapeError("mlp layer " + std::to_string(l) + " matrix does not chain with dims");
    if (biases[l].size() != dims[l + 1]) throw ShapeError("mlp layer " + std::to_string(l) + " bias has wrong size");
    const auto finite = [](float v) { return std::isfinite(v); };
    if (!std::all_of(matrices[l].begin(), matrices[l].end(), finite) ||
        !std::all_of(biases[l].begin(), biases[l].end(), finite))
      throw ShapeError("mlp weights must be finite");
  }
}

std::vector<double> mlp_forward(const MlpWeights &weights, std::span<const double> input) {
  if (input.size() != weights.input_size())
    throw ShapeError("mlp input has length " + std::to_string(input.size()) + ", expected " +
                     std::to_string(weights.input_size()));
  std::vector<double> current(input.begin(), input.end());
  std::vector<double> next;
  const std::size_t layers = weights.layer_count();
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = weights.dims[l];
    const std::size_t out = weights.dims[l + 1];
    const auto &m = weights.matrices[l];
    next.assign(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      double acc = weights.biases[l][r];
      for (std::size_t c = 0; c < in; ++c) acc += static_cast<double>(m[r * in + c]) * current[c];
      if (l + 1 < layers)
        acc = std::max(0.0, acc);
      else
        acc = weights.final_activation == FinalActivation::Logistic ? logistic(acc) : std::tanh(acc);
      next[r] = acc;
    }
    current.swap(next);
  }
  return current;
}

namespace {

constexpr char kMlpMagic[4] = {'M', 'L', 'P', 'W'};
constexpr std::uint32_t kMlpVersion = 1;

static_assert(std::endian::native == std::endian::little, "MLP weight I/O assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t> &out, const T &value) {
  const auto *p = reinterpret_cast<const std::uint8_t *>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char *what) {
    if (pos_ + sizeof(T) > bytes_.size()) throw ParseError(std::string("mlp: truncated file while reading ") + what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void floats(std::vector<float> &out, std::size_t count, const char *what) {
    if (count > (bytes_.size() - pos_) / sizeof(float))
      throw ParseError(std::string("mlp: truncated file while reading ") + what);
    out.resize(count);
    std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(float));
    pos_ += count * sizeof(float);
  }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_mlp(const MlpWeights &weights) {
  weights.validate();
  std::vector<std::uint8_t> out(std::begin(kMlpMagic), std::end(kMlpMagic));
  put(out, kMlpVersion);
  put(out, static_cast<std::uint8_t>(weights.final_activation));
  put(out, static_cast<std::uint32_t>(weights.layer_count()));
  for (auto d : weights.dims) put(out, d);
  for (std::size_t l = 0; l < weights.layer_count(); ++l) {
    for (float v : weights.matrices[l]) put(out, v);
    for (float v : weights.biases[l]) put(out, v);
  }
  return out;
}

MlpWeights deserialize_mlp(std::span<const std::uint8_t> bytes) {
  ByteReader reader(bytes);
  char magic[4];
  for (char &c : magic) c = static_cast<char>(reader.get<std::uint8_t>("magic"));
  if (!std::equal(std::begin(magic), std::end(magic), std::begin(kMlpMagic))) throw ParseError("mlp: bad magic");
  const auto version = reader.get<std::uint32_t>("version");
  if (version != kMlpVersion) throw ParseError("mlp: unsupported version " + std::to_string(version));
  const auto activation = reader.get<std::uint8_t>("final activation");
  if (activation > 1) throw ParseError("mlp: unknown final activation code " + std::to_string(activation));
  const auto layers = reader.get<std::uint32_t>("layer count");
  if (layers == 0) throw ParseError("mlp: layer count must be positive");

  MlpWeights w;
  w.final_activation = static_cast<FinalActivation>(activation);
  for (std::uint32_t i = 0; i <= layers; ++i) {
    w.dims.push_back(reader.get<std::uint32_t>("dims"));
    if (w.dims.back() == 0) throw ParseError("mlp: dims must be positive");
  }
  w.matrices.resize(layers);
  w.biases.resize(layers);
  for (std::uint32_t l = 0; l < layers; ++l) {
    reader.floats(w.matrices[l], static_cast<std::size_t>(w.dims[l]) * w.dims[l + 1], "matrix");
    reader.floats(w.biases[l], w.dims[l + 1], "bias");
  }
  if (!reader.at_end()) throw ParseError("mlp: trailing bytes after the last layer (dims mismatch)");
  try {
    w.validate();
  } catch (const ShapeError &e) {
    throw ParseError(std::string("mlp: ") + e.what());
  }
  return w;
}

MlpWeights load_mlp(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open weight file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_mlp(bytes);
}

void save_mlp(const MlpWeights &weights, const std::filesystem::path &path) {
  const auto bytes = serialize_mlp(weights);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write weight file " + path.string());
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

// ---------------------------------------------------------------------------
// Features

namespace {

// Two-pass chamfer distance (weights 1 and sqrt 2) to the nearest pixel whose
// foreground flag equals `to_foreground`.
ScalarMap chamfer_distance(const Mask &mask, bool to_foreground) {
  const int w = mask.width();
  const int h = mask.height();
  constexpr double far = 1e9;
  ScalarMap d(w, h, far);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((mask(x, y) != 0) == to_foreground) d(x, y) = 0.0;
  const double a = 1.0;
  const double b = std::sqrt(2.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = d(x, y);
      if (x > 0) v = std::min(v, d(x - 1, y) + a);
      if (y > 0) {
        v = std::min(v, d(x, y - 1) + a);
        if (x > 0) v = std::min(v, d(x - 1, y - 1) + b);
        if (x + 1 < w) v = std::min(v, d(x + 1, y - 1) + b);
      }
      d(x, y) = v;
    }
  for (int y = h - 1; y >= 0; --y)
    for (int x = w - 1; x >= 0; --x) {
      double v = d(x, y);
      if (x + 1 < w) v = std::min(v, d(x + 1, y) + a);
      if (y + 1 < h) {
        v = std::min(v, d(x, y + 1) + a);
        if (x + 1 < w) v = std::min(v, d(x + 1, y + 1) + b);
        if (x > 0) v = std::min(v, d(x - 1, y + 1) + b);
      }
      d(x, y) = v;
    }
  return d;
}

double luminance(const Color &c) { return 0.299 * c.x() + 0.587 * c.y() + 0.114 * c.z(); }

}  // namespace

FeatureMap extract_features(const ImageRgb &image, const Mask &mask) {
  if (!image.same_shape(mask)) throw ConfigError("feature extraction: image and mask dimensions differ");
  const int w = image.width();
  const int h = image.height();
  FeatureMap fm;
  fm.width = w;
  fm.height = h;
  fm.channels = kFeatureChannels;
  fm.values.assign(static_cast<std::size_t>(w) * h * kFeatureChannels, 0.0f);

  const ScalarMap inside = chamfer_distance(mask, false);   // distance to background
  const ScalarMap outside = chamfer_distance(mask, true);   // distance to foreground
  const double diagonal = std::hypot(static_cast<double>(w), static_cast<double>(h));

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float *f = fm.at(x, y);
      const Color &c = image(x, y);
      f[0] = c.x();
      f[1] = c.y();
      f[2] = c.z();
      const bool fg = mask(x, y) != 0;
      f[3] = fg ? 1.0f : 0.0f;
      f[4] = static_cast<float>((fg ? inside(x, y) : -outside(x, y)) / diagonal);
      const int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
      const int yu = std::max(0, y - 1), yd = std::min(h - 1, y + 1);
      const double gx = (luminance(image(xr, y)) - luminance(image(xl, y))) / std::max(1, xr - xl);
      const double gy = (luminance(image(x, yd)) - luminance(image(x, yu))) / std::max(1, yd - yu);
      f[5] = static_cast<float>(std::abs(gx));
      f[6] = static_cast<float>(std::abs(gy));
    }
  }
  return fm;
}

MultiViewField::MultiViewField(std::vector<Camera> cameras, std::vector<FeatureMap> features, MlpWeights occupancy_net,
                               MlpWeights offset_net)
    : cameras_(std::move(cameras)),
      features_(std::move(features)),
      occupancy_net_(std::move(occupancy_net)),
      offset_net_(std::move(offset_net)) {
  if (cameras_.empty()) throw ConfigError("multi-view field needs at least one view");
  if (cameras_.size() != features_.size()) throw ConfigError("multi-view field needs one feature map per camera");
  channels_ = features_.front().channels;
  for (std::size_t i = 0; i < cameras_.size(); ++i) {
    const auto &fm = features_[i];
    if (fm.channels != channels_) throw ConfigError("feature maps disagree on channel count");
    if (fm.width != cameras_[i].width || fm.height != cameras_[i].height)
      throw ConfigError("feature map " + std::to_string(i) + " does not match its camera resolution");
  }
  occupancy_net_.validate();
  offset_net_.validate();
  if (occupancy_net_.input_size() != static_cast<std::size_t>(channels_) + 1 || occupancy_net_.output_size() != 1)
    throw ShapeError("occupancy net must map channels+1 inputs to 1 output");
  if (offset_net_.input_size() != static_cast<std::size_t>(channels_) || offset_net_.output_size() != 1)
    throw ShapeError("offset net must map channels inputs to 1 output");
}

std::vector<double> MultiViewField::phi(const Vec3 &point, int *valid_views) const {
  std::vector<double> sum(static_cast<std::size_t>(channels_), 0.0);
  int count = 0;
  for (std::size_t i = 0; i < cameras_.size(); ++i) {
    Projection proj;
    if (!try_project(cameras_[i], point, proj) || !cameras_[i].contains(proj.pixel)) continue;
    const auto &fm = features_[i];
    const auto taps = bilinear_taps(fm.width, fm.height, proj.pixel);
    for (int corner = 0; corner < 4; ++corner) {
      const double w = taps.weight(corner);
      if (w == 0.0) continue;
      const float *f = fm.at(taps.x(corner), taps.y(corner));
      for (int c = 0; c < channels_; ++c) sum[c] += w * f[c];
    }
    ++count;
  }
  if (count > 1)
    for (auto &v : sum) v /= count;
  if (valid_views) *valid_views = count;
  return sum;
}

double MultiViewField::occupancy(const Vec3 &point, double depth) const {
  if (!point.allFinite()) throw InputError("occupancy query at a non-finite point");
  int views = 0;
  auto input = phi(point, &views);
  if (views == 0) return 0.0;
  input.push_back(depth);
  const double s = mlp_forward(occupancy_net_, input).front();
  return std::isfinite(s) ? std::clamp(s, 0.0, 1.0) : 0.0;
}

double MultiViewField::offset(const Vec3 &a, const Vec3 &b) const {
  const auto input = phi(0.5 * (a + b));
  const double o = mlp_forward(offset_net_, input).front();
  return std::isfinite(o) ? std::clamp(o, -1.0, 1.0) : 0.0;
}

MlpWeights consensus_occupancy_mlp(int channels) {
  // hidden = relu(fg - 0.99); s = logistic(1000 * hidden - 5)
  MlpWeights w;
  w.dims = {static_cast<std::uint32_t>(channels + 1), 1, 1};
  w.matrices = {std::vector<float>(static_cast<std::size_t>(channels + 1), 0.0f), {1000.0f}};
  w.matrices[0][3] = 1.0f;
  w.biases = {{-0.99f}, {-5.0f}};
  w.final_activation = FinalActivation::Logistic;
  return w;
}

MlpWeights zero_offset_mlp(int channels) {
  MlpWeights w;
  w.dims = {static_cast<std::uint32_t>(channels), 1};
  w.matrices = {std::vector<float>(static_cast<std::size_t>(channels), 0.0f)};
  w.biases = {{0.0f}};
  w.final_activation = FinalActivation::Tanh;
  return w;
}

}  // namespace fvv
