#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "homing/error.hpp"
#include "homing/geometry.hpp"
#include "homing/world.hpp"

namespace homing {

class Dataset;

/// Layer dimensions of the compact home-vector CNN:
/// conv(5x5, stride 4, tanh) -> conv(5x5, stride 4, tanh) -> fc(2, tanh), valid padding.
struct NetworkShape {
  int input_rows = 201;
  int input_cols = 1800;
  int conv1_channels = 2;
  int conv2_channels = 4;
  int kernel = 5;
  int stride = 4;

  static NetworkShape for_input(int rows, int cols) {
    NetworkShape s;
    s.input_rows = rows;
    s.input_cols = cols;
    return s;
  }

  static int conv_out(int in, int kernel, int stride) { return in < kernel ? 0 : (in - kernel) / stride + 1; }
  int conv1_rows() const { return conv_out(input_rows, kernel, stride); }
  int conv1_cols() const { return conv_out(input_cols, kernel, stride); }
  int conv2_rows() const { return conv_out(conv1_rows(), kernel, stride); }
  int conv2_cols() const { return conv_out(conv1_cols(), kernel, stride); }

  std::size_t conv1_weight_count() const { return std::size_t(conv1_channels) * kernel * kernel; }
  std::size_t conv2_weight_count() const { return std::size_t(conv2_channels) * conv1_channels * kernel * kernel; }
  std::size_t fc_inputs() const { return std::size_t(conv2_channels) * conv2_rows() * conv2_cols(); }
  std::size_t fc_weight_count() const { return 2 * fc_inputs(); }
  std::size_t param_count() const {
    return conv1_weight_count() + conv1_channels + conv2_weight_count() + conv2_channels + fc_weight_count() + 2;
  }

  /// Throws ShapeError for zero-channel layers or inputs too small for two convolutions.
  void validate() const;

  friend bool operator==(const NetworkShape&, const NetworkShape&) = default;
};

/// Dense C x H x W activation map.
template <class Real>
struct FeatureMap {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<Real> data;

  FeatureMap() = default;
  FeatureMap(int c, int r, int w) : channels(c), rows(r), cols(w), data(std::size_t(c) * r * w, Real(0)) {}

  Real& at(int c, int r, int w) { return data[(std::size_t(c) * rows + r) * cols + w]; }
  Real at(int c, int r, int w) const { return data[(std::size_t(c) * rows + r) * cols + w]; }
};

/// All weights and biases in one contiguous buffer:
/// conv1 W (C1 x 1 x K x K), conv1 b, conv2 W (C2 x C1 x K x K), conv2 b, fc W (2 x F), fc b.
template <class Real>
class NetworkParams {
 public:
  NetworkParams() = default;
  explicit NetworkParams(NetworkShape shape);

  const NetworkShape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::span<Real> values() { return values_; }
  std::span<const Real> values() const { return values_; }

  std::span<Real> conv1_weights() { return slice(0, shape_.conv1_weight_count()); }
  std::span<Real> conv1_biases() { return slice(off_b1(), shape_.conv1_channels); }
  std::span<Real> conv2_weights() { return slice(off_w2(), shape_.conv2_weight_count()); }
  std::span<Real> conv2_biases() { return slice(off_b2(), shape_.conv2_channels); }
  std::span<Real> fc_weights() { return slice(off_wf(), shape_.fc_weight_count()); }
  std::span<Real> fc_biases() { return slice(off_bf(), 2); }
  std::span<const Real> conv1_weights() const { return cslice(0, shape_.conv1_weight_count()); }
  std::span<const Real> conv1_biases() const { return cslice(off_b1(), shape_.conv1_channels); }
  std::span<const Real> conv2_weights() const { return cslice(off_w2(), shape_.conv2_weight_count()); }
  std::span<const Real> conv2_biases() const { return cslice(off_b2(), shape_.conv2_channels); }
  std::span<const Real> fc_weights() const { return cslice(off_wf(), shape_.fc_weight_count()); }
  std::span<const Real> fc_biases() const { return cslice(off_bf(), 2); }

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

 private:
  std::size_t off_b1() const { return shape_.conv1_weight_count(); }
  std::size_t off_w2() const { return off_b1() + shape_.conv1_channels; }
  std::size_t off_b2() const { return off_w2() + shape_.conv2_weight_count(); }
  std::size_t off_wf() const { return off_b2() + shape_.conv2_channels; }
  std::size_t off_bf() const { return off_wf() + shape_.fc_weight_count(); }
  std::span<Real> slice(std::size_t o, std::size_t n) { return std::span<Real>(values_).subspan(o, n); }
  std::span<const Real> cslice(std::size_t o, std::size_t n) const {
    return std::span<const Real>(values_).subspan(o, n);
  }

  NetworkShape shape_;
  std::vector<Real> values_;
};

using Params = NetworkParams<double>;

/// Activations kept by forward() for backward().
template <class Real>
struct ActivationCache {
  std::vector<Real> input;
  FeatureMap<Real> conv1_pre, conv1_post;
  FeatureMap<Real> conv2_pre, conv2_post;
  std::array<Real, 2> out_pre{};
  std::array<Real, 2> out{};
};

/// Valid 2-D convolution with tanh. Input C_in x H x W, kernels C_out x C_in x K x K.
template <class Real>
FeatureMap<Real> conv2d(const FeatureMap<Real>& input, std::span<const Real> kernels, std::span<const Real> biases,
                        int out_channels, int kernel, int stride);

std::size_t param_count(const NetworkShape& shape);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer.
template <class Real>
void init_uniform(NetworkParams<Real>& params, std::uint64_t seed);

/// Full forward pass; the view must match the configured input resolution.
template <class Real>
HomeVector forward(const NetworkParams<Real>& params, std::span<const float> pixels, int rows, int cols,
                   ActivationCache<Real>& cache);
template <class Real>
HomeVector forward(const NetworkParams<Real>& params, const PanoramaImage& view, ActivationCache<Real>& cache);
template <class Real>
HomeVector predict(const NetworkParams<Real>& params, const PanoramaImage& view);

/// Output layer applied to given post-activation conv2 values.
template <class Real>
std::array<Real, 2> head_forward(const NetworkParams<Real>& params, std::span<const Real> conv2_post);

double mse_loss(HomeVector pred, HomeVector label);

/// Exact gradient of mse_loss w.r.t. every parameter, accumulated into `grads` (scaled by `scale`).
template <class Real>
void backward(const NetworkParams<Real>& params, const ActivationCache<Real>& cache, HomeVector label,
              NetworkParams<Real>& grads, Real scale = Real(1));
template <class Real>
NetworkParams<Real> backward(const NetworkParams<Real>& params, const ActivationCache<Real>& cache, HomeVector label);

/// d output[index] / d conv2 post-activation, for index 0 (x) or 1 (y).
template <class Real>
FeatureMap<Real> output_gradients_wrt_conv2(const NetworkParams<Real>& params, const PanoramaImage& view,
                                            int output_index);

enum class OptimizerKind { kSgd, kMomentum, kAdam };
enum class Precision { kDouble, kSingle };

struct TrainConfig {
  double learning_rate = 9e-4;
  int batch_size = 1;
  int epochs = 1;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  double momentum = 0.9;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t init_seed = 1;
  Precision precision = Precision::kDouble;
  int log_every = 100;

  void validate() const;
};

struct LossPoint {
  long step = 0;     ///< last step of the window
  double loss = 0;   ///< mean loss over the window
};

struct TrainResult {
  std::vector<LossPoint> trace;
  long steps = 0;
};

/// Parameter update rule with its state.
template <class Real>
class Optimizer {
 public:
  Optimizer(const TrainConfig& config, std::size_t param_count);
  void step(std::span<Real> params, std::span<const Real> grads);

 private:
  TrainConfig config_;
  std::vector<Real> m_, v_;
  long t_ = 0;
};

/// One pass over the dataset in its stored (shuffled) order.
template <class Real>
TrainResult train_epoch(NetworkParams<Real>& params, const Dataset& dataset, const TrainConfig& config,
                        Optimizer<Real>& optimizer);

/// Fresh initialization followed by config.epochs passes.
template <class Real>
NetworkParams<Real> train_network(const Dataset& dataset, const TrainConfig& config, TrainResult* result = nullptr);

/// Thrown when a model file has an unknown format version.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Little-endian model file: "HOMENET\0", u32 version, u32 scalar bytes, six u32
/// layer dims (input rows, input cols, conv1 channels, conv2 channels, kernel, stride),
/// u64 parameter count, then the parameter buffer in layout order.
template <class Real>
void save_params(const NetworkParams<Real>& params, const std::filesystem::path& path);
/// Reads either scalar width and converts to Real.
template <class Real>
NetworkParams<Real> load_params(const std::filesystem::path& path);

void write_loss_csv(const TrainResult& result, const std::filesystem::path& path);

}  // namespace homing
