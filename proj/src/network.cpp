#include "homing/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "homing/dataset.hpp"
#include "homing/error.hpp"

namespace homing {

void NetworkShape::validate() const {
  if (conv1_channels < 1 || conv2_channels < 1) throw ShapeError("network: layers need at least one channel");
  if (kernel < 1 || stride < 1) throw ShapeError("network: kernel and stride must be >= 1");
  if (input_rows < kernel || input_cols < kernel) throw ShapeError("network: input smaller than the kernel");
  if (conv1_rows() < kernel || conv1_cols() < kernel) {
    throw ShapeError("network: input too small for the second convolution");
  }
}

std::size_t param_count(const NetworkShape& shape) {
  shape.validate();
  return shape.param_count();
}

template <class Real>
NetworkParams<Real>::NetworkParams(NetworkShape shape) : shape_(shape) {
  shape_.validate();
  values_.assign(shape_.param_count(), Real(0));
}

namespace {

// pre = bias + sum of kernel taps (valid, strided); post = tanh(pre).
template <class In, class Real>
void conv_forward(const In* input, int in_c, int in_h, int in_w, const Real* w, const Real* b, int out_c, int k,
                  int s, FeatureMap<Real>& pre, FeatureMap<Real>& post) {
  const int out_h = NetworkShape::conv_out(in_h, k, s);
  const int out_w = NetworkShape::conv_out(in_w, k, s);
  if (out_h < 1 || out_w < 1) throw ShapeError("conv2d: input smaller than the kernel");
  pre = FeatureMap<Real>(out_c, out_h, out_w);
  post = FeatureMap<Real>(out_c, out_h, out_w);
  for (int oc = 0; oc < out_c; ++oc) {
    Real* o = pre.data.data() + std::size_t(oc) * out_h * out_w;
    std::fill(o, o + std::size_t(out_h) * out_w, b[oc]);
    for (int ic = 0; ic < in_c; ++ic) {
      for (int oy = 0; oy < out_h; ++oy) {
        Real* orow = o + std::size_t(oy) * out_w;
        for (int ky = 0; ky < k; ++ky) {
          const In* irow = input + (std::size_t(ic) * in_h + std::size_t(oy) * s + ky) * in_w;
          for (int kx = 0; kx < k; ++kx) {
            const Real wv = w[((std::size_t(oc) * in_c + ic) * k + ky) * k + kx];
            const In* ip = irow + kx;
            for (int ox = 0; ox < out_w; ++ox) orow[ox] += wv * static_cast<Real>(ip[std::size_t(ox) * s]);
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < pre.data.size(); ++i) post.data[i] = std::tanh(pre.data[i]);
}

// Accumulates dW, db and (optionally) d input from dz = dLoss/dpre.
template <class In, class Real>
void conv_backward(const In* input, int in_c, int in_h, int in_w, const Real* w, const FeatureMap<Real>& dz, int k,
                   int s, Real* dw, Real* db, Real* din) {
  const int out_c = dz.channels, out_h = dz.rows, out_w = dz.cols;
  for (int oc = 0; oc < out_c; ++oc) {
    const Real* g = dz.data.data() + std::size_t(oc) * out_h * out_w;
    Real bsum = 0;
    for (std::size_t i = 0; i < std::size_t(out_h) * out_w; ++i) bsum += g[i];
    db[oc] += bsum;
    for (int ic = 0; ic < in_c; ++ic) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const std::size_t widx = ((std::size_t(oc) * in_c + ic) * k + ky) * k + kx;
          Real acc = 0;
          for (int oy = 0; oy < out_h; ++oy) {
            const In* ip = input + (std::size_t(ic) * in_h + std::size_t(oy) * s + ky) * in_w + kx;
            const Real* grow = g + std::size_t(oy) * out_w;
            for (int ox = 0; ox < out_w; ++ox) acc += grow[ox] * static_cast<Real>(ip[std::size_t(ox) * s]);
          }
          dw[widx] += acc;
          if (din) {
            const Real wv = w[widx];
            for (int oy = 0; oy < out_h; ++oy) {
              Real* dp = din + (std::size_t(ic) * in_h + std::size_t(oy) * s + ky) * in_w + kx;
              const Real* grow = g + std::size_t(oy) * out_w;
              for (int ox = 0; ox < out_w; ++ox) dp[std::size_t(ox) * s] += wv * grow[ox];
            }
          }
        }
      }
    }
  }
}

template <class Real>
void check_input(const NetworkShape& shape, int rows, int cols, std::size_t n) {
  if (rows != shape.input_rows || cols != shape.input_cols || n != std::size_t(rows) * cols) {
    throw ShapeError("network: input is " + std::to_string(rows) + "x" + std::to_string(cols) +
                     ", parameters expect " + std::to_string(shape.input_rows) + "x" +
                     std::to_string(shape.input_cols));
  }
}

}  // namespace

template <class Real>
FeatureMap<Real> conv2d(const FeatureMap<Real>& input, std::span<const Real> kernels, std::span<const Real> biases,
                        int out_channels, int kernel, int stride) {
  if (kernels.size() != std::size_t(out_channels) * input.channels * kernel * kernel ||
      biases.size() != std::size_t(out_channels)) {
    throw ShapeError("conv2d: kernel or bias count does not match the channel counts");
  }
  if (input.rows < kernel || input.cols < kernel) throw ShapeError("conv2d: input smaller than the kernel");
  FeatureMap<Real> pre, post;
  conv_forward(input.data.data(), input.channels, input.rows, input.cols, kernels.data(), biases.data(),
               out_channels, kernel, stride, pre, post);
  return post;
}

template <class Real>
void init_uniform(NetworkParams<Real>& params, std::uint64_t seed) {
  const NetworkShape& s = params.shape();
  std::mt19937_64 rng(seed);
  auto fill = [&](std::span<Real> v, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& x : v) x = static_cast<Real>(dist(rng));
  };
  fill(params.conv1_weights(), double(s.kernel * s.kernel));
  fill(params.conv1_biases(), double(s.kernel * s.kernel));
  fill(params.conv2_weights(), double(s.conv1_channels * s.kernel * s.kernel));
  fill(params.conv2_biases(), double(s.conv1_channels * s.kernel * s.kernel));
  fill(params.fc_weights(), double(s.fc_inputs()));
  fill(params.fc_biases(), double(s.fc_inputs()));
}

template <class Real>
std::array<Real, 2> head_forward(const NetworkParams<Real>& params, std::span<const Real> conv2_post) {
  const std::size_t n = params.shape().fc_inputs();
  if (conv2_post.size() != n) throw ShapeError("head_forward: feature size mismatch");
  const auto w = params.fc_weights();
  const auto b = params.fc_biases();
  std::array<Real, 2> out{};
  for (int k = 0; k < 2; ++k) {
    Real acc = b[k];
    const Real* row = w.data() + std::size_t(k) * n;
    for (std::size_t i = 0; i < n; ++i) acc += row[i] * conv2_post[i];
    out[k] = acc;
  }
  return out;
}

template <class Real>
HomeVector forward(const NetworkParams<Real>& params, std::span<const float> pixels, int rows, int cols,
                   ActivationCache<Real>& cache) {
  const NetworkShape& s = params.shape();
  check_input<Real>(s, rows, cols, pixels.size());
  cache.input.resize(pixels.size());
  std::transform(pixels.begin(), pixels.end(), cache.input.begin(), [](float v) { return static_cast<Real>(v); });
  conv_forward(cache.input.data(), 1, rows, cols, params.conv1_weights().data(), params.conv1_biases().data(),
               s.conv1_channels, s.kernel, s.stride, cache.conv1_pre, cache.conv1_post);
  conv_forward(cache.conv1_post.data.data(), s.conv1_channels, cache.conv1_post.rows, cache.conv1_post.cols,
               params.conv2_weights().data(), params.conv2_biases().data(), s.conv2_channels, s.kernel, s.stride,
               cache.conv2_pre, cache.conv2_post);
  if (cache.conv1_post.rows != s.conv1_rows() || cache.conv1_post.cols != s.conv1_cols() ||
      cache.conv2_post.rows != s.conv2_rows() || cache.conv2_post.cols != s.conv2_cols()) {
    throw ShapeError("network: activation shape chain broken");
  }
  cache.out_pre = head_forward(params, std::span<const Real>(cache.conv2_post.data));
  for (int k = 0; k < 2; ++k) cache.out[k] = std::tanh(cache.out_pre[k]);
  return {static_cast<double>(cache.out[0]), static_cast<double>(cache.out[1])};
}

template <class Real>
HomeVector forward(const NetworkParams<Real>& params, const PanoramaImage& view, ActivationCache<Real>& cache) {
  return forward(params, view.image.pixels(), view.rows(), view.cols(), cache);
}

template <class Real>
HomeVector predict(const NetworkParams<Real>& params, const PanoramaImage& view) {
  ActivationCache<Real> cache;
  return forward(params, view, cache);
}

double mse_loss(HomeVector pred, HomeVector label) {
  const double dx = pred.x - label.x;
  const double dy = pred.y - label.y;
  return 0.5 * (dx * dx + dy * dy);
}

template <class Real>
void backward(const NetworkParams<Real>& params, const ActivationCache<Real>& cache, HomeVector label,
              NetworkParams<Real>& grads, Real scale) {
  const NetworkShape& s = params.shape();
  if (!(grads.shape() == s)) throw ShapeError("backward: gradient buffer shape mismatch");
  if (cache.conv2_post.data.size() != s.fc_inputs() || cache.input.size() != std::size_t(s.input_rows) * s.input_cols) {
    throw ShapeError("backward: cache does not come from a matching forward pass");
  }
  // loss = ((o0 - y0)^2 + (o1 - y1)^2) / 2  ->  dloss/do = o - y
  const std::array<Real, 2> target{static_cast<Real>(label.x), static_cast<Real>(label.y)};
  std::array<Real, 2> dz{};
  for (int k = 0; k < 2; ++k) {
    dz[k] = scale * (cache.out[k] - target[k]) * (Real(1) - cache.out[k] * cache.out[k]);
  }

  const std::size_t n = s.fc_inputs();
  auto wf = params.fc_weights();
  auto gwf = grads.fc_weights();
  auto gbf = grads.fc_biases();
  FeatureMap<Real> dz2(s.conv2_channels, s.conv2_rows(), s.conv2_cols());
  for (int k = 0; k < 2; ++k) {
    gbf[k] += dz[k];
    Real* grow = gwf.data() + std::size_t(k) * n;
    const Real* wrow = wf.data() + std::size_t(k) * n;
    for (std::size_t i = 0; i < n; ++i) {
      grow[i] += dz[k] * cache.conv2_post.data[i];
      dz2.data[i] += dz[k] * wrow[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Real a = cache.conv2_post.data[i];
    dz2.data[i] *= Real(1) - a * a;
  }

  FeatureMap<Real> dz1(s.conv1_channels, s.conv1_rows(), s.conv1_cols());
  conv_backward(cache.conv1_post.data.data(), s.conv1_channels, s.conv1_rows(), s.conv1_cols(),
                params.conv2_weights().data(), dz2, s.kernel, s.stride, grads.conv2_weights().data(),
                grads.conv2_biases().data(), dz1.data.data());
  for (std::size_t i = 0; i < dz1.data.size(); ++i) {
    const Real a = cache.conv1_post.data[i];
    dz1.data[i] *= Real(1) - a * a;
  }
  conv_backward(cache.input.data(), 1, s.input_rows, s.input_cols, params.conv1_weights().data(), dz1, s.kernel,
                s.stride, grads.conv1_weights().data(), grads.conv1_biases().data(), static_cast<Real*>(nullptr));
}

template <class Real>
NetworkParams<Real> backward(const NetworkParams<Real>& params, const ActivationCache<Real>& cache, HomeVector label) {
  NetworkParams<Real> grads(params.shape());
  backward(params, cache, label, grads, Real(1));
  return grads;
}

template <class Real>
FeatureMap<Real> output_gradients_wrt_conv2(const NetworkParams<Real>& params, const PanoramaImage& view,
                                            int output_index) {
  if (output_index != 0 && output_index != 1) throw InvalidArgument("output index must be 0 (x) or 1 (y)");
  ActivationCache<Real> cache;
  forward(params, view, cache);
  const NetworkShape& s = params.shape();
  FeatureMap<Real> g(s.conv2_channels, s.conv2_rows(), s.conv2_cols());
  const Real o = cache.out[output_index];
  const Real dtanh = Real(1) - o * o;
  const Real* w = params.fc_weights().data() + std::size_t(output_index) * s.fc_inputs();
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = dtanh * w[i];
  return g;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("train: learning rate must be finite and >= 0");
  }
  if (batch_size < 1) throw InvalidArgument("train: batch size must be >= 1");
  if (epochs < 1) throw InvalidArgument("train: epochs must be >= 1");
  if (log_every < 1) throw InvalidArgument("train: log_every must be >= 1");
}

template <class Real>
Optimizer<Real>::Optimizer(const TrainConfig& config, std::size_t param_count) : config_(config) {
  if (config_.optimizer != OptimizerKind::kSgd) m_.assign(param_count, Real(0));
  if (config_.optimizer == OptimizerKind::kAdam) v_.assign(param_count, Real(0));
}

template <class Real>
void Optimizer<Real>::step(std::span<Real> params, std::span<const Real> grads) {
  const Real lr = static_cast<Real>(config_.learning_rate);
  ++t_;
  switch (config_.optimizer) {
    case OptimizerKind::kSgd:
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grads[i];
      break;
    case OptimizerKind::kMomentum: {
      const Real mu = static_cast<Real>(config_.momentum);
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = mu * m_[i] + grads[i];
        params[i] -= lr * m_[i];
      }
      break;
    }
    case OptimizerKind::kAdam: {
      const double b1 = config_.adam_beta1, b2 = config_.adam_beta2;
      const Real c1 = static_cast<Real>(1.0 - std::pow(b1, double(t_)));
      const Real c2 = static_cast<Real>(1.0 - std::pow(b2, double(t_)));
      const Real eps = static_cast<Real>(config_.adam_epsilon);
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = static_cast<Real>(b1) * m_[i] + static_cast<Real>(1.0 - b1) * grads[i];
        v_[i] = static_cast<Real>(b2) * v_[i] + static_cast<Real>(1.0 - b2) * grads[i] * grads[i];
        params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps);
      }
      break;
    }
  }
}

template <class Real>
TrainResult train_epoch(NetworkParams<Real>& params, const Dataset& dataset, const TrainConfig& config,
                        Optimizer<Real>& optimizer) {
  config.validate();
  if (dataset.empty()) throw InvalidArgument("train_epoch: dataset is empty");
  const NetworkShape& s = params.shape();
  if (dataset.rows() != s.input_rows || dataset.cols() != s.input_cols) {
    throw ShapeError("train_epoch: dataset views do not match the network input resolution");
  }
  TrainResult result;
  std::vector<float> view(std::size_t(dataset.rows()) * dataset.cols());
  ActivationCache<Real> cache;
  NetworkParams<Real> grads(s);
  int in_batch = 0;
  double window = 0.0;
  int window_count = 0;
  const std::size_t n = dataset.size();
  for (std::size_t i = 0; i < n; ++i) {
    dataset.fill_view(i, view);
    const HomeVector label = dataset.entry(i).label;
    const HomeVector pred = forward(params, std::span<const float>(view), dataset.rows(), dataset.cols(), cache);
    const double loss = mse_loss(pred, label);
    if (!std::isfinite(loss)) {
      throw NumericError("train_epoch: non-finite loss at step " + std::to_string(i), static_cast<long>(i));
    }
    backward(params, cache, label, grads, Real(1));
    window += loss;
    ++window_count;
    if (++in_batch == config.batch_size || i + 1 == n) {
      if (in_batch > 1) {
        const Real inv = Real(1) / static_cast<Real>(in_batch);
        for (auto& g : grads.values()) g *= inv;
      }
      optimizer.step(params.values(), grads.values());
      std::fill(grads.values().begin(), grads.values().end(), Real(0));
      in_batch = 0;
    }
    if (window_count == config.log_every || i + 1 == n) {
      result.trace.push_back({static_cast<long>(i), window / window_count});
      window = 0.0;
      window_count = 0;
    }
  }
  result.steps = static_cast<long>(n);
  return result;
}

template <class Real>
NetworkParams<Real> train_network(const Dataset& dataset, const TrainConfig& config, TrainResult* result) {
  config.validate();
  NetworkParams<Real> params(NetworkShape::for_input(dataset.rows(), dataset.cols()));
  init_uniform(params, config.init_seed);
  Optimizer<Real> optimizer(config, params.size());
  TrainResult total;
  for (int e = 0; e < config.epochs; ++e) {
    TrainResult r = train_epoch(params, dataset, config, optimizer);
    for (auto p : r.trace) {
      p.step += total.steps;
      total.trace.push_back(p);
    }
    total.steps += r.steps;
  }
  if (result) *result = std::move(total);
  return params;
}

namespace {

constexpr char kMagic[8] = {'H', 'O', 'M', 'E', 'N', 'E', 'T', '\0'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(std::string data, std::string name) : data_(std::move(data)), name_(std::move(name)) {}
  std::uint64_t get(int bytes) {
    if (pos_ + bytes > data_.size()) throw FormatError(name_ + ": truncated model file");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += bytes;
    return v;
  }
  std::string_view take(std::size_t n) {
    if (pos_ + n > data_.size()) throw FormatError(name_ + ": truncated model file");
    auto v = std::string_view(data_).substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::string name_;
  std::size_t pos_ = 0;
};

}  // namespace

template <class Real>
void save_params(const NetworkParams<Real>& params, const std::filesystem::path& path) {
  const NetworkShape& s = params.shape();
  std::string out(kMagic, kMagic + 8);
  put_u32(out, kModelFormatVersion);
  put_u32(out, sizeof(Real));
  for (int v : {s.input_rows, s.input_cols, s.conv1_channels, s.conv2_channels, s.kernel, s.stride}) {
    put_u32(out, static_cast<std::uint32_t>(v));
  }
  put_u64(out, params.size());
  for (Real v : params.values()) {
    if constexpr (sizeof(Real) == 8) {
      put_u64(out, std::bit_cast<std::uint64_t>(static_cast<double>(v)));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("failed writing " + path.string());
}

template <class Real>
NetworkParams<Real> load_params(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open model file " + path.string());
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader in(std::move(data), path.string());
  const auto magic = in.take(8);
  if (std::memcmp(magic.data(), kMagic, 8) != 0) throw FormatError(path.string() + ": not a model file (bad magic)");
  const auto version = static_cast<std::uint32_t>(in.get(4));
  if (version != kModelFormatVersion) {
    throw VersionError(path.string() + ": unsupported model format version " + std::to_string(version));
  }
  const auto scalar = static_cast<std::uint32_t>(in.get(4));
  if (scalar != 4 && scalar != 8) throw FormatError(path.string() + ": unsupported scalar width");
  NetworkShape s;
  s.input_rows = static_cast<int>(in.get(4));
  s.input_cols = static_cast<int>(in.get(4));
  s.conv1_channels = static_cast<int>(in.get(4));
  s.conv2_channels = static_cast<int>(in.get(4));
  s.kernel = static_cast<int>(in.get(4));
  s.stride = static_cast<int>(in.get(4));
  try {
    s.validate();
  } catch (const ShapeError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const std::uint64_t count = in.get(8);
  if (count != s.param_count()) throw FormatError(path.string() + ": parameter count does not match layer dims");
  NetworkParams<Real> params(s);
  for (auto& v : params.values()) {
    if (scalar == 8) {
      v = static_cast<Real>(std::bit_cast<double>(in.get(8)));
    } else {
      v = static_cast<Real>(std::bit_cast<float>(static_cast<std::uint32_t>(in.get(4))));
    }
  }
  if (!in.at_end()) throw FormatError(path.string() + ": trailing bytes after parameters");
  return params;
}

void write_loss_csv(const TrainResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "step,loss\n";
  char buf[64];
  for (const auto& p : result.trace) {
    std::snprintf(buf, sizeof buf, "%ld,%.12g\n", p.step, p.loss);
    out << buf;
  }
}

#define HOMING_INSTANTIATE(Real)                                                                                  \
  template class NetworkParams<Real>;                                                                             \
  template class Optimizer<Real>;                                                                                 \
  template FeatureMap<Real> conv2d(const FeatureMap<Real>&, std::span<const Real>, std::span<const Real>, int, int, \
                                   int);                                                                          \
  template void init_uniform(NetworkParams<Real>&, std::uint64_t);                                                \
  template HomeVector forward(const NetworkParams<Real>&, std::span<const float>, int, int, ActivationCache<Real>&); \
  template HomeVector forward(const NetworkParams<Real>&, const PanoramaImage&, ActivationCache<Real>&);          \
  template HomeVector predict(const NetworkParams<Real>&, const PanoramaImage&);                                  \
  template std::array<Real, 2> head_forward(const NetworkParams<Real>&, std::span<const Real>);                   \
  template void backward(const NetworkParams<Real>&, const ActivationCache<Real>&, HomeVector,                    \
                         NetworkParams<Real>&, Real);                                                             \
  template NetworkParams<Real> backward(const NetworkParams<Real>&, const ActivationCache<Real>&, HomeVector);    \
  template FeatureMap<Real> output_gradients_wrt_conv2(const NetworkParams<Real>&, const PanoramaImage&, int);    \
  template TrainResult train_epoch(NetworkParams<Real>&, const Dataset&, const TrainConfig&, Optimizer<Real>&);   \
  template NetworkParams<Real> train_network(const Dataset&, const TrainConfig&, TrainResult*);                   \
  template void save_params(const NetworkParams<Real>&, const std::filesystem::path&);                            \
  template NetworkParams<Real> load_params(const std::filesystem::path&);

HOMING_INSTANTIATE(double)
HOMING_INSTANTIATE(float)

}  // namespace homing
