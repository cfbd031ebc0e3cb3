#pragma once

// Aggregation network: a small fully connected net with exact backprop and
// Adam. Templated on the scalar so the gradient check can run in double while
// training and inference run in float.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loctomo/error.hpp"
#include "loctomo/patch.hpp"
#include "loctomo/random.hpp"

namespace loctomo {

enum class Activation { relu, gelu };

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "gelu"; }

inline Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "gelu") return Activation::gelu;
  throw UsageError("unknown activation '" + std::string(name) + "'");
}

struct MlpArch {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden{512, 512, 256, 128};
  Activation activation = Activation::relu;
  std::size_t output_dim = 1;

  /// input, hidden..., output.
  std::vector<std::size_t> widths() const {
    std::vector<std::size_t> w{input_dim};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(output_dim);
    return w;
  }

  std::size_t param_count() const {
    const auto w = widths();
    std::size_t count = 0;
    for (std::size_t l = 1; l < w.size(); ++l) count += w[l] * w[l - 1] + w[l];
    return count;
  }

  void validate() const {
    if (input_dim == 0) throw UsageError("network input dimension must be positive");
    if (hidden.empty()) throw UsageError("network needs at least one hidden layer");
    for (std::size_t h : hidden) {
      if (h == 0) throw UsageError("hidden layer widths must be positive");
    }
    if (output_dim != 1) throw UsageError("network output dimension is fixed to 1");
  }

  bool operator==(const MlpArch&) const = default;
};

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
/// Batches are stored one sample per column.
template <typename T>
using ColMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct DenseLayer {
  RowMatrix<T> weights;  // out x in
  Vector<T> bias;        // out
};

template <typename T>
class MlpParams {
 public:
  MlpParams() = default;

  static MlpParams zeros(const MlpArch& arch) {
    arch.validate();
    MlpParams p;
    p.arch_ = arch;
    const auto w = arch.widths();
    for (std::size_t l = 1; l < w.size(); ++l) {
      DenseLayer<T> layer;
      layer.weights = RowMatrix<T>::Zero(static_cast<Eigen::Index>(w[l]), static_cast<Eigen::Index>(w[l - 1]));
      layer.bias = Vector<T>::Zero(static_cast<Eigen::Index>(w[l]));
      p.layers_.push_back(std::move(layer));
    }
    return p;
  }

  /// Kaiming-uniform weights (bound sqrt(6 / fan_in)) and biases uniform in
  /// +-1/sqrt(fan_in), deterministic in seed.
  static MlpParams kaiming_uniform(const MlpArch& arch, std::uint64_t seed) {
    MlpParams p = zeros(arch);
    for (std::size_t l = 0; l < p.layers_.size(); ++l) {
      Rng rng(derive_seed(seed, {0x6b61696dULL, l}));
      auto& layer = p.layers_[l];
      const double fan_in = static_cast<double>(layer.weights.cols());
      const double w_bound = std::sqrt(6.0 / fan_in);
      const double b_bound = 1.0 / std::sqrt(fan_in);
      for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
        layer.weights.data()[i] = static_cast<T>(rng.uniform(-w_bound, w_bound));
      }
      for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = static_cast<T>(rng.uniform(-b_bound, b_bound));
    }
    return p;
  }

  const MlpArch& arch() const { return arch_; }
  std::vector<DenseLayer<T>>& layers() { return layers_; }
  const std::vector<DenseLayer<T>>& layers() const { return layers_; }
  std::size_t param_count() const { return arch_.param_count(); }

  /// Calls f(span) for every parameter block in serialization order: per
  /// layer, the row-major weights, then the bias.
  template <typename F>
  void visit(F&& f) {
    for (auto& layer : layers_) {
      f(std::span<T>(layer.weights.data(), static_cast<std::size_t>(layer.weights.size())));
      f(std::span<T>(layer.bias.data(), static_cast<std::size_t>(layer.bias.size())));
    }
  }
  template <typename F>
  void visit(F&& f) const {
    for (const auto& layer : layers_) {
      f(std::span<const T>(layer.weights.data(), static_cast<std::size_t>(layer.weights.size())));
      f(std::span<const T>(layer.bias.data(), static_cast<std::size_t>(layer.bias.size())));
    }
  }

  template <typename U>
  MlpParams<U> cast() const {
    MlpParams<U> out = MlpParams<U>::zeros(arch_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      out.layers()[l].weights = layers_[l].weights.template cast<U>();
      out.layers()[l].bias = layers_[l].bias.template cast<U>();
    }
    return out;
  }

  bool all_finite() const {
    bool ok = true;
    visit([&](std::span<const T> block) {
      for (T x : block) ok = ok && std::isfinite(x);
    });
    return ok;
  }

 private:
  MlpArch arch_;
  std::vector<DenseLayer<T>> layers_;
};

namespace detail {

template <typename T>
inline T activate(T z, Activation a) {
  if (a == Activation::relu) return z > T(0) ? z : T(0);
  return T(0.5) * z * (T(1) + std::erf(z * T(std::numbers::sqrt2 / 2)));
}

template <typename T>
inline T activate_grad(T z, Activation a) {
  if (a == Activation::relu) return z > T(0) ? T(1) : T(0);
  const T cdf = T(0.5) * (T(1) + std::erf(z * T(std::numbers::sqrt2 / 2)));
  const T pdf = std::exp(T(-0.5) * z * z) * T(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  return cdf + z * pdf;
}

}  // namespace detail

/// Inference engine with a fixed summation order per sample.
///
/// Weights are copied into rows padded to a multiple of the SIMD width, and
/// samples always run in groups of kGroup (short groups are padded with
/// zeros), so every output depends only on its own input: results are
/// bitwise independent of batch composition and chunking.
template <typename T>
class InferenceNet {
 public:
  static constexpr std::size_t kLanes = 64 / sizeof(T);
  static constexpr std::size_t kGroup = 8;

  explicit InferenceNet(const MlpParams<T>& params) : activation_(params.arch().activation) {
    for (const auto& layer : params.layers()) {
      Packed p;
      p.out = static_cast<std::size_t>(layer.weights.rows());
      p.in = static_cast<std::size_t>(layer.weights.cols());
      p.stride = padded(p.in);
      p.weights.assign(p.out * p.stride, T(0));
      for (std::size_t j = 0; j < p.out; ++j) {
        for (std::size_t k = 0; k < p.in; ++k) p.weights[j * p.stride + k] = layer.weights(j, k);
      }
      p.bias.assign(layer.bias.data(), layer.bias.data() + p.out);
      max_width_ = std::max(max_width_, padded(p.out));
      layers_.push_back(std::move(p));
    }
    max_width_ = std::max(max_width_, input_stride());
  }

  std::size_t input_dim() const { return layers_.front().in; }
  /// Row length of the input buffer passed to forward(); entries past
  /// input_dim() must be zero.
  std::size_t input_stride() const { return layers_.front().stride; }

  static std::size_t padded(std::size_t n) { return (n + kLanes - 1) / kLanes * kLanes; }

  /// inputs: count rows of input_stride() values; out: count values.
  void forward(std::span<const T> inputs, std::size_t count, std::span<T> out) const {
    const std::size_t stride = input_stride();
    std::vector<T> a(kGroup * max_width_), b(kGroup * max_width_);
    for (std::size_t first = 0; first < count; first += kGroup) {
      const std::size_t n = std::min(kGroup, count - first);
      std::fill(a.begin(), a.end(), T(0));
      for (std::size_t s = 0; s < n; ++s) {
        std::copy_n(inputs.data() + (first + s) * stride, stride, a.data() + s * max_width_);
      }
      run_group(a, b);
      const std::vector<T>& result = layers_.size() % 2 == 1 ? b : a;
      for (std::size_t s = 0; s < n; ++s) out[first + s] = result[s * max_width_];
    }
  }

  T forward_one(std::span<const T> x) const {
    std::vector<T> row(input_stride(), T(0));
    std::copy(x.begin(), x.end(), row.begin());
    T y{};
    forward(row, 1, std::span<T>(&y, 1));
    return y;
  }

 private:
  struct Packed {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t stride = 0;
    std::vector<T> weights;
    std::vector<T> bias;
  };

  using Lanes [[gnu::vector_size(64)]] = T;

  // Ping-pongs activations between a and b; each sample occupies a row of
  // max_width_ entries.
  void run_group(std::vector<T>& a, std::vector<T>& b) const {
    std::vector<T>* src = &a;
    std::vector<T>* dst = &b;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Packed& p = layers_[l];
      const bool hidden = l + 1 < layers_.size();
      std::fill(dst->begin(), dst->end(), T(0));
      const T* x = src->data();
      T* y = dst->data();
      for (std::size_t j = 0; j < p.out; ++j) {
        Lanes acc[kGroup];
        for (auto& v : acc) v = Lanes{};
        const T* w = p.weights.data() + j * p.stride;
        for (std::size_t k = 0; k < p.stride; k += kLanes) {
          Lanes wv;
          __builtin_memcpy(&wv, w + k, sizeof(Lanes));
          for (std::size_t s = 0; s < kGroup; ++s) {
            Lanes xv;
            __builtin_memcpy(&xv, x + s * max_width_ + k, sizeof(Lanes));
            acc[s] += wv * xv;
          }
        }
        for (std::size_t s = 0; s < kGroup; ++s) {
          T sum = T(0);
          for (std::size_t lane = 0; lane < kLanes; ++lane) sum += acc[s][lane];
          sum += p.bias[j];
          y[s * max_width_ + j] = hidden ? detail::activate(sum, activation_) : sum;
        }
      }
      std::swap(src, dst);
    }
  }

  Activation activation_;
  std::vector<Packed> layers_;
  std::size_t max_width_ = 0;
};

/// f(p) for one feature vector. Throws DataError on a dimension mismatch.
template <typename T>
T mlp_forward(const MlpParams<T>& params, std::span<const T> x) {
  if (x.size() != params.arch().input_dim) {
    throw DataError("network expects " + std::to_string(params.arch().input_dim) + " inputs, got " +
                    std::to_string(x.size()));
  }
  return InferenceNet<T>(params).forward_one(x);
}

/// f(p) for a batch stored one sample per column.
template <typename T>
std::vector<T> mlp_forward_batch(const MlpParams<T>& params, const ColMatrix<T>& batch) {
  if (static_cast<std::size_t>(batch.rows()) != params.arch().input_dim) {
    throw DataError("network expects " + std::to_string(params.arch().input_dim) + " inputs, got " +
                    std::to_string(batch.rows()));
  }
  const InferenceNet<T> net(params);
  const std::size_t count = static_cast<std::size_t>(batch.cols());
  std::vector<T> rows(count * net.input_stride(), T(0));
  for (std::size_t s = 0; s < count; ++s) {
    std::copy_n(batch.col(static_cast<Eigen::Index>(s)).data(), batch.rows(), rows.data() + s * net.input_stride());
  }
  std::vector<T> out(count);
  net.forward(rows, count, out);
  return out;
}

template <typename T>
struct LossAndGradients {
  double loss = 0.0;
  MlpParams<T> gradients;
};

/// Mean squared error over the batch (one sample per column) and its exact
/// gradient with respect to every parameter. Throws UsageError for an empty
/// batch and DataError on shape mismatches.
template <typename T>
LossAndGradients<T> mlp_backward(const MlpParams<T>& params, const ColMatrix<T>& batch, std::span<const T> targets) {
  const Eigen::Index count = batch.cols();
  if (count == 0) throw UsageError("empty batch");
  if (static_cast<std::size_t>(count) != targets.size()) throw DataError("batch and target counts differ");
  if (static_cast<std::size_t>(batch.rows()) != params.arch().input_dim) {
    throw DataError("network expects " + std::to_string(params.arch().input_dim) + " inputs, got " +
                    std::to_string(batch.rows()));
  }
  const auto& layers = params.layers();
  const std::size_t depth = layers.size();
  const Activation act = params.arch().activation;

  // pre[l] = W_l a_{l-1} + b_l, post[l] = activation(pre[l]).
  std::vector<ColMatrix<T>> pre(depth), post(depth);
  const ColMatrix<T>* input = &batch;
  for (std::size_t l = 0; l < depth; ++l) {
    pre[l].noalias() = layers[l].weights * (*input);
    pre[l].colwise() += layers[l].bias;
    if (l + 1 < depth) {
      post[l] = pre[l].unaryExpr([act](T z) { return detail::activate(z, act); });
      input = &post[l];
    }
  }

  LossAndGradients<T> result{0.0, MlpParams<T>::zeros(params.arch())};
  ColMatrix<T> delta(1, count);
  double loss = 0.0;
  for (Eigen::Index s = 0; s < count; ++s) {
    const double err = static_cast<double>(pre[depth - 1](0, s)) - static_cast<double>(targets[s]);
    loss += err * err;
    delta(0, s) = static_cast<T>(2.0 * err / static_cast<double>(count));
  }
  result.loss = loss / static_cast<double>(count);

  auto& grads = result.gradients.layers();
  for (std::size_t l = depth; l-- > 0;) {
    const ColMatrix<T>& below = l == 0 ? batch : post[l - 1];
    grads[l].weights.noalias() = delta * below.transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l > 0) {
      ColMatrix<T> back = layers[l].weights.transpose() * delta;
      delta = back.cwiseProduct(pre[l - 1].unaryExpr([act](T z) { return detail::activate_grad(z, act); }));
    }
  }
  return result;
}

/// Convenience overload over feature vectors.
template <typename T>
LossAndGradients<T> mlp_backward(const MlpParams<T>& params, std::span<const FeatureVector> batch,
                                 std::span<const T> targets) {
  ColMatrix<T> x(static_cast<Eigen::Index>(params.arch().input_dim), static_cast<Eigen::Index>(batch.size()));
  for (std::size_t s = 0; s < batch.size(); ++s) {
    if (batch[s].values.size() != params.arch().input_dim) throw DataError("feature length mismatch");
    for (std::size_t k = 0; k < batch[s].values.size(); ++k) {
      x(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(s)) = static_cast<T>(batch[s].values[k]);
    }
  }
  return mlp_backward(params, x, targets);
}

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  MlpParams<T> first;
  MlpParams<T> second;

  static AdamState init(const MlpArch& arch, const AdamConfig& config) {
    return {config, 0, MlpParams<T>::zeros(arch), MlpParams<T>::zeros(arch)};
  }
};

/// One bias-corrected Adam update in place. `lr` overrides config.lr when
/// positive (learning-rate schedules).
template <typename T>
void adam_step(MlpParams<T>& params, const MlpParams<T>& grads, AdamState<T>& state, double lr = -1.0) {
  if (!(grads.arch() == params.arch()) || !(state.first.arch() == params.arch())) {
    throw DataError("adam: parameter, gradient and state shapes differ");
  }
  const AdamConfig& c = state.config;
  const double rate = lr > 0.0 ? lr : c.lr;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T correct1 = static_cast<T>(1.0 / (1.0 - std::pow(c.beta1, t)));
  const T correct2 = static_cast<T>(1.0 / (1.0 - std::pow(c.beta2, t)));
  const T step_size = static_cast<T>(rate), eps = static_cast<T>(c.eps);

  for (std::size_t l = 0; l < params.layers().size(); ++l) {
    auto update = [&](T* p, const T* g, T* m, T* v, Eigen::Index n) {
      for (Eigen::Index i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (T(1) - b1) * g[i];
        v[i] = b2 * v[i] + (T(1) - b2) * g[i] * g[i];
        const T m_hat = m[i] * correct1;
        const T v_hat = v[i] * correct2;
        p[i] -= step_size * m_hat / (std::sqrt(v_hat) + eps);
      }
    };
    auto& pl = params.layers()[l];
    const auto& gl = grads.layers()[l];
    auto& ml = state.first.layers()[l];
    auto& vl = state.second.layers()[l];
    update(pl.weights.data(), gl.weights.data(), ml.weights.data(), vl.weights.data(), pl.weights.size());
    update(pl.bias.data(), gl.bias.data(), ml.bias.data(), vl.bias.data(), pl.bias.size());
  }
}

}  // namespace loctomo
