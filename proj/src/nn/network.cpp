#include "eds/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "eds/common.hpp"

namespace eds::nn {

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw ConfigError("tensor: value count does not match shape");
  }
}

Tensor::Tensor(std::vector<double> values)
    : shape_{1, values.size()}, values_(std::move(values)) {}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv1D: return "conv1d";
    case LayerKind::kMaxPool1D: return "maxpool1d";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "unknown";
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  return {LayerKind::kDense, 1, 1, in, out, Padding::kSame};
}

LayerSpec LayerSpec::conv1d(std::size_t in_channels, std::size_t out_channels,
                            std::size_t kernel, std::size_t stride,
                            Padding padding) {
  return {LayerKind::kConv1D, kernel, stride, in_channels, out_channels, padding};
}

LayerSpec LayerSpec::maxpool1d(std::size_t kernel, std::size_t stride,
                               Padding padding) {
  return {LayerKind::kMaxPool1D, kernel, stride, 0, 0, padding};
}

LayerSpec LayerSpec::relu() { return {LayerKind::kRelu, 1, 1, 0, 0, Padding::kSame}; }

LayerSpec LayerSpec::softmax() {
  return {LayerKind::kSoftmax, 1, 1, 0, 0, Padding::kSame};
}

std::size_t window_output_length(std::size_t length, std::size_t kernel,
                                 std::size_t stride, Padding padding) {
  if (kernel == 0 || stride == 0) {
    throw ConfigError("window layer: kernel and stride must be >= 1");
  }
  if (padding == Padding::kSame) return (length + stride - 1) / stride;
  if (length < kernel) {
    throw ConfigError("window layer: input shorter than kernel under valid padding");
  }
  return (length - kernel) / stride + 1;
}

std::size_t same_padding_left(std::size_t length, std::size_t kernel,
                              std::size_t stride) {
  const std::size_t out = (length + stride - 1) / stride;
  const std::size_t needed = (out - 1) * stride + kernel;
  const std::size_t total = needed > length ? needed - length : 0;
  return total / 2;
}

namespace {

std::size_t left_pad(const LayerSpec& spec, std::size_t length) {
  return spec.padding == Padding::kSame
             ? same_padding_left(length, spec.kernel, spec.stride)
             : 0;
}

std::string layer_error(std::size_t index, const LayerSpec& spec,
                        const std::string& what) {
  std::ostringstream os;
  os << "layer " << index << " (" << to_string(spec.kind) << "): " << what;
  return os.str();
}

}  // namespace

Network::Network(Shape input, std::vector<LayerSpec> layers)
    : input_(input), layers_(std::move(layers)) {
  if (input_.size() == 0) throw ConfigError("network: empty input shape");
  if (layers_.empty()) throw ConfigError("network: no layers");
  shapes_.push_back(input_);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& spec = layers_[i];
    const Shape in = shapes_.back();
    Shape out = in;
    LayerParams params;
    switch (spec.kind) {
      case LayerKind::kDense:
        if (spec.in_features != in.size()) {
          throw ConfigError(layer_error(i, spec, "in_features " +
                                                     std::to_string(spec.in_features) +
                                                     " != input size " +
                                                     std::to_string(in.size())));
        }
        if (spec.out_features == 0) {
          throw ConfigError(layer_error(i, spec, "out_features must be >= 1"));
        }
        out = {1, spec.out_features};
        params.weights.assign(spec.out_features * spec.in_features, 0.0);
        params.bias.assign(spec.out_features, 0.0);
        break;
      case LayerKind::kConv1D:
        if (spec.in_features != in.channels) {
          throw ConfigError(layer_error(i, spec, "in channels mismatch"));
        }
        if (spec.out_features == 0) {
          throw ConfigError(layer_error(i, spec, "out channels must be >= 1"));
        }
        out = {spec.out_features,
               window_output_length(in.length, spec.kernel, spec.stride, spec.padding)};
        params.weights.assign(spec.out_features * spec.in_features * spec.kernel, 0.0);
        params.bias.assign(spec.out_features, 0.0);
        break;
      case LayerKind::kMaxPool1D:
        out = {in.channels,
               window_output_length(in.length, spec.kernel, spec.stride, spec.padding)};
        break;
      case LayerKind::kRelu:
      case LayerKind::kSoftmax:
        break;
      default:
        throw ConfigError(layer_error(i, spec, "unknown layer kind"));
    }
    shapes_.push_back(out);
    params_.push_back(std::move(params));
  }
}

void Network::initialize(std::uint64_t seed) {
  Rng rng = make_rng(derive_seed(seed, stream::kNetInit));
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& spec = layers_[i];
    if (!spec.has_parameters()) continue;
    const std::size_t fan_in = spec.kind == LayerKind::kDense
                                   ? spec.in_features
                                   : spec.in_features * spec.kernel;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : params_[i].weights) w = dist(rng);
    std::fill(params_[i].bias.begin(), params_[i].bias.end(), 0.0);
  }
}

void Network::check_input(const Tensor& input) const {
  if (input.shape() != input_) {
    std::ostringstream os;
    os << "network: input shape " << input.channels() << "x" << input.length()
       << " does not match declared " << input_.channels << "x" << input_.length;
    throw ConfigError(os.str());
  }
}

namespace {

Tensor apply_layer(const LayerSpec& spec, const LayerParams& params,
                   const Tensor& in, const Shape& out_shape) {
  Tensor out(out_shape);
  switch (spec.kind) {
    case LayerKind::kDense: {
      const std::size_t n_in = spec.in_features;
      const auto x = in.values();
      for (std::size_t o = 0; o < spec.out_features; ++o) {
        const double* w = params.weights.data() + o * n_in;
        double acc = params.bias[o];
        for (std::size_t i = 0; i < n_in; ++i) acc += w[i] * x[i];
        out[o] = acc;
      }
      break;
    }
    case LayerKind::kConv1D: {
      const std::size_t len = in.length();
      const std::size_t k = spec.kernel;
      const std::size_t pad = left_pad(spec, len);
      for (std::size_t o = 0; o < spec.out_features; ++o) {
        for (std::size_t j = 0; j < out_shape.length; ++j) {
          double acc = params.bias[o];
          const std::ptrdiff_t start =
              static_cast<std::ptrdiff_t>(j * spec.stride) - static_cast<std::ptrdiff_t>(pad);
          for (std::size_t c = 0; c < spec.in_features; ++c) {
            const double* w = params.weights.data() + (o * spec.in_features + c) * k;
            const double* x = in.values().data() + c * len;
            for (std::size_t t = 0; t < k; ++t) {
              const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(t);
              if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(len)) continue;
              acc += w[t] * x[idx];
            }
          }
          out.at(o, j) = acc;
        }
      }
      break;
    }
    case LayerKind::kMaxPool1D: {
      const std::size_t len = in.length();
      const std::size_t pad = left_pad(spec, len);
      for (std::size_t c = 0; c < in.channels(); ++c) {
        for (std::size_t j = 0; j < out_shape.length; ++j) {
          const std::ptrdiff_t start =
              static_cast<std::ptrdiff_t>(j * spec.stride) - static_cast<std::ptrdiff_t>(pad);
          double best = -std::numeric_limits<double>::infinity();
          for (std::size_t t = 0; t < spec.kernel; ++t) {
            const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(t);
            if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(len)) continue;
            best = std::max(best, in.at(c, static_cast<std::size_t>(idx)));
          }
          out.at(c, j) = best;
        }
      }
      break;
    }
    case LayerKind::kRelu:
      for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
      break;
    case LayerKind::kSoftmax:
      out = softmax(in);
      break;
  }
  return out;
}

}  // namespace

Tensor Network::forward(const Tensor& input) const {
  check_input(input);
  Tensor current = input;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    current = apply_layer(layers_[i], params_[i], current, shapes_[i + 1]);
  }
  return current;
}

Activations Network::forward_cached(const Tensor& input) const {
  check_input(input);
  Activations acts;
  acts.values.reserve(layers_.size() + 1);
  acts.values.push_back(input);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    acts.values.push_back(
        apply_layer(layers_[i], params_[i], acts.values.back(), shapes_[i + 1]));
  }
  return acts;
}

Tensor Network::backward(const Activations& acts, const Tensor& grad_output,
                         Gradients& grads, std::size_t last) const {
  if (last >= layers_.size()) throw ConfigError("backward: layer index out of range");
  if (grad_output.shape() != shapes_[last + 1]) {
    throw ConfigError("backward: gradient shape mismatch");
  }
  Tensor grad = grad_output;
  for (std::size_t li = last + 1; li-- > 0;) {
    const LayerSpec& spec = layers_[li];
    const Tensor& in = acts.values[li];
    const Tensor& out = acts.values[li + 1];
    Tensor grad_in(in.shape());
    switch (spec.kind) {
      case LayerKind::kDense: {
        const std::size_t n_in = spec.in_features;
        LayerParams& g = grads[li];
        const double* x = in.values().data();
        for (std::size_t o = 0; o < spec.out_features; ++o) {
          const double go = grad[o];
          if (go == 0.0) continue;
          g.bias[o] += go;
          const double* w = params_[li].weights.data() + o * n_in;
          double* gw = g.weights.data() + o * n_in;
          double* gi = grad_in.values().data();
          for (std::size_t i = 0; i < n_in; ++i) {
            gw[i] += go * x[i];
            gi[i] += go * w[i];
          }
        }
        break;
      }
      case LayerKind::kConv1D: {
        const std::size_t len = in.length();
        const std::size_t k = spec.kernel;
        const std::size_t pad = left_pad(spec, len);
        LayerParams& g = grads[li];
        for (std::size_t o = 0; o < spec.out_features; ++o) {
          for (std::size_t j = 0; j < out.length(); ++j) {
            const double go = grad.at(o, j);
            if (go == 0.0) continue;
            g.bias[o] += go;
            const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(j * spec.stride) -
                                         static_cast<std::ptrdiff_t>(pad);
            for (std::size_t c = 0; c < spec.in_features; ++c) {
              const std::size_t wbase = (o * spec.in_features + c) * k;
              for (std::size_t t = 0; t < k; ++t) {
                const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(t);
                if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(len)) continue;
                const auto u = static_cast<std::size_t>(idx);
                g.weights[wbase + t] += go * in.at(c, u);
                grad_in.at(c, u) += go * params_[li].weights[wbase + t];
              }
            }
          }
        }
        break;
      }
      case LayerKind::kMaxPool1D: {
        const std::size_t len = in.length();
        const std::size_t pad = left_pad(spec, len);
        for (std::size_t c = 0; c < in.channels(); ++c) {
          for (std::size_t j = 0; j < out.length(); ++j) {
            const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(j * spec.stride) -
                                         static_cast<std::ptrdiff_t>(pad);
            // Route to the first position attaining the max.
            std::size_t best_idx = 0;
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t t = 0; t < spec.kernel; ++t) {
              const std::ptrdiff_t idx = start + static_cast<std::ptrdiff_t>(t);
              if (idx < 0 || idx >= static_cast<std::ptrdiff_t>(len)) continue;
              const double v = in.at(c, static_cast<std::size_t>(idx));
              if (v > best) {
                best = v;
                best_idx = static_cast<std::size_t>(idx);
              }
            }
            grad_in.at(c, best_idx) += grad.at(c, j);
          }
        }
        break;
      }
      case LayerKind::kRelu:
        for (std::size_t i = 0; i < in.size(); ++i) {
          grad_in[i] = in[i] > 0.0 ? grad[i] : 0.0;
        }
        break;
      case LayerKind::kSoftmax: {
        double dot = 0.0;
        for (std::size_t i = 0; i < out.size(); ++i) dot += out[i] * grad[i];
        for (std::size_t i = 0; i < out.size(); ++i) {
          grad_in[i] = out[i] * (grad[i] - dot);
        }
        break;
      }
    }
    grad = std::move(grad_in);
  }
  return grad;
}

Gradients Network::zero_gradients() const {
  Gradients g(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    g[i].weights.assign(params_[i].weights.size(), 0.0);
    g[i].bias.assign(params_[i].bias.size(), 0.0);
  }
  return g;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.weights.size() + p.bias.size();
  return n;
}

bool Network::parameters_finite() const {
  for (const auto& p : params_) {
    for (double w : p.weights) {
      if (!std::isfinite(w)) return false;
    }
    for (double b : p.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

bool operator==(const Network& a, const Network& b) {
  if (!(a.input_ == b.input_) || a.layers_ != b.layers_) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].weights != b.params_[i].weights ||
        a.params_[i].bias != b.params_[i].bias) {
      return false;
    }
  }
  return true;
}

Tensor softmax(const Tensor& logits) {
  Tensor out(logits.shape());
  if (logits.size() == 0) return out;
  const auto v = logits.values();
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (std::size_t i = 0; i < v.size(); ++i) out[i] /= sum;
  return out;
}

double cross_entropy(const Tensor& probs, const Tensor& one_hot, double eps) {
  if (probs.size() != one_hot.size()) {
    throw InputError("cross_entropy: size mismatch");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (one_hot[i] != 0.0) loss -= one_hot[i] * std::log(std::max(probs[i], eps));
  }
  return loss;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace eds::nn
