#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "eds/nn/tensor.hpp"

namespace eds::nn {

enum class LayerKind : std::uint32_t {
  kDense = 1,
  kConv1D = 2,
  kMaxPool1D = 3,
  kRelu = 4,
  kSoftmax = 5,
};

enum class Padding : std::uint32_t {
  kSame = 0,   // output length ceil(n / stride), zero/ignored padding split as TF does
  kValid = 1,  // output length (n - k) / stride + 1
};

std::string to_string(LayerKind kind);

// For dense layers in/out_features are unit counts (the input is flattened);
// for conv1d they are channel counts. Activation and pooling layers ignore them.
struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t in_features = 0;
  std::size_t out_features = 0;
  Padding padding = Padding::kSame;

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec conv1d(std::size_t in_channels, std::size_t out_channels,
                          std::size_t kernel, std::size_t stride,
                          Padding padding = Padding::kSame);
  static LayerSpec maxpool1d(std::size_t kernel, std::size_t stride,
                             Padding padding = Padding::kSame);
  static LayerSpec relu();
  static LayerSpec softmax();

  bool has_parameters() const {
    return kind == LayerKind::kDense || kind == LayerKind::kConv1D;
  }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Output length of a sliding window (conv or pool) over `length` samples.
std::size_t window_output_length(std::size_t length, std::size_t kernel,
                                 std::size_t stride, Padding padding);
// Left padding for the same-padding rule (total padding split floor/ceil).
std::size_t same_padding_left(std::size_t length, std::size_t kernel,
                              std::size_t stride);

struct LayerParams {
  std::vector<double> weights;
  std::vector<double> bias;
};

using Gradients = std::vector<LayerParams>;

// Per-layer outputs of one forward pass; values[0] is the input.
struct Activations {
  std::vector<Tensor> values;
  const Tensor& output() const { return values.back(); }
};

class Network {
 public:
  Network() = default;
  // Validates the layer chain against `input` and allocates zeroed parameters.
  Network(Shape input, std::vector<LayerSpec> layers);

  // He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
  void initialize(std::uint64_t seed);

  Tensor forward(const Tensor& input) const;
  Activations forward_cached(const Tensor& input) const;

  // Backpropagates `grad_output` (d loss / d output of layer `last`) through
  // layers [0, last], accumulating parameter gradients into `grads`.
  // Returns d loss / d input.
  Tensor backward(const Activations& acts, const Tensor& grad_output,
                  Gradients& grads, std::size_t last) const;
  Tensor backward(const Activations& acts, const Tensor& grad_output,
                  Gradients& grads) const {
    return backward(acts, grad_output, grads, layers_.size() - 1);
  }

  Gradients zero_gradients() const;

  const Shape& input_shape() const { return input_; }
  const Shape& output_shape() const { return shapes_.back(); }
  // shapes()[i] is the output shape of layer i.
  std::span<const Shape> shapes() const { return {shapes_.data() + 1, layers_.size()}; }
  std::span<const LayerSpec> layers() const { return layers_; }
  std::span<const LayerParams> params() const { return params_; }
  std::span<LayerParams> params() { return params_; }
  std::size_t parameter_count() const;
  bool parameters_finite() const;

  friend bool operator==(const Network& a, const Network& b);

 private:
  void check_input(const Tensor& input) const;

  Shape input_{};
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;  // shapes_[0] = input, shapes_[i + 1] = layer i output
  std::vector<LayerParams> params_;
};

// Numerically stable softmax (max subtracted first).
Tensor softmax(const Tensor& logits);

// -log(max(probs[hot], eps)) for the hot index of `one_hot`.
double cross_entropy(const Tensor& probs, const Tensor& one_hot,
                     double eps = 1e-12);

// Index of the maximum entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

}  // namespace eds::nn
