#pragma once

#include <span>
#include <vector>

#include "eds/nn/network.hpp"

namespace eds::nn {

enum class Loss {
  kSquaredError,  // 0.5 * ||target - output||^2
  kCrossEntropy,  // -log(output[hot]); requires a trailing softmax layer
};

struct Sample {
  Tensor input;
  Tensor target;
};

// Mean loss over `batch` and its gradient with respect to every parameter.
// With kCrossEntropy the softmax and loss gradients are fused (probs - one_hot).
struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

LossAndGradients compute_gradients(const Network& net, std::span<const Sample> batch,
                                   Loss loss);

double evaluate_loss(const Network& net, std::span<const Sample> batch, Loss loss);

struct SgdOptions {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  Loss loss = Loss::kSquaredError;
};

// SGD with classical momentum: v <- momentum * v - lr * g; w <- w + v.
class SgdTrainer {
 public:
  SgdTrainer(Network& net, SgdOptions options);

  // One update on `batch`; returns the batch loss measured before the update.
  // Throws TrainingError on a non-finite loss or gradient.
  double step(std::span<const Sample> batch);

  const SgdOptions& options() const { return options_; }
  void set_learning_rate(double lr) { options_.learning_rate = lr; }

 private:
  Network& net_;
  SgdOptions options_;
  Gradients velocity_;
};

}  // namespace eds::nn
