#include "eds/nn/trainer.hpp"

#include <cmath>
#include <sstream>

#include "eds/common.hpp"

namespace eds::nn {

namespace {

void check_cross_entropy_net(const Network& net) {
  if (net.layers().empty() || net.layers().back().kind != LayerKind::kSoftmax) {
    throw ConfigError("cross-entropy loss requires a trailing softmax layer");
  }
  if (net.layers().size() < 2) {
    throw ConfigError("cross-entropy loss requires at least one layer before softmax");
  }
}

}  // namespace

LossAndGradients compute_gradients(const Network& net, std::span<const Sample> batch,
                                   Loss loss) {
  if (batch.empty()) throw InputError("compute_gradients: empty batch");
  if (loss == Loss::kCrossEntropy) check_cross_entropy_net(net);

  LossAndGradients result{0.0, net.zero_gradients()};
  const std::size_t n_layers = net.layers().size();
  for (const Sample& s : batch) {
    const Activations acts = net.forward_cached(s.input);
    const Tensor& y = acts.output();
    if (s.target.size() != y.size()) throw InputError("compute_gradients: target size mismatch");
    Tensor grad(y.shape());
    if (loss == Loss::kSquaredError) {
      double l = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - s.target[i];
        l += 0.5 * d * d;
        grad[i] = d;
      }
      result.loss += l;
      net.backward(acts, grad, result.grads, n_layers - 1);
    } else {
      result.loss += cross_entropy(y, s.target);
      for (std::size_t i = 0; i < y.size(); ++i) grad[i] = y[i] - s.target[i];
      net.backward(acts, grad, result.grads, n_layers - 2);
    }
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  result.loss *= scale;
  for (auto& g : result.grads) {
    for (double& w : g.weights) w *= scale;
    for (double& b : g.bias) b *= scale;
  }
  return result;
}

double evaluate_loss(const Network& net, std::span<const Sample> batch, Loss loss) {
  if (batch.empty()) throw InputError("evaluate_loss: empty batch");
  double total = 0.0;
  for (const Sample& s : batch) {
    const Tensor y = net.forward(s.input);
    if (loss == Loss::kSquaredError) {
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - s.target[i];
        total += 0.5 * d * d;
      }
    } else {
      total += cross_entropy(y, s.target);
    }
  }
  return total / static_cast<double>(batch.size());
}

SgdTrainer::SgdTrainer(Network& net, SgdOptions options)
    : net_(net), options_(options), velocity_(net.zero_gradients()) {
  if (options_.learning_rate < 0.0) throw ConfigError("sgd: negative learning rate");
  if (options_.momentum < 0.0 || options_.momentum >= 1.0) {
    throw ConfigError("sgd: momentum must be in [0, 1)");
  }
}

double SgdTrainer::step(std::span<const Sample> batch) {
  LossAndGradients lg = compute_gradients(net_, batch, options_.loss);
  if (!std::isfinite(lg.loss)) {
    std::ostringstream os;
    os << "sgd: non-finite loss " << lg.loss << " on batch of " << batch.size();
    throw TrainingError(os.str());
  }
  for (std::size_t li = 0; li < lg.grads.size(); ++li) {
    for (const auto* v : {&lg.grads[li].weights, &lg.grads[li].bias}) {
      for (double g : *v) {
        if (!std::isfinite(g)) {
          std::ostringstream os;
          os << "sgd: non-finite gradient in layer " << li << " ("
             << to_string(net_.layers()[li].kind) << "), batch loss " << lg.loss;
          throw TrainingError(os.str());
        }
      }
    }
  }
  const double lr = options_.learning_rate;
  const double mu = options_.momentum;
  auto params = net_.params();
  for (std::size_t li = 0; li < params.size(); ++li) {
    auto update = [&](std::vector<double>& w, std::vector<double>& v,
                      const std::vector<double>& g) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = mu * v[i] - lr * g[i];
        w[i] += v[i];
      }
    };
    update(params[li].weights, velocity_[li].weights, lg.grads[li].weights);
    update(params[li].bias, velocity_[li].bias, lg.grads[li].bias);
  }
  return lg.loss;
}

}  // namespace eds::nn
