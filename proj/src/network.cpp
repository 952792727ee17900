#include "gmmn/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace gmmn {

namespace {

constexpr double kSigmoidLow = std::numeric_limits<double>::min();
constexpr double kSigmoidHigh = 1.0 - 0x1.0p-53;
constexpr Index kPredictChunk = 64;

double sigmoid(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  // Keep outputs strictly inside (0, 1) even when exp saturates.
  return std::clamp(s, kSigmoidLow, kSigmoidHigh);
}

MatrixXd activate(const MatrixXd& pre, Activation a) {
  switch (a) {
  case Activation::relu:
    return pre.cwiseMax(0.0);
  case Activation::sigmoid:
    return pre.unaryExpr([](double x) { return sigmoid(x); });
  case Activation::linear:
    return pre;
  }
  throw ConfigError("unknown activation");
}

// d activation / d pre, elementwise.
MatrixXd activation_slope(const MatrixXd& pre, Activation a) {
  switch (a) {
  case Activation::relu:
    return (pre.array() > 0.0).cast<double>().matrix();
  case Activation::sigmoid:
    return pre.unaryExpr([](double x) {
      const double s = sigmoid(x);
      return s * (1.0 - s);
    });
  case Activation::linear:
    return MatrixXd::Ones(pre.rows(), pre.cols());
  }
  throw ConfigError("unknown activation");
}

void check_trace(const Network& net, const ForwardTrace& trace) {
  const std::size_t n = net.layers.size();
  if (trace.pre.size() != n || trace.post.size() != n || trace.masks.size() != n) {
    throw ShapeError("backward: stale trace with " + std::to_string(trace.pre.size()) +
                     " layers for a network of " + std::to_string(n));
  }
  if (trace.input.cols() != net.input_dim()) {
    throw ShapeError("backward: stale trace input " + shape_string(trace.input));
  }
  for (std::size_t l = 0; l < n; ++l) {
    const Index out = net.layers[l].spec.out_dim;
    const bool ok = trace.pre[l].rows() == trace.input.rows() && trace.pre[l].cols() == out &&
                    trace.post[l].rows() == trace.input.rows() && trace.post[l].cols() == out &&
                    (trace.masks[l].size() == 0 ||
                     (trace.masks[l].rows() == trace.input.rows() && trace.masks[l].cols() == out));
    if (!ok) throw ShapeError("backward: stale trace at layer " + std::to_string(l));
  }
}

} // namespace

std::string_view to_string(Activation a) {
  switch (a) {
  case Activation::relu:
    return "relu";
  case Activation::sigmoid:
    return "sigmoid";
  case Activation::linear:
    return "linear";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "linear") return Activation::linear;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected relu, sigmoid or linear)");
}

void validate_specs(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw ConfigError("network needs at least one layer");
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const auto& s = specs[l];
    if (s.in_dim <= 0 || s.out_dim <= 0) {
      throw ConfigError("layer " + std::to_string(l) + ": dimensions must be positive");
    }
    if (!(s.dropout_rate >= 0.0 && s.dropout_rate < 1.0)) {
      throw ConfigError("layer " + std::to_string(l) + ": dropout rate must be in [0, 1)");
    }
    if (l > 0 && specs[l - 1].out_dim != s.in_dim) {
      throw ShapeError("layer " + std::to_string(l) + ": input dim " + std::to_string(s.in_dim) +
                       " does not match previous output dim " + std::to_string(specs[l - 1].out_dim));
    }
  }
}

Network::Network(const std::vector<LayerSpec>& specs) {
  validate_specs(specs);
  layers.reserve(specs.size());
  for (const auto& s : specs) {
    layers.push_back(Layer{s, MatrixXd::Zero(s.in_dim, s.out_dim), RowVectorXd::Zero(s.out_dim),
                           MatrixXd::Zero(s.in_dim, s.out_dim), RowVectorXd::Zero(s.out_dim)});
  }
}

Index Network::input_dim() const { return layers.empty() ? 0 : layers.front().spec.in_dim; }

Index Network::output_dim() const { return layers.empty() ? 0 : layers.back().spec.out_dim; }

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& l : layers) out.push_back(l.spec);
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

Network init_network(const std::vector<LayerSpec>& specs, Rng& rng) {
  Network net(specs);
  for (auto& layer : net.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.spec.in_dim + layer.spec.out_dim));
    layer.weights = rng_uniform<double>(rng, layer.spec.in_dim, layer.spec.out_dim, -limit, limit);
  }
  return net;
}

std::vector<LayerSpec> mlp_specs(Index input_dim, const std::vector<Index>& hidden, Index output_dim,
                                 Activation hidden_activation, Activation output_activation) {
  std::vector<LayerSpec> specs;
  Index prev = input_dim;
  for (Index width : hidden) {
    specs.push_back({prev, width, hidden_activation, 0.0});
    prev = width;
  }
  specs.push_back({prev, output_dim, output_activation, 0.0});
  validate_specs(specs);
  return specs;
}

namespace {

template <typename A, typename B>
bool same_bits(const A& a, const B& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

} // namespace

bool bitwise_equal(const Network& a, const Network& b) {
  if (a.layers.size() != b.layers.size() || a.update_count != b.update_count) return false;
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    const auto& x = a.layers[l];
    const auto& y = b.layers[l];
    if (x.spec.in_dim != y.spec.in_dim || x.spec.out_dim != y.spec.out_dim ||
        x.spec.activation != y.spec.activation ||
        std::memcmp(&x.spec.dropout_rate, &y.spec.dropout_rate, sizeof(double)) != 0) {
      return false;
    }
    if (!same_bits(x.weights, y.weights) || !same_bits(x.bias, y.bias) ||
        !same_bits(x.weight_velocity, y.weight_velocity) || !same_bits(x.bias_velocity, y.bias_velocity)) {
      return false;
    }
  }
  return true;
}

MatrixXd sample_prior(Rng& rng, Index batch, Index h_dim) {
  if (batch < 1 || h_dim < 1) throw ConfigError("sample_prior: batch and h_dim must be positive");
  return rng_uniform<double>(rng, batch, h_dim, -1.0, 1.0);
}

ForwardTrace forward(const Network& net, const MatrixXd& input, Mode mode, Rng& rng) {
  if (net.layers.empty()) throw ConfigError("forward: empty network");
  if (input.cols() != net.input_dim()) {
    throw ShapeError("forward: input " + shape_string(input) + " but network expects " +
                     std::to_string(net.input_dim()) + " columns");
  }
  ForwardTrace trace;
  trace.input = input;
  trace.pre.reserve(net.layers.size());
  trace.post.reserve(net.layers.size());
  trace.masks.reserve(net.layers.size());
  const MatrixXd* x = &trace.input;
  for (const auto& layer : net.layers) {
    MatrixXd pre(x->rows(), layer.spec.out_dim);
    pre.noalias() = *x * layer.weights;
    pre.rowwise() += layer.bias;
    MatrixXd post = activate(pre, layer.spec.activation);
    MatrixXd mask;
    if (mode == Mode::train && layer.spec.dropout_rate > 0.0) {
      const double keep = 1.0 - layer.spec.dropout_rate;
      mask.resize(post.rows(), post.cols());
      for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
      post.array() *= mask.array();
    }
    trace.pre.push_back(std::move(pre));
    trace.post.push_back(std::move(post));
    trace.masks.push_back(std::move(mask));
    x = &trace.post.back();
  }
  return trace;
}

MatrixXd predict(const Network& net, const MatrixXd& input) {
  if (net.layers.empty()) throw ConfigError("predict: empty network");
  if (input.cols() != net.input_dim()) {
    throw ShapeError("predict: input " + shape_string(input) + " but network expects " +
                     std::to_string(net.input_dim()) + " columns");
  }
  // Every chunk is a full kPredictChunk rows (zero padded), so all products
  // have identical shapes and a row's result does not depend on the batch it
  // arrived in.
  MatrixXd out(input.rows(), net.output_dim());
  MatrixXd chunk(kPredictChunk, net.input_dim());
  for (Index begin = 0; begin < input.rows(); begin += kPredictChunk) {
    const Index n = std::min(kPredictChunk, input.rows() - begin);
    chunk.setZero();
    chunk.topRows(n) = input.middleRows(begin, n);
    MatrixXd x = chunk;
    for (const auto& layer : net.layers) {
      MatrixXd pre(kPredictChunk, layer.spec.out_dim);
      pre.noalias() = x * layer.weights;
      pre.rowwise() += layer.bias;
      x = activate(pre, layer.spec.activation);
    }
    out.middleRows(begin, n) = x.topRows(n);
  }
  return out;
}

bool Gradients::all_finite() const {
  for (const auto& w : weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

Gradients backward(const Network& net, const ForwardTrace& trace, const MatrixXd& grad_output) {
  check_trace(net, trace);
  if (grad_output.rows() != trace.output().rows() || grad_output.cols() != trace.output().cols()) {
    throw ShapeError("backward: output gradient " + shape_string(grad_output) + " but forward output is " +
                     shape_string(trace.output()));
  }
  const std::size_t n = net.layers.size();
  Gradients grads;
  grads.weights.resize(n);
  grads.biases.resize(n);

  MatrixXd g = grad_output;
  for (std::size_t l = n; l-- > 0;) {
    const auto& layer = net.layers[l];
    if (trace.masks[l].size() != 0) g.array() *= trace.masks[l].array();
    g.array() *= activation_slope(trace.pre[l], layer.spec.activation).array();

    const MatrixXd& x = l == 0 ? trace.input : trace.post[l - 1];
    grads.weights[l].noalias() = x.transpose() * g;
    grads.biases[l] = g.colwise().sum();
    MatrixXd next(g.rows(), layer.spec.in_dim);
    next.noalias() = g * layer.weights.transpose();
    g = std::move(next);
  }
  grads.input = std::move(g);
  return grads;
}

void sgd_momentum_step(Network& net, const Gradients& grads, double lr, double momentum) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("sgd: learning rate must be non-negative");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("sgd: momentum must be in [0, 1)");
  const std::size_t n = net.layers.size();
  if (grads.weights.size() != n || grads.biases.size() != n) {
    throw ShapeError("sgd: gradient list does not match network depth");
  }
  for (std::size_t l = 0; l < n; ++l) {
    const auto& layer = net.layers[l];
    if (grads.weights[l].rows() != layer.weights.rows() || grads.weights[l].cols() != layer.weights.cols() ||
        grads.biases[l].size() != layer.bias.size()) {
      throw ShapeError("sgd: gradient shape mismatch at layer " + std::to_string(l));
    }
  }
  if (!grads.all_finite()) {
    throw NumericalError("sgd: non-finite gradient, update rejected at update " +
                         std::to_string(net.update_count));
  }

  std::vector<MatrixXd> wv(n), w(n);
  std::vector<RowVectorXd> bv(n), b(n);
  for (std::size_t l = 0; l < n; ++l) {
    const auto& layer = net.layers[l];
    wv[l] = momentum * layer.weight_velocity - lr * grads.weights[l];
    bv[l] = momentum * layer.bias_velocity - lr * grads.biases[l];
    w[l] = layer.weights + wv[l];
    b[l] = layer.bias + bv[l];
    if (!w[l].allFinite() || !b[l].allFinite() || !wv[l].allFinite() || !bv[l].allFinite()) {
      throw NumericalError("sgd: update would produce non-finite parameters at layer " + std::to_string(l));
    }
  }
  for (std::size_t l = 0; l < n; ++l) {
    auto& layer = net.layers[l];
    layer.weight_velocity = std::move(wv[l]);
    layer.bias_velocity = std::move(bv[l]);
    layer.weights = std::move(w[l]);
    layer.bias = std::move(b[l]);
  }
  ++net.update_count;
}

} // namespace gmmn
