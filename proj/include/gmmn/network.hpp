#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gmmn/linalg.hpp"

namespace gmmn {

enum class Activation { relu, sigmoid, linear };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct LayerSpec {
  Index in_dim = 0;
  Index out_dim = 0;
  Activation activation = Activation::linear;
  /// Inverted-dropout rate on this layer's output, training mode only.
  double dropout_rate = 0.0;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// One affine map y = x W + b followed by an elementwise nonlinearity.
/// Weights are (in_dim x out_dim) so that batches multiply from the left.
struct Layer {
  LayerSpec spec;
  MatrixXd weights;
  RowVectorXd bias;
  MatrixXd weight_velocity;
  RowVectorXd bias_velocity;
};

/// Feed-forward network with its momentum buffers.
struct Network {
  std::vector<Layer> layers;
  /// Number of accepted optimizer updates.
  std::uint64_t update_count = 0;

  Network() = default;

  /// Zero parameters; use init_network for a trainable starting point.
  explicit Network(const std::vector<LayerSpec>& specs);

  Index input_dim() const;
  Index output_dim() const;
  std::vector<LayerSpec> specs() const;
  std::size_t parameter_count() const;
};

/// Checks dimension chaining, positive sizes and dropout ranges.
void validate_specs(const std::vector<LayerSpec>& specs);

/// Weights uniform in +-sqrt(6 / (in + out)), biases and velocities zero.
Network init_network(const std::vector<LayerSpec>& specs, Rng& rng);

/// Hidden layers of `hidden` widths with the given activation, then an output layer.
std::vector<LayerSpec> mlp_specs(Index input_dim, const std::vector<Index>& hidden, Index output_dim,
                                 Activation hidden_activation, Activation output_activation);

/// Bitwise equality of all parameters, velocities, specs and the update counter.
bool bitwise_equal(const Network& a, const Network& b);

enum class Mode { train, eval };

/// Everything backward() needs from a forward pass.
struct ForwardTrace {
  MatrixXd input;
  std::vector<MatrixXd> pre;   ///< affine outputs per layer
  std::vector<MatrixXd> post;  ///< activations after dropout per layer
  std::vector<MatrixXd> masks; ///< 0 or 1/keep per entry; empty when no dropout was applied

  const MatrixXd& output() const { return post.back(); }
};

/// Uniform prior on [-1, 1)^h_dim, one row per draw.
MatrixXd sample_prior(Rng& rng, Index batch, Index h_dim);

ForwardTrace forward(const Network& net, const MatrixXd& input, Mode mode, Rng& rng);

/// Eval-mode forward pass (no dropout, no randomness). Rows are processed in
/// fixed-size chunks, so each output row is bitwise independent of which
/// other rows share its batch.
MatrixXd predict(const Network& net, const MatrixXd& input);

struct Gradients {
  std::vector<MatrixXd> weights;
  std::vector<RowVectorXd> biases;
  MatrixXd input; ///< gradient with respect to the network input

  bool all_finite() const;
};

/// Reverse-mode gradients of a scalar whose gradient with respect to the
/// network output is grad_output.
Gradients backward(const Network& net, const ForwardTrace& trace, const MatrixXd& grad_output);

/// Heavy-ball momentum: v <- momentum v - lr g; p <- p + v.
/// Rejects (NumericalError, network untouched) any update that would leave a
/// non-finite gradient, velocity or parameter.
void sgd_momentum_step(Network& net, const Gradients& grads, double lr, double momentum);

} // namespace gmmn
