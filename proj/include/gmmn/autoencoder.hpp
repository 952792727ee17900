#pragma once

#include <functional>
#include <vector>

#include "gmmn/network.hpp"
#include "gmmn/training.hpp"

namespace gmmn {

/// Sigmoid encoder and mirrored sigmoid decoder. Codes live in (0, 1), the
/// output range of a GMMN with a sigmoid output layer.
struct AutoEncoder {
  Network encoder;
  Network decoder;

  Index input_dim() const { return encoder.input_dim(); }
  Index code_dim() const { return encoder.output_dim(); }

  /// Throws ShapeError unless the decoder mirrors the encoder's dimensions.
  void validate() const;
};

/// Sigmoid encoder layers input_dim -> widths[0] -> ... -> widths.back().
std::vector<LayerSpec> encoder_specs(Index input_dim, const std::vector<Index>& widths);

/// Decoder mirroring an encoder: reversed dims, sigmoid everywhere, no dropout.
std::vector<LayerSpec> mirror_specs(const std::vector<LayerSpec>& encoder);

/// Fan-based random initialisation of both halves.
AutoEncoder init_autoencoder(const std::vector<LayerSpec>& encoder_arch, Rng& rng);

/// Eval-mode encoder pass.
MatrixXd encode(const AutoEncoder& ae, const MatrixXd& x);
/// Eval-mode decoder pass.
MatrixXd decode(const AutoEncoder& ae, const MatrixXd& codes);

/// Lower and upper clamp applied to reconstructions before taking logs.
inline constexpr double kCrossEntropyClamp = 1e-7;

/// Mean over rows of -sum_p [t log r + (1 - t) log(1 - r)], r clamped to
/// [1e-7, 1 - 1e-7].
double cross_entropy(const MatrixXd& recon, const MatrixXd& target);

/// Gradient of cross_entropy with respect to recon (zero where the clamp is active).
MatrixXd cross_entropy_grad(const MatrixXd& recon, const MatrixXd& target);

/// Greedy layer-wise pretraining. Stage l trains encoder layer l together with
/// a temporary sigmoid decode layer on the codes of layers 0..l-1, for
/// cfg.steps minibatch steps. The temporary decode layers become the final
/// decoder (in mirrored order). Encoder layers use cfg.dropout_rate.
AutoEncoder pretrain_layerwise(const MatrixXd& data, const std::vector<LayerSpec>& arch, const TrainConfig& cfg,
                               Rng& rng);

struct EpochRecord {
  Index epoch = 0;
  Index step = 0;
  double train_ce = 0.0;   ///< mean minibatch CE over the epoch
  double heldout_ce = 0.0; ///< NaN when no held-out set was given
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Joint end-to-end training on cross entropy for cfg.steps steps, dropout
/// (cfg.dropout_rate) on the encoder layer outputs only. Reports once per
/// epoch and once more after the final step if it ends mid-epoch.
AutoEncoder finetune(AutoEncoder ae, const MatrixXd& data, const TrainConfig& cfg, Rng& rng,
                     const MatrixXd* heldout = nullptr, const EpochCallback& on_epoch = {});

} // namespace gmmn
