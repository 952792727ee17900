#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gmmn/linalg.hpp"
#include "gmmn/mmd.hpp"

namespace gmmn {

enum class LossKind { mmd2, sqrt_mmd };

std::string_view to_string(LossKind k);
LossKind parse_loss(std::string_view name);

/// Optimizer and schedule settings shared by autoencoder and GMMN training.
struct TrainConfig {
  double lr = 0.1;
  double momentum = 0.9;
  /// Data minibatch size; GMMN training draws the same number of prior samples.
  Index minibatch = 100;
  Index steps = 1000;
  KernelSpec kernel = KernelSpec::pixel_defaults();
  LossKind loss = LossKind::sqrt_mmd;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;
  /// Loss telemetry interval in steps; 0 logs only the final step.
  Index log_every = 100;
  /// Cap on held-out rows (and generated samples) used for held-out MMD.
  Index heldout_samples = 1000;
  /// Early stopping on held-out sqrt(MMD^2), in evaluations without
  /// improvement (evaluated every log_every steps). 0 disables.
  Index patience = 0;

  /// Throws ConfigError on out-of-range values. A zero learning rate is
  /// accepted (it makes every update a no-op).
  void validate() const;
};

/// Epoch-based minibatch index stream: each epoch is a fresh permutation of
/// the rows cut into floor(rows / batch) batches; the ragged tail is dropped.
class MinibatchSampler {
public:
  MinibatchSampler(Index rows, Index batch, Rng rng);

  /// Indices of the next minibatch. Valid until the following call.
  std::span<const Index> next();

  Index batch_size() const noexcept { return batch_; }
  Index batches_per_epoch() const noexcept { return rows_ / batch_; }
  /// Number of epochs started so far (0 before the first call to next()).
  Index epoch() const noexcept { return epoch_; }

private:
  void reshuffle();

  Index rows_;
  Index batch_;
  Rng rng_;
  std::vector<Index> order_;
  Index cursor_ = 0;
  Index epoch_ = 0;
};

/// Rows of m selected by idx, in order.
MatrixXd gather_rows(const MatrixXd& m, std::span<const Index> idx);

} // namespace gmmn
